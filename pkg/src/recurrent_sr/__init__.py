"""Recurrently trained super-resolution for image enhancement."""

__version__ = "0.1.0"
