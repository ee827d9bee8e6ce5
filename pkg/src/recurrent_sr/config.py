"""Experiment configuration and its flat ``key = value`` file form.

Example::

    # desk-scale run
    dataset.train_dir = data/train
    dataset.valid_dir = data/valid
    patch.size = 128
    net.residual_layers = 1
    optim.epochs = 5
    rts.max_stages = 5
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .degrade import DegradeConfig
from .net import SRNetConfig

STOP_RULES = ("fixed_n", "delta_min", "delta_rise")
TARGET_TAPS = ("sr", "blue")


class ConfigError(ValueError):
    pass


@dataclass
class RTSConfig:
    train_dir: str = ""
    valid_dir: str = ""
    out_dir: str = "rts_out"
    patch_size: int = 256
    patches_per_image: int = 100
    degrade: DegradeConfig = field(default_factory=DegradeConfig)
    net: SRNetConfig = field(default_factory=SRNetConfig)
    lr: float = 1e-3
    lr_final: float | None = None  # cosine-anneal to this within each stage; None keeps lr constant
    batch: int = 8
    epochs: int = 20
    max_stages: int = 8
    stop_rule: str = "delta_min"
    warm_start: bool = True
    target_tap: str = "sr"
    dump_images: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 2 or self.patch_size % 2:
            raise ConfigError(f"patch.size must be even, got {self.patch_size}")
        if self.max_stages < 1:
            raise ConfigError("rts.max_stages must be >= 1")
        if self.stop_rule not in STOP_RULES:
            raise ConfigError(f"rts.stop_rule must be one of {STOP_RULES}, got {self.stop_rule!r}")
        if self.target_tap not in TARGET_TAPS:
            raise ConfigError(f"rts.target_tap must be one of {TARGET_TAPS}, got {self.target_tap!r}")
        if self.lr <= 0 or (self.lr_final is not None and not 0 <= self.lr_final <= self.lr):
            raise ConfigError("optim.lr must be > 0 and optim.lr_final in [0, optim.lr]")
        if self.batch < 1 or self.epochs < 0 or self.patches_per_image < 1:
            raise ConfigError("optim.batch and patch.per_image must be >= 1, optim.epochs >= 0")


def _opt_float(s: str) -> float | None:
    return None if s.lower() == "none" else float(s)


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# file key -> (parser, default)
KEYS = {
    "dataset.train_dir": (str, ""),
    "dataset.valid_dir": (str, ""),
    "patch.size": (int, 256),
    "patch.per_image": (int, 100),
    "degrade.quality": (int, 30),
    "degrade.order": (str, "compress_then_downscale"),
    "degrade.enabled": (_bool, True),
    "net.residual_layers": (int, 3),
    "optim.lr": (float, 1e-3),
    "optim.lr_final": (_opt_float, None),
    "optim.batch": (int, 8),
    "optim.epochs": (int, 20),
    "rts.max_stages": (int, 8),
    "rts.stop_rule": (str, "delta_min"),
    "rts.warm_start": (_bool, True),
    "rts.target_tap": (str, "sr"),
    "rts.dump_images": (int, 4),
    "seed": (int, 0),
    "out_dir": (str, "rts_out"),
}


def parse_config(text: str, base_dir: str | Path | None = None) -> RTSConfig:
    """Parse the flat config grammar; relative paths resolve against ``base_dir``."""
    values = {k: default for k, (_, default) in KEYS.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            values[key] = KEYS[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None

    def path(key: str) -> str:
        p = values[key]
        if p and base_dir is not None and not Path(p).is_absolute():
            return str(Path(base_dir) / p)
        return p

    try:
        return RTSConfig(
            train_dir=path("dataset.train_dir"),
            valid_dir=path("dataset.valid_dir"),
            out_dir=path("out_dir"),
            patch_size=values["patch.size"],
            patches_per_image=values["patch.per_image"],
            degrade=DegradeConfig(values["degrade.quality"], values["degrade.order"], values["degrade.enabled"]),
            net=SRNetConfig(n_residual_layers=values["net.residual_layers"]),
            lr=values["optim.lr"],
            lr_final=values["optim.lr_final"],
            batch=values["optim.batch"],
            epochs=values["optim.epochs"],
            max_stages=values["rts.max_stages"],
            stop_rule=values["rts.stop_rule"],
            warm_start=values["rts.warm_start"],
            target_tap=values["rts.target_tap"],
            dump_images=values["rts.dump_images"],
            seed=values["seed"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RTSConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def dump_config(cfg: RTSConfig) -> str:
    rows = {
        "dataset.train_dir": cfg.train_dir,
        "dataset.valid_dir": cfg.valid_dir,
        "patch.size": cfg.patch_size,
        "patch.per_image": cfg.patches_per_image,
        "degrade.quality": cfg.degrade.quality,
        "degrade.order": cfg.degrade.order,
        "degrade.enabled": str(cfg.degrade.enabled).lower(),
        "net.residual_layers": cfg.net.n_residual_layers,
        "optim.lr": repr(cfg.lr),
        "optim.lr_final": repr(cfg.lr_final) if cfg.lr_final is not None else "none",
        "optim.batch": cfg.batch,
        "optim.epochs": cfg.epochs,
        "rts.max_stages": cfg.max_stages,
        "rts.stop_rule": cfg.stop_rule,
        "rts.warm_start": str(cfg.warm_start).lower(),
        "rts.target_tap": cfg.target_tap,
        "rts.dump_images": cfg.dump_images,
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
    }
    return "".join(f"{k} = {v}\n" for k, v in rows.items())
