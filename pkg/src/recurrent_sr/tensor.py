"""Minimal dense tensors with tape-based reverse-mode gradients.

Only the handful of operations the enhancement network needs are provided:
``conv2d``, ``relu``, ``add``, ``pixel_shuffle`` (and its inverse), and
``mse_loss``.  Every op takes an optional :class:`Tape`; when a tape is given
and any input requires a gradient, the op appends a record holding its
backward rule.  ``Tape.backward`` replays the records in reverse.

Arrays are NCHW.  Training runs in float32; float64 exists for gradient checks.
"""

from __future__ import annotations

import contextlib
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DEFAULT_DTYPE = np.float32


class NonFiniteError(FloatingPointError):
    """Raised when an op produces or consumes NaN/Inf values."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str = ""):
        arr = np.asarray(data)
        if dtype is None:
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else DEFAULT_DTYPE
        self.data = np.ascontiguousarray(arr, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


@dataclass
class _Record:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered log of differentiable ops for one forward pass."""

    records: list[_Record] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def record(self, op, inputs, output, backward) -> None:
        self.records.append(_Record(op, tuple(inputs), output, backward))

    def backward(self, loss: Tensor, grad_output: np.ndarray | None = None) -> None:
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

        A non-scalar ``loss`` needs an explicit ``grad_output`` of its shape
        (the vector in the vector-Jacobian product).
        """
        if grad_output is None:
            if loss.size != 1:
                raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
            grad_output = np.ones_like(loss.data)
        elif np.shape(grad_output) != loss.shape:
            raise ValueError(f"grad_output shape {np.shape(grad_output)} != {loss.shape}")
        produced = {id(r.output) for r in self.records}
        grads: dict[int, np.ndarray] = {id(loss): np.asarray(grad_output, dtype=loss.dtype)}
        for rec in reversed(self.records):
            g_out = grads.pop(id(rec.output), None)
            if g_out is None:
                continue
            for inp, g_in in zip(rec.inputs, rec.backward(g_out)):
                if g_in is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + g_in
                else:
                    grads[key] = g_in
                if key not in produced:
                    # leaf: flush immediately so it is populated even if
                    # the same leaf shows up again earlier on the tape
                    g = grads.pop(key)
                    inp.grad = g.copy() if inp.grad is None else inp.grad + g


# ---------------------------------------------------------------------------
# op counting (used to compare inference cost across stages)

_counters: list[Counter] = []


@contextlib.contextmanager
def count_ops() -> Iterator[Counter]:
    """Count op invocations (and conv multiply-accumulates under ``"macs"``)."""
    c: Counter = Counter()
    _counters.append(c)
    try:
        yield c
    finally:
        _counters.remove(c)


def _tick(op: str, macs: int = 0) -> None:
    for c in _counters:
        c[op] += 1
        if macs:
            c["macs"] += macs


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values in {what}")


def _wants_grad(tape: Tape | None, *tensors: Tensor) -> bool:
    return tape is not None and any(t.requires_grad for t in tensors)


# ---------------------------------------------------------------------------
# ops

def _im2col(arr: np.ndarray, k: int, pad: int) -> np.ndarray:
    """N x C x H x W -> (N*H*W) x (k*k*C); columns ordered (ki, kj, c).

    Works channels-last internally so the gathered runs are contiguous.
    """
    n, c, h, w = arr.shape
    xp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=arr.dtype)
    xp[:, pad:pad + h, pad:pad + w, :] = arr.transpose(0, 2, 3, 1)
    cols = sliding_window_view(xp, (k, k), axis=(1, 2))  # n, h, w, c, k, k
    return cols.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w, k * k * c)


def _as_matrix(weight: np.ndarray) -> np.ndarray:
    """O x C x k x k -> O x (k*k*C), matching the ``_im2col`` column order."""
    o = weight.shape[0]
    return np.ascontiguousarray(weight.transpose(0, 2, 3, 1)).reshape(o, -1)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, pad: int | None = None,
           tape: Tape | None = None) -> Tensor:
    """Stride-1, same-size convolution with a square odd kernel and zero padding.

    ``weight`` is O x C x k x k; ``pad`` must be (k - 1) // 2 (the default).
    """
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    o, cw, kh, kw = weight.shape
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"conv2d kernel must be square with odd size, got {kh}x{kw}")
    if cw != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, weight expects {cw}")
    if bias is not None and bias.shape != (o,):
        raise ValueError(f"conv2d bias shape {bias.shape} != ({o},)")
    k = kh
    if pad is None:
        pad = (k - 1) // 2
    if pad != (k - 1) // 2:
        raise ValueError(f"conv2d supports same-size padding only (pad={(k - 1) // 2} for k={k})")
    _check_finite(x.data, "conv2d input")
    _check_finite(weight.data, "conv2d weight")

    cols = _im2col(x.data, k, pad)
    wmat = _as_matrix(weight.data)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = np.ascontiguousarray(out.reshape(n, h, w, o).transpose(0, 3, 1, 2))
    _check_finite(out, "conv2d output")
    _tick("conv2d", n * h * w * o * c * k * k)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    result = Tensor(out, requires_grad=_wants_grad(tape, *inputs))
    if not result.requires_grad:
        return result

    def backward(g: np.ndarray):
        gm = g.transpose(0, 2, 3, 1).reshape(-1, o)
        dw = db = dx = None
        if weight.requires_grad:
            dw = (gm.T @ cols).reshape(o, k, k, c).transpose(0, 3, 1, 2)
        if bias is not None and bias.requires_grad:
            db = gm.sum(axis=0)
        if x.requires_grad:
            # transposed conv == same-size conv with the flipped kernel, in/out swapped
            wflip = weight.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
            dx = (_im2col(g, k, pad) @ _as_matrix(wflip).T).reshape(n, h, w, c).transpose(0, 3, 1, 2)
        return (dx, dw) if bias is None else (dx, dw, db)

    tape.record("conv2d", inputs, result, backward)
    return result


def relu(x: Tensor, tape: Tape | None = None) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.dtype)
    _check_finite(out, "relu output")
    _tick("relu")
    result = Tensor(out, requires_grad=_wants_grad(tape, x))
    if result.requires_grad:
        tape.record("relu", (x,), result, lambda g: (g * mask,))
    return result


def add(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Exact-shape elementwise sum (no broadcasting)."""
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = a.data + b.data
    _check_finite(out, "add output")
    _tick("add")
    result = Tensor(out, requires_grad=_wants_grad(tape, a, b))
    if result.requires_grad:
        tape.record("add", (a, b), result, lambda g: (g, g))
    return result


def _shuffle(arr: np.ndarray, r: int) -> np.ndarray:
    n, crr, h, w = arr.shape
    c = crr // (r * r)
    # channel index = c * r^2 + di * r + dj
    out = arr.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(out.reshape(n, c, h * r, w * r))


def _unshuffle(arr: np.ndarray, r: int) -> np.ndarray:
    n, c, hr, wr = arr.shape
    h, w = hr // r, wr // r
    out = arr.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(out.reshape(n, c * r * r, h, w))


def pixel_shuffle(x: Tensor, r: int = 2, tape: Tape | None = None) -> Tensor:
    """N x (C r^2) x H x W -> N x C x rH x rW, channel-major sub-pixel order."""
    if x.data.ndim != 4 or x.shape[1] % (r * r):
        raise ValueError(f"pixel_shuffle needs channels divisible by {r * r}, got shape {x.shape}")
    out = _shuffle(x.data, r)
    _tick("pixel_shuffle")
    result = Tensor(out, requires_grad=_wants_grad(tape, x))
    if result.requires_grad:
        tape.record("pixel_shuffle", (x,), result, lambda g: (_unshuffle(g, r),))
    return result


def pixel_unshuffle(x: Tensor, r: int = 2, tape: Tape | None = None) -> Tensor:
    if x.data.ndim != 4 or x.shape[2] % r or x.shape[3] % r:
        raise ValueError(f"pixel_unshuffle needs spatial extents divisible by {r}, got {x.shape}")
    out = _unshuffle(x.data, r)
    _tick("pixel_unshuffle")
    result = Tensor(out, requires_grad=_wants_grad(tape, x))
    if result.requires_grad:
        tape.record("pixel_unshuffle", (x,), result, lambda g: (_shuffle(g, r),))
    return result


def mse_loss(pred: Tensor, target: Tensor | np.ndarray, tape: Tape | None = None) -> Tensor:
    """Mean squared error; the target never receives a gradient."""
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=pred.dtype)
    if pred.shape != t.shape:
        raise ValueError(f"mse_loss shape mismatch: {pred.shape} vs {t.shape}")
    diff = pred.data - t
    val = np.array(np.mean(diff * diff), dtype=pred.dtype)
    _check_finite(val, "mse_loss")
    _tick("mse_loss")
    result = Tensor(val, requires_grad=_wants_grad(tape, pred))
    if result.requires_grad:
        scale = 2.0 / diff.size
        tape.record("mse_loss", (pred,), result, lambda g: (g * scale * diff,))
    return result


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


_MAX_STEP = 2**63 - 1


def adam_step(params: Mapping[str, Tensor], state: AdamState) -> None:
    """One bias-corrected Adam update in place; clears every ``.grad`` afterward."""
    missing = [k for k, p in params.items() if p.grad is None]
    if missing:
        raise ValueError(f"adam_step: no gradient for {missing}")
    if state.t >= _MAX_STEP:
        raise OverflowError("adam_step: step counter overflow")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    step = state.lr / bc1
    inv_bc2 = 1.0 / math.sqrt(bc2)
    for key, p in params.items():
        g = p.grad
        if key not in state.m:
            state.m[key] = np.zeros_like(p.data)
            state.v[key] = np.zeros_like(p.data)
        m, v = state.m[key], state.v[key]
        if m.shape != p.shape:
            raise ValueError(f"adam_step: moment shape {m.shape} != param shape {p.shape} for {key}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data = (p.data - step * m / (np.sqrt(v) * inv_bc2 + state.eps)).astype(p.dtype)
        p.grad = None
