"""Small residual SR network with a 3-channel "blue" enhancement output.

    f0   = relu(conv(x))                       3 -> 64
    fi   = relu(f(i-1) + conv(f(i-1)))         64 -> 64, i = 1..N
    blue = x + conv(fN)                        64 -> 3, no relu
    sr   = pixel_shuffle(conv(blue), 2)        3 -> 12 -> 3 at 2x

``blue`` lives at the input resolution and is the enhanced image; ``sr`` is
its 2x version.  Output and extension convs start at zero so a fresh network
returns ``blue == x`` and ``sr == 0``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import Tape, Tensor, add, conv2d, pixel_shuffle, relu

MAGIC = b"RTSSR1"


class CheckpointError(ValueError):
    """Corrupt or incompatible checkpoint file."""


@dataclass(frozen=True)
class SRNetConfig:
    n_residual_layers: int = 3
    body_channels: int = 64
    kernel: int = 3
    scale: int = 2

    def __post_init__(self):
        if self.n_residual_layers < 1:
            raise ValueError("n_residual_layers must be >= 1")
        if self.kernel % 2 != 1:
            raise ValueError("kernel must be odd")


@dataclass
class SROutput:
    blue: Tensor
    sr: Tensor


def param_shapes(cfg: SRNetConfig) -> dict[str, tuple[int, ...]]:
    c, k, r2 = cfg.body_channels, cfg.kernel, cfg.scale ** 2
    shapes = {"input.weight": (c, 3, k, k), "input.bias": (c,)}
    for i in range(cfg.n_residual_layers):
        shapes[f"body.{i}.weight"] = (c, c, k, k)
        shapes[f"body.{i}.bias"] = (c,)
    shapes["output.weight"] = (3, c, k, k)
    shapes["output.bias"] = (3,)
    shapes["extension.weight"] = (3 * r2, 3, k, k)
    shapes["extension.bias"] = (3 * r2,)
    return shapes


def param_count(cfg: SRNetConfig) -> int:
    """Closed form; equals 3859 + 36928 * N at the default widths."""
    c, k2, r2 = cfg.body_channels, cfg.kernel ** 2, cfg.scale ** 2
    return ((3 * c * k2 + c)
            + cfg.n_residual_layers * (c * c * k2 + c)
            + (c * 3 * k2 + 3)
            + (3 * 3 * r2 * k2 + 3 * r2))


def init_params(cfg: SRNetConfig, seed: int = 0, dtype=np.float32) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        zero = name.endswith(".bias") or name.startswith(("output.", "extension."))
        if zero:
            data = np.zeros(shape)
        else:
            fan_in = shape[1] * shape[2] * shape[3]
            bound = np.sqrt(6.0 / fan_in)
            data = rng.uniform(-bound, bound, size=shape)
        params[name] = Tensor(data, requires_grad=True, dtype=dtype, name=name)
    return params


def infer_config(params: dict[str, Tensor]) -> SRNetConfig:
    n = sum(1 for k in params if k.startswith("body.") and k.endswith(".weight"))
    c, _, k, _ = params["input.weight"].shape
    r2 = params["extension.weight"].shape[0] // 3
    return SRNetConfig(n_residual_layers=n, body_channels=c, kernel=k, scale=int(round(r2 ** 0.5)))


def forward(params: dict[str, Tensor], x: Tensor | np.ndarray, tape: Tape | None = None) -> SROutput:
    if not isinstance(x, Tensor):
        x = Tensor(x, dtype=params["input.weight"].dtype)
    if x.data.ndim == 3:
        x = Tensor(x.data[None])
    if x.data.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"network input must be N x 3 x H x W, got {x.shape}")
    if min(x.shape[2:]) < 3:
        raise ValueError(f"network input must be at least 3x3, got {x.shape[2:]}")
    cfg = infer_config(params)
    f = relu(conv2d(x, params["input.weight"], params["input.bias"], tape=tape), tape=tape)
    for i in range(cfg.n_residual_layers):
        h = conv2d(f, params[f"body.{i}.weight"], params[f"body.{i}.bias"], tape=tape)
        f = relu(add(f, h, tape=tape), tape=tape)
    r = conv2d(f, params["output.weight"], params["output.bias"], tape=tape)
    blue = add(x, r, tape=tape)
    e = conv2d(blue, params["extension.weight"], params["extension.bias"], tape=tape)
    sr = pixel_shuffle(e, cfg.scale, tape=tape)
    return SROutput(blue=blue, sr=sr)


def clone_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: Tensor(p.data.copy(), requires_grad=True, name=k) for k, p in params.items()}


# ---------------------------------------------------------------------------
# checkpoint file
#
#   "RTSSR1"
#   u32 n_residual_layers, body_channels, kernel, scale, stage, tensor_count
#   per tensor: u32 name_len, name (utf-8), u32 rank, u32 extents[rank],
#               float32 data (little-endian, C order)

_HEAD = struct.Struct("<6I")


def save_checkpoint(params: dict[str, Tensor], path, stage: int = 0) -> None:
    cfg = infer_config(params)
    parts = [MAGIC, _HEAD.pack(cfg.n_residual_layers, cfg.body_channels, cfg.kernel,
                               cfg.scale, stage, len(params))]
    for name, p in params.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{p.data.ndim}I", p.data.ndim, *p.shape))
        parts.append(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def load_checkpoint(path, expected: SRNetConfig | None = None) -> tuple[dict[str, Tensor], dict]:
    """Return (params, meta); meta holds ``config`` and ``stage``."""
    buf = Path(path).read_bytes()
    if buf[:6] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {buf[:6]!r}")
    pos = 6

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointError(f"{path}: truncated checkpoint (need {n} bytes at offset {pos})")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    n_layers, channels, kernel, scale, stage, count = _HEAD.unpack(take(_HEAD.size))
    try:
        cfg = SRNetConfig(n_layers, channels, kernel, scale)
    except ValueError as exc:
        raise CheckpointError(f"{path}: invalid config in header: {exc}") from None
    if expected is not None and expected != cfg:
        raise CheckpointError(f"{path}: config mismatch, file has {cfg}, expected {expected}")
    shapes = param_shapes(cfg)
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        data = np.frombuffer(take(4 * int(np.prod(dims, dtype=np.int64))), dtype="<f4")
        params[name] = Tensor(data.reshape(dims).astype(np.float32), requires_grad=True, name=name)
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    got = {k: p.shape for k, p in params.items()}
    if got != shapes:
        raise CheckpointError(f"{path}: tensor layout does not match header config {cfg}")
    return params, {"config": cfg, "stage": stage}
