"""Recurrent training: train on current targets, regenerate targets, repeat.

Stage n:
    Phase A  SR_n = argmin ||HR_(n-1) - SR(LR)||^2   (minibatch Adam)
    Phase B  HR_n = d(SR_n(HR_0))                     (always from the originals)
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RTSConfig
from .data import atomic_write_bytes, crop_even, encode_ppm, extract_patches, list_images, read_image, to_u8
from .degrade import DegradeConfig, make_lr
from .metrics import estimate_alpha, image_difference_ratio
from .net import clone_params, forward, init_params, save_checkpoint
from .resample import downscale2x, unsharp_mask, upscale2x
from .tensor import AdamState, NonFiniteError, Tape, adam_step, mse_loss

log = logging.getLogger(__name__)

CSV_HEADER = ["stage", "loss", "diff_ratio_pct", "delta_pct", "alpha_hat", "seconds"]


class RTSAbort(RuntimeError):
    """A stage produced a non-finite loss; the partial records are attached."""

    def __init__(self, msg: str, records: list):
        super().__init__(msg)
        self.records = records


@dataclass
class StageRecord:
    stage: int
    loss: float
    diff_ratio_pct: float
    delta_pct: float
    alpha_hat: float
    checkpoint: str = ""
    seconds: float = 0.0


# ---------------------------------------------------------------------------
# Phase A

def _stack(arrs: Sequence[np.ndarray], dtype) -> np.ndarray:
    return np.ascontiguousarray(np.stack(arrs), dtype=dtype)


def stage_lr(lr: float, lr_final: float | None, step: int, total: int) -> float:
    """Cosine schedule from ``lr`` (step 0) to ``lr_final`` (last step); constant if lr_final is None."""
    if lr_final is None or total <= 1:
        return lr
    frac = min(step / (total - 1), 1.0)
    return lr_final + 0.5 * (lr - lr_final) * (1.0 + math.cos(math.pi * frac))


def train_stage(params, pairs, cfg: RTSConfig, seed: int | None = None):
    """Minibatch Adam on mse(sr, target); returns (new params, mean loss of the last epoch).

    The input params are not modified.  With zero epochs the returned loss is
    evaluated without any update.
    """
    if not pairs:
        raise ValueError("train_stage: no training pairs")
    lr0, t0 = pairs[0][0].shape, pairs[0][1].shape
    for x, y in pairs:
        if x.shape != lr0 or y.shape != t0:
            raise ValueError(f"train_stage: inconsistent pair shapes {x.shape}/{y.shape} vs {lr0}/{t0}")
    if t0[-2:] != (2 * lr0[-2], 2 * lr0[-1]):
        raise ValueError(f"train_stage: target {t0} is not twice the LR size {lr0}")

    params = clone_params(params)
    dtype = params["input.weight"].dtype
    xs = _stack([p[0] for p in pairs], dtype)
    ys = _stack([p[1] for p in pairs], dtype)
    n = len(pairs)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    state = AdamState(lr=cfg.lr)

    if cfg.epochs == 0:
        total = 0.0
        for i in range(0, n, cfg.batch):
            out = forward(params, xs[i:i + cfg.batch])
            total += mse_loss(out.sr, ys[i:i + cfg.batch]).item() * len(xs[i:i + cfg.batch])
        return params, total / n

    steps_per_epoch = -(-n // cfg.batch)
    total_steps = cfg.epochs * steps_per_epoch
    epoch_loss = math.nan
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, cfg.batch):
            idx = np.sort(order[i:i + cfg.batch])
            tape = Tape()
            out = forward(params, xs[idx], tape=tape)
            loss = mse_loss(out.sr, ys[idx], tape=tape)
            tape.backward(loss)
            state.lr = stage_lr(cfg.lr, cfg.lr_final, state.t, total_steps)
            adam_step(params, state)
            total += loss.item() * len(idx)
        epoch_loss = total / n
        log.debug("epoch %d loss %.6g", epoch + 1, epoch_loss)
    return params, epoch_loss


# ---------------------------------------------------------------------------
# Phase B

def enhance(params, img: np.ndarray, tap: str = "sr") -> np.ndarray:
    """One-shot d(SR(img)) (or the blue layer directly), clamped to [0, 1]."""
    out = forward(params, img[None] if img.ndim == 3 else img)
    if tap == "blue":
        res = np.clip(out.blue.data, 0.0, 1.0)
    elif tap == "sr":
        res = downscale2x(out.sr.data)
    else:
        raise ValueError(f"unknown tap {tap!r}")
    return res[0] if img.ndim == 3 else res


def regenerate_targets(params, originals: Sequence[np.ndarray], tap: str = "sr", chunk: int = 8) -> list[np.ndarray]:
    """HR_n for every original, in input order."""
    out: list[np.ndarray | None] = [None] * len(originals)
    # batch same-shaped images; results are identical to one-at-a-time
    by_shape: dict[tuple, list[int]] = {}
    for i, img in enumerate(originals):
        if img.ndim != 3 or img.shape[0] != 3:
            raise ValueError(f"original {i} has shape {img.shape}, expected 3 x H x W")
        by_shape.setdefault(img.shape, []).append(i)
    dtype = params["input.weight"].dtype
    for idxs in by_shape.values():
        for s in range(0, len(idxs), chunk):
            part = idxs[s:s + chunk]
            res = enhance(params, _stack([originals[i] for i in part], dtype), tap)
            for i, r in zip(part, res):
                out[i] = r
    return out


# ---------------------------------------------------------------------------
# analysis

def residual_alpha(params, y: np.ndarray, degrade: DegradeConfig | None = None) -> float:
    """alpha_hat for one image: D(SR(y) - U(y)) against SR(x) - U(x), x the LR of y."""
    x = make_lr(y, degrade) if degrade is not None else downscale2x(y)
    dtype = params["input.weight"].dtype
    sr_x = forward(params, x[None].astype(dtype)).sr.data[0].astype(np.float64)
    sr_y = forward(params, y[None].astype(dtype)).sr.data[0].astype(np.float64)
    r_x = sr_x - upscale2x(x.astype(np.float64), clamp=False)
    r_y_down = downscale2x(sr_y - upscale2x(y.astype(np.float64), clamp=False), clamp=False)
    return estimate_alpha(r_y_down, r_x).alpha_hat


def mean_difference_ratio(images: Sequence[np.ndarray], refs: Sequence[np.ndarray]) -> float:
    return float(np.mean([image_difference_ratio(a, b) for a, b in zip(images, refs)]))


def select_stage_count(deltas: Sequence[float], rule: str = "delta_min") -> int:
    """Stage count (1-based) chosen from the per-stage delta sequence.

    ``delta_min``: stage with the smallest delta.  ``delta_rise``: the stage
    just before the first increase; the last stage if the deltas never rise.
    Ties go to the earlier stage.
    """
    d = list(deltas)
    if len(d) < 2:
        raise ValueError("select_stage_count needs at least 2 deltas")
    if rule == "delta_min":
        return int(np.argmin(d)) + 1
    if rule == "delta_rise":
        for k in range(1, len(d)):
            if d[k] > d[k - 1]:
                return k
        return len(d)
    if rule == "fixed_n":
        return len(d)
    raise ValueError(f"unknown stop rule {rule!r}")


def run_usm_baseline(originals: Sequence[np.ndarray], n_applications: int, lam: float = 0.5,
                     sigma: float = 1.0) -> list[float]:
    """Mean DR(USM^k(y), y) after each of k = 1..n repeated applications."""
    if n_applications < 2:
        raise ValueError("run_usm_baseline needs n_applications >= 2")
    current = [np.asarray(y, dtype=np.float64) for y in originals]
    out = []
    for _ in range(n_applications):
        current = [unsharp_mask(c, lam, sigma) for c in current]
        out.append(mean_difference_ratio(current, originals))
    return out


def deltas_of(values: Sequence[float]) -> list[float]:
    """[v1 - 0, v2 - v1, ...]."""
    prev = 0.0
    out = []
    for v in values:
        out.append(v - prev)
        prev = v
    return out


# ---------------------------------------------------------------------------
# data

@dataclass
class Dataset:
    hr0: list[np.ndarray]
    lr: list[np.ndarray]
    valid: list[np.ndarray]


def build_dataset(cfg: RTSConfig) -> Dataset:
    hr0: list[np.ndarray] = []
    for i, path in enumerate(list_images(cfg.train_dir)):
        img = read_image(path)
        hr0.extend(extract_patches(img, cfg.patch_size, cfg.patches_per_image, seed=cfg.seed * 100003 + i))
    lr = [make_lr(p, cfg.degrade) for p in hr0]
    valid = [crop_even(read_image(p)) for p in list_images(cfg.valid_dir)] if cfg.valid_dir else []
    return Dataset(hr0=hr0, lr=lr, valid=valid)


# ---------------------------------------------------------------------------
# driver

def format_csv(records: Sequence[StageRecord], record_time: bool = True) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.stage, f"{r.loss:.8g}", f"{r.diff_ratio_pct:.6f}", f"{r.delta_pct:.6f}",
                    f"{r.alpha_hat:.6f}", f"{r.seconds:.3f}" if record_time else "0"])
    return buf.getvalue().encode("ascii")


def run_rts(cfg: RTSConfig, dataset: Dataset | None = None, record_time: bool = True) -> list[StageRecord]:
    """Run up to ``cfg.max_stages`` stages and write reports under ``cfg.out_dir``.

    Writes ``stage_<n>.ckpt``, ``stage_<n>/valid_<i>.ppm`` dumps, ``stages.csv``
    and ``summary.json``.  With ``record_time=False`` the seconds column is
    written as 0 so reports are byte-reproducible.
    """
    ds = dataset or build_dataset(cfg)
    if not ds.hr0:
        raise ValueError("run_rts: no training patches")
    # validation falls back to the training originals when no split is given
    valid = ds.valid or ds.hr0
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    params = init_params(cfg.net, seed=cfg.seed)
    targets = ds.hr0
    records: list[StageRecord] = []
    prev_dr = 0.0
    for n in range(1, cfg.max_stages + 1):
        t_start = time.perf_counter()
        if n > 1 and not cfg.warm_start:
            params = init_params(cfg.net, seed=cfg.seed)
        try:
            # same minibatch order every stage: stages differ only in their targets
            params, loss = train_stage(params, list(zip(ds.lr, targets)), cfg, seed=cfg.seed)
        except NonFiniteError as exc:
            records.append(StageRecord(n, math.nan, math.nan, math.nan, math.nan))
            atomic_write_bytes(out_dir / "stages.csv", format_csv(records, record_time))
            raise RTSAbort(f"stage {n}: {exc}", records) from exc
        if not math.isfinite(loss):
            records.append(StageRecord(n, loss, math.nan, math.nan, math.nan))
            atomic_write_bytes(out_dir / "stages.csv", format_csv(records, record_time))
            raise RTSAbort(f"stage {n}: non-finite training loss {loss}", records)

        targets = regenerate_targets(params, ds.hr0, cfg.target_tap)
        enhanced = regenerate_targets(params, valid, cfg.target_tap)
        dr = mean_difference_ratio(enhanced, valid)
        alpha = float(np.mean([residual_alpha(params, y, cfg.degrade) for y in valid]))

        ckpt = out_dir / f"stage_{n}.ckpt"
        save_checkpoint(params, ckpt, stage=n)
        if cfg.dump_images:
            dump = out_dir / f"stage_{n}"
            dump.mkdir(exist_ok=True)
            for i, img in enumerate(enhanced[: cfg.dump_images]):
                atomic_write_bytes(dump / f"valid_{i}.ppm", encode_ppm(to_u8(img)))

        rec = StageRecord(n, loss, dr, dr - prev_dr, alpha, str(ckpt), time.perf_counter() - t_start)
        records.append(rec)
        prev_dr = dr
        log.info("stage %d loss %.6g DR %.4f%% delta %.4f alpha %.3f", n, loss, dr, rec.delta_pct, alpha)
        atomic_write_bytes(out_dir / "stages.csv", format_csv(records, record_time))

        if cfg.stop_rule == "delta_rise" and n >= 2 and records[-1].delta_pct > records[-2].delta_pct:
            break

    deltas = [r.delta_pct for r in records]
    selected = select_stage_count(deltas, cfg.stop_rule) if len(deltas) >= 2 else len(deltas)
    summary = {
        "selected_stage": selected,
        "checkpoint": records[selected - 1].checkpoint,
        "stop_rule": cfg.stop_rule,
        "stages": [{k: v for k, v in asdict(r).items() if record_time or k != "seconds"} for r in records],
    }
    atomic_write_bytes(out_dir / "summary.json", (json.dumps(summary, indent=2) + "\n").encode())
    return records
