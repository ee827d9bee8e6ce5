"""Central finite differences, kept independent of the tape machinery."""

import numpy as np


def numeric_grad(f, arr: np.ndarray, positions, h: float) -> np.ndarray:
    """d f() / d arr[pos] for each pos, by perturbing ``arr`` in place."""
    out = []
    for pos in positions:
        old = arr[pos]
        arr[pos] = old + h
        fp = f()
        arr[pos] = old - h
        fm = f()
        arr[pos] = old
        out.append((fp - fm) / (2 * h))
    return np.array(out)


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def all_positions(shape):
    return list(np.ndindex(*shape))


def sample_positions(shape, count, rng):
    flat = rng.choice(int(np.prod(shape)), size=min(count, int(np.prod(shape))), replace=False)
    return [np.unravel_index(i, shape) for i in np.sort(flat)]
