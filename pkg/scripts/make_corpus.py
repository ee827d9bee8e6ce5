"""Build a small natural-image corpus of PPM tiles from scikit-image's bundled photos.

    python scripts/make_corpus.py data/ --tile 160

Writes ``<out>/train/*.ppm`` and ``<out>/valid/*.ppm``.  Tiles never overlap
and every source photo contributes its last kept tile to the validation split,
so the two splits are pixel-disjoint.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from recurrent_sr.data import write_ppm

SOURCES = [
    "astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry", "retina",
    "hubble_deep_field", "stereo_motorcycle", "camera", "brick", "grass", "gravel",
    "moon", "coins", "cell", "clock",
]


def load_source(name: str) -> np.ndarray:
    import skimage.data

    img = getattr(skimage.data, name)()
    if name == "stereo_motorcycle":
        img = img[0]
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    return np.ascontiguousarray(img[..., :3].astype(np.uint8))


def tiles_of(img: np.ndarray, tile: int, per_image: int, min_std: float = 8.0) -> list[np.ndarray]:
    h, w = img.shape[:2]
    cands = [img[t:t + tile, l:l + tile]
             for t in range(0, h - tile + 1, tile)
             for l in range(0, w - tile + 1, tile)]
    # flat tiles (black borders, sky) carry no detail to enhance
    cands = [c for c in cands if c.astype(np.float64).std() >= min_std]
    if len(cands) <= per_image:
        return cands
    pick = np.linspace(0, len(cands) - 1, per_image).round().astype(int)
    return [cands[i] for i in pick]


def build_corpus(out: Path, tile: int = 160, per_image: int = 4) -> tuple[Path, Path]:
    train, valid = Path(out) / "train", Path(out) / "valid"
    train.mkdir(parents=True, exist_ok=True)
    valid.mkdir(parents=True, exist_ok=True)
    for name in SOURCES:
        tiles = tiles_of(load_source(name), tile, per_image)
        if len(tiles) < 2:
            continue
        for i, t in enumerate(tiles[:-1]):
            write_ppm(t, train / f"{name}_{i}.ppm")
        write_ppm(tiles[-1], valid / f"{name}.ppm")
    return train, valid


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--tile", type=int, default=160)
    ap.add_argument("--per-image", type=int, default=4)
    args = ap.parse_args()
    train, valid = build_corpus(args.out, args.tile, args.per_image)
    print(f"{len(list(train.glob('*.ppm')))} train tiles, {len(list(valid.glob('*.ppm')))} valid tiles")


if __name__ == "__main__":
    main()
