"""Deterministic synthetic handwritten-digit-style corpus.

Desk-scale stand-in for environments without the real IDX files: 28x28
grayscale digits rendered from per-class stroke skeletons under seeded
affine warps, stroke jitter, thickness/intensity variation, and background
speckle. Image i of a corpus is a pure function of (seed, i), so corpora are
reproducible and workers can generate slices independently.

Run as a module to write IDX files:

    python -m snnaccel.synthgen --out data/ --train 12000 --test 10000
"""

from __future__ import annotations

import math

import numpy as np

from .harness import Dataset, derive_seed, write_idx_images, write_idx_labels

SIDE = 28


def _arc(cx, cy, rx, ry, a0_deg, a1_deg, n=10):
    ts = np.linspace(math.radians(a0_deg), math.radians(a1_deg), n)
    return np.stack([cx + rx * np.cos(ts), cy + ry * np.sin(ts)], axis=1)


def _line(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y1]], dtype=float)


def _glyph_strokes(digit: int, variant: int) -> list[np.ndarray]:
    """Stroke polylines in a unit box, x right / y down."""
    if digit == 0:
        return [_arc(0.5, 0.5, 0.26, 0.34, 0, 360, 16)]
    if digit == 1:
        if variant == 0:
            return [_line(0.52, 0.14, 0.52, 0.86)]
        return [
            np.array([[0.36, 0.30], [0.52, 0.14], [0.52, 0.86]]),
            _line(0.36, 0.86, 0.68, 0.86),
        ]
    if digit == 2:
        return [
            np.concatenate(
                [
                    _arc(0.5, 0.30, 0.24, 0.17, 160, 350, 8),
                    np.array([[0.70, 0.42], [0.30, 0.80]]),
                ]
            ),
            _line(0.28, 0.84, 0.74, 0.84),
        ]
    if digit == 3:
        return [
            _arc(0.47, 0.30, 0.22, 0.17, 150, 390, 9),
            _arc(0.47, 0.66, 0.24, 0.19, 330, 200 + 360, 10),
        ]
    if digit == 4:
        if variant == 0:
            return [
                np.array([[0.62, 0.14], [0.28, 0.60], [0.76, 0.60]]),
                _line(0.62, 0.14, 0.62, 0.86),
            ]
        return [
            _line(0.34, 0.14, 0.30, 0.58),
            _line(0.30, 0.58, 0.74, 0.58),
            _line(0.64, 0.30, 0.64, 0.86),
        ]
    if digit == 5:
        return [
            _line(0.68, 0.16, 0.34, 0.16),
            _line(0.34, 0.16, 0.32, 0.46),
            _arc(0.48, 0.64, 0.22, 0.20, 250, 250 + 280, 11),
        ]
    if digit == 6:
        return [
            np.concatenate(
                [
                    _arc(0.52, 0.32, 0.22, 0.26, 300, 190, 7)[::-1],
                    _arc(0.5, 0.66, 0.2, 0.19, 90, 450, 12),
                ]
            )
        ]
    if digit == 7:
        if variant == 0:
            return [
                _line(0.28, 0.16, 0.74, 0.16),
                _line(0.74, 0.16, 0.44, 0.86),
            ]
        return [
            _line(0.28, 0.16, 0.74, 0.16),
            _line(0.74, 0.16, 0.44, 0.86),
            _line(0.34, 0.50, 0.64, 0.50),
        ]
    if digit == 8:
        return [
            _arc(0.5, 0.30, 0.19, 0.16, 90, 450, 12),
            _arc(0.5, 0.66, 0.22, 0.20, 90, 450, 12),
        ]
    if digit == 9:
        return [
            _arc(0.48, 0.32, 0.20, 0.18, 90, 450, 12),
            np.array([[0.68, 0.32], [0.66, 0.60], [0.52, 0.86]]),
        ]
    raise ValueError(f"no glyph for digit {digit}")


_GRID = np.stack(
    np.meshgrid(np.arange(SIDE, dtype=float), np.arange(SIDE, dtype=float)),
    axis=-1,
).reshape(-1, 2)  # (784, 2) as (x, y)


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab) or 1e-12
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def render_digit(digit: int, seed: int) -> np.ndarray:
    """One 28x28 uint8 image of `digit`, fully determined by `seed`."""
    rng = np.random.default_rng(seed)
    variant = int(rng.integers(0, 2))
    strokes = _glyph_strokes(digit, variant)

    angle = rng.uniform(-0.10, 0.10)
    sx, sy = rng.uniform(0.90, 1.08, size=2)
    shear = rng.uniform(-0.08, 0.08)
    tx, ty = rng.uniform(-1.4, 1.4, size=2)
    ca, sa = math.cos(angle), math.sin(angle)
    lin = np.array([[ca, -sa], [sa, ca]]) @ np.array([[sx, shear * sx], [0.0, sy]])

    thickness = rng.uniform(2.5, 3.4)
    feather = rng.uniform(0.3, 0.55)
    peak = rng.uniform(205.0, 255.0)

    dist = np.full(SIDE * SIDE, np.inf)
    center = np.array([SIDE / 2 - 0.5, SIDE / 2 - 0.5])
    for stroke in strokes:
        pts = (stroke - 0.5) * (SIDE - 8)  # glyph box -> pixel scale
        pts = pts @ lin.T + center + np.array([tx, ty])
        pts = pts + rng.normal(0.0, 0.35, size=pts.shape)
        for a, b in zip(pts[:-1], pts[1:]):
            dist = np.minimum(dist, _segment_distance(_GRID, a, b))

    img = peak * np.clip((thickness / 2 + feather - dist) / feather, 0.0, 1.0)

    n_speckle = int(rng.integers(0, 5))
    if n_speckle:
        idx = rng.integers(0, SIDE * SIDE, size=n_speckle)
        img[idx] = np.maximum(img[idx], rng.uniform(20.0, 100.0, size=n_speckle))
    return np.clip(img, 0, 255).astype(np.uint8)


def make_dataset(n: int, seed: int = 42) -> Dataset:
    """Corpus of n images with uniformly drawn labels."""
    images = np.empty((n, SIDE * SIDE), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        s = derive_seed(seed, i)
        labels[i] = s % 10
        images[i] = render_digit(int(labels[i]), s)
    return Dataset(images, labels)


def write_corpus(out_dir, train_n: int, test_n: int, seed: int = 42) -> dict:
    """Write train/test IDX files under `out_dir`; returns the path map."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "train_images": os.path.join(out_dir, "train-images-idx3-ubyte"),
        "train_labels": os.path.join(out_dir, "train-labels-idx1-ubyte"),
        "test_images": os.path.join(out_dir, "test-images-idx3-ubyte"),
        "test_labels": os.path.join(out_dir, "test-labels-idx1-ubyte"),
    }
    train = make_dataset(train_n, derive_seed(seed, 0xA11CE))
    test = make_dataset(test_n, derive_seed(seed, 0xB0B))
    write_idx_images(paths["train_images"], train.images)
    write_idx_labels(paths["train_labels"], train.labels)
    write_idx_images(paths["test_images"], test.images)
    write_idx_labels(paths["test_labels"], test.labels)
    return paths


def main(argv=None) -> int:
    import argparse

    ap = argparse.ArgumentParser(description="write a synthetic digit corpus as IDX files")
    ap.add_argument("--out", required=True)
    ap.add_argument("--train", type=int, default=12000)
    ap.add_argument("--test", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)
    paths = write_corpus(args.out, args.train, args.test, args.seed)
    for k, v in paths.items():
        print(f"{k}: {v}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
