"""Deterministic MNIST-scale image surrogate for the acceptance experiments.

The sandbox has no network access beyond package mirrors, so the real MNIST
files cannot be fetched; the acceptance runs instead use this generator,
which produces a 10-class, 28x28, u8 IDX image corpus with MNIST-like
statistics (sparse strokes, [0,1] pixel range, similar feature norms) and
genuine intra-class variation (random shifts, intensity jitter, pixel
noise). Everything is a pure function of the seed.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter

from fedmc.data import load_idx, write_idx

SIDE = 28
SEED = 20260809


def _prototype(rng) -> np.ndarray:
    """Sparse multi-stroke pattern, lightly blurred, peak intensity 1."""
    img = np.zeros((SIDE, SIDE))
    for _ in range(3):
        r, c = rng.integers(4, SIDE - 4, size=2)
        for _step in range(12):
            img[r, c] = 1.0
            dr, dc = rng.integers(-1, 2, size=2)
            r = int(np.clip(r + dr, 1, SIDE - 2))
            c = int(np.clip(c + dc, 1, SIDE - 2))
    img = uniform_filter(img, size=3)
    img = uniform_filter(img, size=3)
    peak = img.max()
    return img / peak if peak > 0 else img


def _render_class(proto, count, rng, max_shift=3, noise=0.12):
    """Shifted, intensity-jittered, noisy copies of a prototype (u8)."""
    out = np.empty((count, SIDE, SIDE), dtype=np.uint8)
    shifts = rng.integers(-max_shift, max_shift + 1, size=(count, 2))
    gains = rng.uniform(0.6, 1.0, size=count)
    for s in range(count):
        img = np.roll(proto, tuple(shifts[s]), axis=(0, 1)) * gains[s]
        img = img + noise * rng.standard_normal((SIDE, SIDE))
        np.clip(img, 0.0, 1.0, out=img)
        out[s] = np.rint(img * 255.0).astype(np.uint8)
    return out


def generate(root, train_per_class=6000, test_per_class=1000, seed=SEED,
             num_classes=10):
    """Write train/test IDX pairs under `root`; returns the four paths."""
    root.mkdir(parents=True, exist_ok=True)
    paths = {name: root / f"{name}.idx"
             for name in ("train_images", "train_labels",
                          "test_images", "test_labels")}
    if all(p.exists() for p in paths.values()):
        return paths

    proto_rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    protos = [_prototype(proto_rng) for _ in range(num_classes)]

    def build(per_class, tag):
        images = []
        labels = []
        for c in range(num_classes):
            rng = np.random.default_rng(np.random.SeedSequence((seed, tag, c)))
            images.append(_render_class(protos[c], per_class, rng))
            labels.append(np.full(per_class, c, dtype=np.uint8))
        images = np.concatenate(images)
        labels = np.concatenate(labels)
        order = np.random.default_rng(
            np.random.SeedSequence((seed, tag, 999))).permutation(len(labels))
        return images[order], labels[order]

    train_images, train_labels = build(train_per_class, 1)
    test_images, test_labels = build(test_per_class, 2)
    write_idx(train_images, train_labels,
              paths["train_images"], paths["train_labels"])
    write_idx(test_images, test_labels,
              paths["test_images"], paths["test_labels"])
    return paths


def load(root, **kwargs):
    paths = generate(root, **kwargs)
    train = load_idx(paths["train_images"], paths["train_labels"])
    test = load_idx(paths["test_images"], paths["test_labels"])
    return train, test
