"""Deterministic evaluation corpus built from scikit-image's bundled,
freely redistributable sample photographs.

Twenty 256x256 crops with seeded offsets and flips; the same seed always
reproduces the same PNG bytes, so experiment results are stable.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from skimage import data as skdata

from .image import save_image

SOURCE_NAMES = ("astronaut", "chelsea", "coffee", "rocket",
                "cat", "immunohistochemistry")

DEFAULT_COUNT = 20
DEFAULT_SIZE = 256
DEFAULT_SEED = 2024


def _sources() -> list[np.ndarray]:
    return [np.asarray(getattr(skdata, name)(), dtype=np.float64) / 255.0
            for name in SOURCE_NAMES]


def corpus_image(index: int, size: int = DEFAULT_SIZE, seed: int = DEFAULT_SEED,
                 sources: list[np.ndarray] | None = None) -> np.ndarray:
    """The index-th corpus crop; deterministic in (index, size, seed)."""
    sources = sources if sources is not None else _sources()
    src = sources[index % len(sources)]
    if src.shape[0] < size or src.shape[1] < size:
        raise ValueError(f"source {index % len(sources)} smaller than crop size {size}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, index)))
    y = int(rng.integers(0, src.shape[0] - size + 1))
    x = int(rng.integers(0, src.shape[1] - size + 1))
    crop = src[y:y + size, x:x + size].copy()
    if rng.random() < 0.5:
        crop = crop[:, ::-1]
    if rng.random() < 0.25:
        crop = np.rot90(crop, 2)
    return np.ascontiguousarray(crop)


def build_corpus(out_dir: str | Path, count: int = DEFAULT_COUNT,
                 size: int = DEFAULT_SIZE, seed: int = DEFAULT_SEED) -> list[Path]:
    """Write the corpus PNGs into ``out_dir`` and return their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = _sources()
    paths = []
    for i in range(count):
        path = out_dir / f"corpus_{i:02d}.png"
        save_image(corpus_image(i, size, seed, sources), path)
        paths.append(path)
    return paths
