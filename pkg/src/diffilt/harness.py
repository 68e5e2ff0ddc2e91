"""Degradation sampling, the filter-expressiveness (mimicry) experiment,
and Bezier-curve data augmentation.

The mimicry protocol: degrade each corpus image with one filter family at
random parameters, fit another family's parameters to reproduce the
degraded target, and report the PSNR improvement from the unfiltered
source to the fitted output.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fit import FitConfig, fit_filter
from .grad import FilterChain, ParamFilter, make_filter
from .image import load_image
from .metrics import psnr
from .unified import BPW_SEGMENTS, bpw_filter

# Canonical stage order for the sequential pixel-wise degradation.
PIXEL_WISE_ORDER = ("white_balance", "gamma", "contrast", "tone")

PRESET_NAMES = ("pixel_wise", "sharp_defog", "bpw", "kbl",
                "gamma", "white_balance", "contrast", "tone", "sharpen", "defog")


def make_preset(name: str, *, pixel_wise_order: tuple[str, ...] = PIXEL_WISE_ORDER,
                **hyper) -> ParamFilter:
    """Build a named filter or filter chain with registered ranges."""
    if name == "pixel_wise":
        return FilterChain([make_filter(n, **hyper) for n in pixel_wise_order],
                           name="pixel_wise")
    if name == "sharp_defog":
        return FilterChain([make_filter("sharpen", **hyper), make_filter("defog", **hyper)],
                           name="sharp_defog")
    return make_filter(name, **hyper)


def sample_params(chain: ParamFilter, seed: int | np.random.Generator) -> list[np.ndarray]:
    """Draw one parameter vector per stage, uniform over each declared
    range (gamma log-uniform); deterministic for a given seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return chain.split(chain.sample(rng))


def degrade(image: np.ndarray, chain: ParamFilter, params: list[np.ndarray]) -> np.ndarray:
    """Apply the chain's stages in order, clamping between stages."""
    return chain.forward(image, chain.join(params))


@dataclass
class ExperimentRow:
    image_id: str
    degrade: str
    optimize: str
    psnr_initial: float
    psnr_final: float

    @property
    def psnr_delta(self) -> float:
        return self.psnr_final - self.psnr_initial


def list_corpus(corpus_dir: str | Path) -> list[Path]:
    corpus_dir = Path(corpus_dir)
    paths = sorted(p for p in corpus_dir.iterdir()
                   if p.suffix.lower() in (".png", ".ppm"))
    if not paths:
        raise ValueError(f"no PNG/PPM images found in {corpus_dir}")
    return paths


def mimicry_experiment(corpus_dir: str | Path, degrade_name: str, optimize_name: str,
                       cfg: FitConfig | None = None, seed: int = 0,
                       sampler=None, hyper: dict | None = None,
                       progress=None) -> tuple[list[ExperimentRow], dict]:
    """Run the mimicry protocol over a corpus directory.

    For each image: sample degradation parameters, build the target,
    fit the optimizing filter against it, and record initial
    (source vs target) and final (fitted output vs target) PSNR.
    ``sampler`` can replace the per-image parameter draw (e.g. to force
    neutral parameters in a control run). Unreadable images are skipped
    with a warning and counted in the summary.
    """
    cfg = cfg or FitConfig()
    hyper = hyper or {}
    degrade_filt = make_preset(degrade_name, **hyper)
    optimize_filt = make_preset(optimize_name, **hyper)
    paths = list_corpus(corpus_dir)
    children = np.random.SeedSequence(seed).spawn(len(paths))

    rows: list[ExperimentRow] = []
    skipped = 0
    for idx, path in enumerate(paths):
        try:
            image = load_image(path)
        except (ValueError, OSError) as exc:
            print(f"warning: skipping {path.name}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        rng = np.random.default_rng(children[idx])
        if sampler is None:
            degrade_params = degrade_filt.sample(rng)
        else:
            degrade_params = np.asarray(sampler(degrade_filt, rng), dtype=np.float64)
        target = degrade_filt.forward(image, degrade_params)
        best_params, _ = fit_filter(optimize_filt, image, target, cfg)
        fitted = optimize_filt.forward(image, best_params)
        row = ExperimentRow(
            image_id=path.stem,
            degrade=degrade_name,
            optimize=optimize_name,
            psnr_initial=psnr(image, target),
            psnr_final=psnr(fitted, target),
        )
        rows.append(row)
        if progress is not None:
            progress(row)

    if not rows:
        raise ValueError(f"no readable images in {corpus_dir}")
    summary = {
        "degrade": degrade_name,
        "optimize": optimize_name,
        "n_images": len(rows),
        "n_skipped": skipped,
        "mean_initial": float(np.mean([r.psnr_initial for r in rows])),
        "mean_final": float(np.mean([r.psnr_final for r in rows])),
        "mean_delta": float(np.mean([r.psnr_delta for r in rows])),
        "config_echo": {"seed": seed, "fit": cfg.to_dict(),
                        "stages": getattr(degrade_filt, "stages", None)
                        and [s.name for s in degrade_filt.stages]},
    }
    return rows, summary


def write_rows_csv(rows: list[ExperimentRow], path: str | Path) -> None:
    """Six-column UTF-8 CSV with LF line endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "degrade", "optimize",
                         "psnr_initial", "psnr_final", "psnr_delta"])
        for r in rows:
            writer.writerow([r.image_id, r.degrade, r.optimize,
                             f"{r.psnr_initial:.6f}", f"{r.psnr_final:.6f}",
                             f"{r.psnr_delta:.6f}"])


def write_summary_json(summary: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# BPW data augmentation
# ---------------------------------------------------------------------------

def _tile_box(per_channel: tuple[float, float, float, float, float, float, float, float]
              ) -> tuple[np.ndarray, np.ndarray]:
    lo = np.tile(np.asarray(per_channel[0::2], dtype=np.float64), 3)
    hi = np.tile(np.asarray(per_channel[1::2], dtype=np.float64), 3)
    return lo, hi


# Curves strictly below the diagonal: both control points under it, so
# every non-endpoint intensity drops (low-light style).
LOW_LIGHT_BOX = _tile_box((-1.0, -0.3, -0.4, 0.6, 0.3, 1.0, -0.4, 0.6))

# Curves that shoot up steeply out of black and then run nearly flat:
# intensities lift and bunch toward the top, washing contrast out (fog
# style). The shoulder must be hard for the flattening to win even on
# mid-dark images.
FOG_BOX = _tile_box((0.9, 1.0, 0.6, 1.0, -1.0, -0.9, 0.6, 1.0))

AUGMENT_STYLES = {"full": None, "low_light": LOW_LIGHT_BOX, "fog": FOG_BOX}


@dataclass
class AugmentSpec:
    """Seeded uniform draw over a sub-box of the 12-dim parameter cube."""

    seed: int = 0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    segments: int = BPW_SEGMENTS

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(12, -1.0) if self.lower is None else np.asarray(self.lower, dtype=np.float64)
        hi = np.full(12, 1.0) if self.upper is None else np.asarray(self.upper, dtype=np.float64)
        if lo.shape != (12,) or hi.shape != (12,):
            raise ValueError("augment box must have 12 components per side")
        if (lo < -1).any() or (hi > 1).any() or (lo > hi).any():
            raise ValueError("augment box must be a sub-box of [-1, 1]^12")
        return lo, hi

    @classmethod
    def for_style(cls, style: str, seed: int = 0) -> "AugmentSpec":
        if style not in AUGMENT_STYLES:
            raise ValueError(f"unknown augment style {style!r}; known: {sorted(AUGMENT_STYLES)}")
        box = AUGMENT_STYLES[style]
        if box is None:
            return cls(seed=seed)
        return cls(seed=seed, lower=box[0], upper=box[1])


def sample_augment_params(spec: AugmentSpec,
                          rng: np.random.Generator | None = None) -> np.ndarray:
    lo, hi = spec.box()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    return rng.uniform(lo, hi)


def bpw_augment(image: np.ndarray, spec: AugmentSpec,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply the Bezier pixel-wise filter with parameters drawn from the
    spec's box; deterministic for a given seed."""
    return bpw_filter(image, sample_augment_params(spec, rng), spec.segments)
