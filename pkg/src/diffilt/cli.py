"""Command-line interface: apply filters, fit parameters, run the
mimicry experiment, augment directories, and check gradients.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from .fit import FitConfig, fit_filter
from .grad import FILTER_NAMES, finite_diff_check, make_filter
from .harness import (
    AugmentSpec,
    PRESET_NAMES,
    bpw_augment,
    make_preset,
    mimicry_experiment,
    sample_augment_params,
    write_rows_csv,
    write_summary_json,
)
from .image import load_image, save_image
from .metrics import psnr
from .unified import bpw_filter

HYPER_KEYS = ("tone_segments", "bpw_segments", "kbl_ksize", "defog_window", "defog_floor")


def load_config(path: str | None) -> tuple[FitConfig, dict, dict]:
    """Read the JSON config: FitConfig fields under "fit", filter
    hyperparameters under "hyper", anything else passed through."""
    if path is None:
        return FitConfig(), {}, {}
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    cfg = FitConfig(**raw.get("fit", {}))
    hyper = {k: v for k, v in raw.get("hyper", {}).items() if k in HYPER_KEYS}
    unknown = set(raw.get("hyper", {})) - set(HYPER_KEYS)
    if unknown:
        raise ValueError(f"unknown hyper keys in config: {sorted(unknown)}")
    return cfg, hyper, raw


def _parse_params(args) -> np.ndarray:
    if (args.params is None) == (args.params_file is None):
        raise ValueError("provide exactly one of --params or --params-file")
    if args.params is not None:
        return np.array([float(tok) for tok in args.params.split(",") if tok.strip()])
    with open(args.params_file, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data["params"]
    return np.asarray(data, dtype=np.float64)


def cmd_apply(args) -> int:
    _, hyper, _ = load_config(args.config)
    filt = make_preset(args.filter, **hyper)
    image = load_image(args.input)
    params = _parse_params(args)
    save_image(filt.forward(image, params), args.output)
    return 0


def cmd_fit(args) -> int:
    cfg, hyper, _ = load_config(args.config)
    filt = make_preset(args.filter, **hyper)
    source = load_image(args.source)
    target = load_image(args.target)
    params, trace = fit_filter(filt, source, target, cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace.write_csv(out_dir / "trace.csv")
    with open(out_dir / "params.json", "w", encoding="utf-8") as fh:
        json.dump({"filter": args.filter, "params": params.tolist(),
                   "best_iteration": trace.best_iteration}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    fitted = filt.forward(source, params)
    save_image(fitted, out_dir / "output.png")
    print(f"fit {args.filter}: psnr {psnr(fitted, target):.3f} dB "
          f"(best iteration {trace.best_iteration}, {trace.wall_time:.1f}s)")
    return 0


def cmd_experiment(args) -> int:
    cfg, hyper, _ = load_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(row):
        print(f"{row.image_id}: initial {row.psnr_initial:.2f} dB "
              f"-> final {row.psnr_final:.2f} dB", flush=True)

    rows, summary = mimicry_experiment(
        args.corpus, args.degrade, args.optimize, cfg,
        seed=args.seed, hyper=hyper, progress=progress,
    )
    write_rows_csv(rows, out_dir / "rows.csv")
    write_summary_json(summary, out_dir / "summary.json")
    print(f"{args.degrade} -> {args.optimize}: mean initial {summary['mean_initial']:.2f}, "
          f"mean final {summary['mean_final']:.2f}, mean delta {summary['mean_delta']:.2f} dB "
          f"over {summary['n_images']} images")
    return 0


def cmd_augment(args) -> int:
    _, hyper, _ = load_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(p for p in Path(args.in_dir).iterdir()
                   if p.suffix.lower() in (".png", ".ppm"))
    if not paths:
        print(f"error: no PNG/PPM images in {args.in_dir}", file=sys.stderr)
        return 1
    children = np.random.SeedSequence(args.seed).spawn(len(paths))
    spec = AugmentSpec.for_style(args.style, seed=args.seed)
    if "bpw_segments" in hyper:
        spec.segments = hyper["bpw_segments"]
    for idx, path in enumerate(paths):
        rng = np.random.default_rng(children[idx])
        image = load_image(path)
        save_image(bpw_augment(image, spec, rng), out_dir / f"{path.stem}_aug.png")
    print(f"augmented {len(paths)} images ({args.style}) into {out_dir}")
    return 0


def cmd_gradcheck(args) -> int:
    _, hyper, _ = load_config(args.config)
    rng = np.random.default_rng(args.seed)
    reports = []
    all_passed = True
    for name in FILTER_NAMES:
        filt = make_filter(name, **hyper)
        image = rng.uniform(0.0, 1.0, size=(args.size, args.size, 3))
        params = filt.sample_interior(rng)
        report = finite_diff_check(filt, image, params, eps=args.eps)
        reports.append(report.to_dict())
        all_passed &= report.passed
        print(f"{name}: {'pass' if report.passed else 'FAIL'} "
              f"(max rel err {report.max_rel_error:.2e})")
    payload = {"seed": args.seed, "size": args.size, "eps": args.eps,
               "passed": all_passed, "reports": reports}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if all_passed else 1


def cmd_corpus(args) -> int:
    paths = corpus_mod.build_corpus(args.out_dir, count=args.count,
                                    size=args.size, seed=args.seed)
    print(f"wrote {len(paths)} corpus images to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffilt",
        description="Differentiable image filters: apply, fit, and evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="RNG seed")
        p.add_argument("--config", help="JSON config (fit settings and filter hyperparameters)")

    p = sub.add_parser("apply", help="filter one image with explicit parameters")
    common(p)
    p.add_argument("--filter", required=True, choices=PRESET_NAMES)
    p.add_argument("--params", help="comma-separated parameter values")
    p.add_argument("--params-file", help="JSON file with a parameter array")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("fit", help="fit filter parameters for one source/target pair")
    common(p)
    p.add_argument("--filter", required=True, choices=PRESET_NAMES)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("experiment", help="mimicry experiment over a corpus directory")
    common(p)
    p.add_argument("--degrade", required=True, choices=PRESET_NAMES)
    p.add_argument("--optimize", required=True, choices=PRESET_NAMES)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("augment", help="batch Bezier-curve augmentation of a directory")
    common(p)
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--style", default="full", choices=("full", "low_light", "fog"))
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("gradcheck", help="finite-difference check of every filter")
    common(p)
    p.add_argument("--size", type=int, default=16, help="test image side length")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("corpus", help="write the deterministic evaluation corpus")
    common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=corpus_mod.DEFAULT_COUNT)
    p.add_argument("--size", type=int, default=corpus_mod.DEFAULT_SIZE)
    p.set_defaults(func=cmd_corpus, seed=corpus_mod.DEFAULT_SEED)

    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    entry()
