"""Command-line entry point.

Subcommands: synthesize, composite, superpixels, build-segments,
extract-features, select-bands, rank-bands, evaluate-composition,
score-masks, report, pipeline. Flags override config file keys, which
override defaults. Exit code 0 only when the requested artifacts were
fully written.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline, raster as rst
from .config import BASELINE_COMPOSITIONS, RunConfig, SyntheticSpec, load_config
from .errors import BandSelectError
from .metrics import aggregate_reports, confusion
from .raster import IGNORE, LabelMask, load_mask

log = logging.getLogger("bandselect")


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    from dataclasses import replace

    if getattr(args, "out", None):
        cfg = replace(cfg, output_root=str(args.out))
    if getattr(args, "corpus", None):
        cfg = replace(cfg, corpus_root=str(args.corpus))
    if getattr(args, "seed", None) is not None:
        synth = cfg.synth
        if synth is not None:
            synth = SyntheticSpec.from_json({**synth.to_json(), "seed": args.seed})
        from dataclasses import replace as _replace

        cfg = replace(
            cfg,
            synth=synth,
            umda=_replace(cfg.umda, seeds=(args.seed,)),
        )
    return cfg


def _load_cfg(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return _apply_overrides(cfg, args)


def cmd_synthesize(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    spec = cfg.synth or SyntheticSpec()
    if args.seed is not None:
        spec = SyntheticSpec.from_json({**spec.to_json(), "seed": args.seed})
    from .synth import generate_corpus

    manifest = generate_corpus(spec, cfg.corpus_root)
    log.info("wrote %d regions under %s", len(manifest["regions"]), cfg.corpus_root)
    return 0


def cmd_composite(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    pipeline.stage_composite(cfg)
    return 0


def cmd_superpixels(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    pipeline.stage_superpixels(cfg)
    return 0


def cmd_build_segments(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    pipeline.stage_segments(cfg)
    return 0


def cmd_extract_features(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    pipeline.stage_features(cfg)
    return 0


def cmd_select_bands(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    pipeline.stage_select(cfg, threads=args.threads, exhaustive=args.exhaustive)
    return 0


def cmd_rank_bands(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    ranking = pipeline.stage_rank(cfg)
    sys.stdout.write(pipeline.umda.ranking_table(ranking))
    return 0


def cmd_evaluate_composition(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    if args.bands:
        channels = [b.strip() for b in args.bands.split(",") if b.strip()]
    elif args.composition:
        channels = BASELINE_COMPOSITIONS[args.composition]
    else:
        raise BandSelectError("pass either --bands or --composition")
    table = pipeline._load_features(cfg)
    result = {
        split: pipeline.evaluate_channels(cfg, table, channels, split)
        for split in ("validation", "test")
    }
    text = json.dumps(result, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if args.out_file:
        Path(args.out_file).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out_file).write_text(text)
    return 0


ERR_COLORS = {
    "tn": (0, 0, 0),
    "tp": (255, 255, 255),
    "fn": (255, 0, 0),
    "fp": (0, 0, 255),
    "ignore": (128, 128, 128),
}


def error_visualization(pred: LabelMask, truth: LabelMask) -> np.ndarray:
    """RGB error map: black TN, white TP, red FN, blue FP, gray ignore."""
    h, w = truth.labels.shape
    img = np.zeros((h, w, 3), dtype=np.uint8)
    p = pred.labels == 1
    t = truth.labels == 1
    ign = truth.labels == IGNORE
    img[(~p & ~t) & ~ign] = ERR_COLORS["tn"]
    img[(p & t) & ~ign] = ERR_COLORS["tp"]
    img[(~p & t) & ~ign] = ERR_COLORS["fn"]
    img[(p & ~t) & ~ign] = ERR_COLORS["fp"]
    img[ign] = ERR_COLORS["ignore"]
    return img


def _save_ppm(img: np.ndarray, path: Path) -> None:
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + img.tobytes())


def cmd_score_masks(args: argparse.Namespace) -> int:
    pred_dir = Path(args.pred)
    truth_dir = Path(args.truth)
    preds = sorted(p.name for p in pred_dir.glob("*.pgm"))
    truths = sorted(p.name for p in truth_dir.glob("*.pgm"))
    if preds != truths:
        missing = sorted(set(preds) ^ set(truths))
        raise BandSelectError(f"unpaired mask files: {missing}")
    if not preds:
        raise BandSelectError(f"no .pgm masks under {pred_dir}")
    out = Path(args.out) if args.out else Path("score-masks")
    per_image = {}
    for name in preds:
        pred = load_mask(pred_dir / name)
        truth = load_mask(truth_dir / name)
        per_image[name] = confusion(pred, truth)
        _save_ppm(error_visualization(pred, truth), out / "errors" / f"{Path(name).stem}.ppm")
    report = aggregate_reports(per_image)
    (out / "report.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    micro = report["micro"]
    iou_s = "undefined" if micro["iou"] is None else f"{micro['iou']:.4f}"
    log.info("scored %d masks, micro IoU %s", len(preds), iou_s)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    report = pipeline.stage_report(cfg)
    sys.stdout.write(pipeline._report_text(report))
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    pipeline.run_pipeline(cfg, threads=args.threads, exhaustive=args.exhaustive)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandselect",
        description="Spectral band selection pipeline: superpixel datasets, texture "
        "features, SVM-scored evolutionary band search, and mask scoring.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, threads: bool = False) -> None:
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--out", type=Path, help="output root directory")
        p.add_argument("--corpus", type=Path, help="corpus root directory")
        if threads:
            p.add_argument("--threads", type=int, default=1, help="parallel workers")

    p = sub.add_parser("synthesize", help="generate a synthetic labelled corpus")
    common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("composite", help="PCA false-color composite per region")
    common(p)
    p.set_defaults(func=cmd_composite)

    p = sub.add_parser("superpixels", help="SLIC superpixels on the composites")
    common(p)
    p.set_defaults(func=cmd_superpixels)

    p = sub.add_parser("build-segments", help="filter superpixels into labelled records")
    common(p)
    p.set_defaults(func=cmd_build_segments)

    p = sub.add_parser("extract-features", help="texture descriptors per segment")
    common(p)
    p.set_defaults(func=cmd_extract_features)

    p = sub.add_parser("select-bands", help="evolutionary band search over all seeds")
    common(p, threads=True)
    p.add_argument("--exhaustive", action="store_true", help="also score all 127 genomes")
    p.set_defaults(func=cmd_select_bands)

    p = sub.add_parser("rank-bands", help="frequency ranking over the run results")
    common(p)
    p.set_defaults(func=cmd_rank_bands)

    p = sub.add_parser("evaluate-composition", help="score one band composition")
    common(p)
    p.add_argument("--bands", help="comma-separated channels, e.g. B4,B3,B2")
    p.add_argument(
        "--composition", choices=sorted(BASELINE_COMPOSITIONS), help="named baseline"
    )
    p.add_argument("--out-file", type=Path, help="also write the JSON result here")
    p.set_defaults(func=cmd_evaluate_composition)

    p = sub.add_parser("score-masks", help="confusion metrics for mask directories")
    p.add_argument("--pred", required=True, type=Path, help="predicted masks (*.pgm)")
    p.add_argument("--truth", required=True, type=Path, help="ground-truth masks (*.pgm)")
    p.add_argument("--out", type=Path, help="report directory")
    p.set_defaults(func=cmd_score_masks)

    p = sub.add_parser("report", help="final comparison report")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="run every stage in order")
    common(p, threads=True)
    p.add_argument("--exhaustive", action="store_true", help="also score all 127 genomes")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except BandSelectError as e:
        log.error("%s", e)
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
