"""Pipeline stages over persisted artifacts.

Every stage writes its outputs plus a MANIFEST.json embedding the config
hash; downstream stages refuse inputs whose hash conflicts with the current
run, and rerunning a stage with an unchanged config is byte-identical.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import raster as rst
from . import segset, slic, texture, umda
from .config import BASELINE_COMPOSITIONS, RunConfig
from .errors import ConfigError, ConfigHashMismatchError
from .svm import (
    FitnessOracle,
    FitnessValue,
    Standardizer,
    SvmConfig,
    balanced_accuracy,
    predict,
    train,
)
from .synth import load_corpus_manifest

STAGE_COMPOSITE = "composite"
STAGE_SUPERPIXELS = "superpixels"
STAGE_SEGMENTS = "segments"
STAGE_FEATURES = "features"
STAGE_SELECT = "select"
STAGE_RANK = "rank"
STAGE_REPORT = "report"


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _stage_dir(cfg: RunConfig, stage: str) -> Path:
    return Path(cfg.output_root) / stage


def _write_manifest(cfg: RunConfig, stage: str, extra: dict | None = None) -> None:
    obj = {"stage": stage, "config_hash": cfg.config_hash()}
    if extra:
        obj.update(extra)
    _write_json(_stage_dir(cfg, stage) / "MANIFEST.json", obj)


def _check_manifest(cfg: RunConfig, stage: str) -> dict:
    path = _stage_dir(cfg, stage) / "MANIFEST.json"
    if not path.is_file():
        raise ConfigError(f"stage '{stage}' has not run (no {path})")
    obj = json.loads(path.read_text())
    if obj.get("config_hash") != cfg.config_hash():
        raise ConfigHashMismatchError(
            f"stage '{stage}' artifacts were built under config {obj.get('config_hash')}, "
            f"current config is {cfg.config_hash()}"
        )
    return obj


def _corpus_regions(cfg: RunConfig) -> list[dict]:
    manifest = load_corpus_manifest(cfg.corpus_root)
    if cfg.synth is not None and manifest.get("spec") != cfg.synth.to_json():
        raise ConfigHashMismatchError(
            "corpus.json was generated from a different synthetic spec than the config"
        )
    return manifest["regions"]


def _region_raster(cfg: RunConfig, region: dict) -> rst.MultibandRaster:
    return rst.load_raster(Path(cfg.corpus_root) / region["raster"])


def _region_mask(cfg: RunConfig, region: dict) -> rst.LabelMask:
    return rst.load_mask(Path(cfg.corpus_root) / region["mask"])


def stage_composite(cfg: RunConfig) -> list[dict]:
    """PCA false-color composite (3 components) per region."""
    regions = _corpus_regions(cfg)
    out = _stage_dir(cfg, STAGE_COMPOSITE)
    for region in regions:
        raster = _region_raster(cfg, region)
        composite = rst.pca_composite(raster, 3)
        rst.save_raster(composite, out / f"region_{region['id']}")
    _write_manifest(cfg, STAGE_COMPOSITE, {"regions": [r["id"] for r in regions]})
    return regions


def stage_superpixels(cfg: RunConfig) -> None:
    regions = _corpus_regions(cfg)
    _check_manifest(cfg, STAGE_COMPOSITE)
    out = _stage_dir(cfg, STAGE_SUPERPIXELS)
    for region in regions:
        composite = rst.load_raster(_stage_dir(cfg, STAGE_COMPOSITE) / f"region_{region['id']}")
        lab = slic.to_lab(composite)
        k = cfg.slic.k or slic.default_k(
            composite.width, composite.height, cfg.slic.px_per_segment
        )
        slic_cfg = slic.SlicConfig(
            k=k, m=cfg.slic.m, max_iter=cfg.slic.max_iter, min_region_frac=cfg.slic.min_region_frac
        )
        spmap = slic.slic_segment(lab, slic_cfg)
        slic.save_superpixels(spmap, out / f"region_{region['id']}")
    _write_manifest(cfg, STAGE_SUPERPIXELS, {"regions": [r["id"] for r in regions]})


def stage_segments(cfg: RunConfig) -> list[segset.SegmentRecord]:
    regions = _corpus_regions(cfg)
    _check_manifest(cfg, STAGE_SUPERPIXELS)
    records: list[segset.SegmentRecord] = []
    for region in regions:
        spmap = slic.load_superpixels(
            _stage_dir(cfg, STAGE_SUPERPIXELS) / f"region_{region['id']}"
        )
        mask = _region_mask(cfg, region)
        records.extend(
            segset.build_segments(
                spmap,
                mask,
                min_hor=cfg.segments.min_hor,
                min_area=cfg.segments.min_area,
                region_id=region["id"],
            )
        )
    out = _stage_dir(cfg, STAGE_SEGMENTS)
    segset.save_segments_jsonl(records, out / "segments.jsonl")
    train, val, test = segset.split_records(records, cfg.split())
    counts = {
        "train": segset.class_counts(train),
        "validation": segset.class_counts(val),
        "test": segset.class_counts(test),
    }
    _write_manifest(cfg, STAGE_SEGMENTS, {"counts": counts})
    return records


def _channel_stack(raster: rst.MultibandRaster) -> rst.MultibandRaster:
    """Band channels plus derived PC1-PC3 and NDVI (B5 vs B4)."""
    pcs = rst.pca_composite(raster, 3)
    nd = rst.ndvi(raster, nir=4, red=3)
    data = np.concatenate([raster.data, pcs.data, nd.data], axis=0)
    names = raster.band_names + pcs.band_names + nd.band_names
    return rst.MultibandRaster(data=data, band_names=names)


def stage_features(cfg: RunConfig) -> texture.FeatureTable:
    regions = _corpus_regions(cfg)
    _check_manifest(cfg, STAGE_SEGMENTS)
    records = segset.load_segments_jsonl(_stage_dir(cfg, STAGE_SEGMENTS) / "segments.jsonl")
    by_region: dict[int, list[segset.SegmentRecord]] = {}
    for rec in records:
        by_region.setdefault(rec.region_id, []).append(rec)

    channels: tuple[str, ...] | None = None
    seg_ids, reg_ids, labels, rows = [], [], [], []
    for region in regions:
        recs = by_region.get(region["id"], [])
        if not recs:
            continue
        stack = _channel_stack(_region_raster(cfg, region))
        if channels is None:
            channels = stack.band_names
        for rec in recs:
            blocks = texture.segment_features(
                stack, rec.pixels, levels=cfg.texture.levels,
                direction_mean=cfg.texture.direction_mean,
            )
            seg_ids.append(rec.segment_id)
            reg_ids.append(rec.region_id)
            labels.append(rec.majority_label)
            rows.append(blocks)
    if channels is None:
        raise ConfigError("no segments survived filtering; cannot extract features")
    table = texture.FeatureTable(
        channels=channels,
        segment_ids=np.array(seg_ids, dtype=np.int64),
        region_ids=np.array(reg_ids, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        blocks=np.stack(rows),
    )
    out = _stage_dir(cfg, STAGE_FEATURES)
    texture.save_feature_table_jsonl(table, out / "features.jsonl")
    texture.save_feature_table_binary(table, out / "features.bin")
    _write_manifest(cfg, STAGE_FEATURES, {"rows": len(seg_ids), "channels": list(channels)})
    return table


def _load_features(cfg: RunConfig) -> texture.FeatureTable:
    _check_manifest(cfg, STAGE_FEATURES)
    return texture.load_feature_table_jsonl(_stage_dir(cfg, STAGE_FEATURES) / "features.jsonl")


def make_oracle(cfg: RunConfig, table: texture.FeatureTable, split: str = "validation") -> FitnessOracle:
    eval_regions = cfg.split_validation if split == "validation" else cfg.split_test
    return FitnessOracle(
        train_table=table.rows_for_regions(cfg.split_train),
        eval_table=table.rows_for_regions(eval_regions),
        cfg=SvmConfig(lam=cfg.svm.lam, epochs=cfg.svm.epochs, seed=cfg.svm.seed),
        split=split,
    )


def exhaustive_evaluation(oracle: FitnessOracle, genome_length: int = 7) -> list[umda.Individual]:
    """Every nonempty genome, fittest first (the brute-force reference)."""
    pool = []
    for bits in range(1, 2**genome_length):
        genome = tuple((bits >> i) & 1 for i in range(genome_length))
        pool.append(umda.Individual(genome=genome, fitness=oracle(genome)))
    return sorted(
        pool,
        key=lambda ind: (-ind.fitness.balanced_accuracy, ind.n_bands, ind.genome),
    )


def stage_select(cfg: RunConfig, threads: int = 1, exhaustive: bool = False) -> list[umda.RunResult]:
    table = _load_features(cfg)
    oracle = make_oracle(cfg, table)
    out = _stage_dir(cfg, STAGE_SELECT)

    def _one(seed: int) -> umda.RunResult:
        ucfg = umda.UmdaConfig(
            population=cfg.umda.population,
            parents=cfg.umda.parents,
            generations=cfg.umda.generations,
            margins=cfg.umda.margins,
            seed=seed,
            genome_length=7,
        )
        return umda.run(ucfg, oracle)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_one, cfg.umda.seeds))
    else:
        results = [_one(seed) for seed in cfg.umda.seeds]
    for seed, result in zip(cfg.umda.seeds, results):
        umda.save_run_result(result, out / f"run_seed{seed}.json")
    oracle.save_cache(out / "fitness_cache.json")
    extra: dict = {"seeds": list(cfg.umda.seeds)}
    if exhaustive:
        ranked = exhaustive_evaluation(oracle)
        _write_json(
            out / "exhaustive.json",
            [umda.individual_to_json(ind) for ind in ranked],
        )
        extra["exhaustive"] = True
    _write_manifest(cfg, STAGE_SELECT, extra)
    return results


def _load_run_results(cfg: RunConfig) -> list[dict]:
    _check_manifest(cfg, STAGE_SELECT)
    out = _stage_dir(cfg, STAGE_SELECT)
    results = []
    for seed in cfg.umda.seeds:
        results.append(json.loads((out / f"run_seed{seed}.json").read_text()))
    return results


def _pool_from_json(results: list[dict]) -> list[umda.Individual]:
    pool = []
    for result in results:
        seen = set()
        for entry in result["generations"][-1]["population"]:
            genome = tuple(int(c) for c in entry["genome"])
            if genome in seen:
                continue
            seen.add(genome)
            fv = entry["fitness"]
            pool.append(
                umda.Individual(
                    genome=genome,
                    fitness=FitnessValue(
                        balanced_accuracy=fv["balanced_accuracy"],
                        recall_forest=fv["recall_forest"],
                        recall_nonforest=fv["recall_nonforest"],
                        split=fv["split"],
                    ),
                )
            )
    return pool


def stage_rank(cfg: RunConfig) -> umda.BandRanking:
    results = _load_run_results(cfg)
    pool = _pool_from_json(results)
    ranking = umda.rank_bands(pool, top_k=cfg.umda.top_k)
    out = _stage_dir(cfg, STAGE_RANK)
    _write_json(out / "ranking.json", umda.ranking_to_json(ranking))
    (out / "ranking.txt").write_text(umda.ranking_table(ranking))
    _write_manifest(cfg, STAGE_RANK)
    return ranking


def evaluate_channels(
    cfg: RunConfig, table: texture.FeatureTable, channels: list[str], split: str
) -> dict:
    """Train on the train regions, score balanced accuracy on the named split."""
    oracle = make_oracle(cfg, table, split=split)
    x_train = oracle.train_table.matrix(channels)
    x_eval = oracle.eval_table.matrix(channels)
    scaler = Standardizer.fit(x_train)
    model = train(scaler.apply(x_train), oracle.train_table.labels, oracle.cfg)
    preds = predict(model, scaler.apply(x_eval))
    ba, rf, rnf = balanced_accuracy(oracle.eval_table.labels, preds)
    return {
        "channels": list(channels),
        "split": split,
        "balanced_accuracy": ba,
        "recall_forest": rf,
        "recall_nonforest": rnf,
    }


def _best_individual(results: list[dict]) -> dict:
    entries = [r["best"] for r in results]
    entries.sort(
        key=lambda e: (
            -e["fitness"]["balanced_accuracy"],
            sum(int(c) for c in e["genome"]),
            e["genome"],
        )
    )
    return entries[0]


def stage_report(cfg: RunConfig) -> dict:
    table = _load_features(cfg)
    results = _load_run_results(cfg)
    _check_manifest(cfg, STAGE_RANK)
    ranking_obj = json.loads((_stage_dir(cfg, STAGE_RANK) / "ranking.json").read_text())
    seg_manifest = _check_manifest(cfg, STAGE_SEGMENTS)

    best = _best_individual(results)
    best_channels = best["bands"]
    comparison = []
    best_test = evaluate_channels(cfg, table, best_channels, "test")
    comparison.append({"composition": "best-individual", **best_test, "relative_gain_pct": None})
    for name in cfg.baselines:
        entry = evaluate_channels(cfg, table, BASELINE_COMPOSITIONS[name], "test")
        gain = None
        if entry["balanced_accuracy"] > 0:
            gain = (
                (best_test["balanced_accuracy"] - entry["balanced_accuracy"])
                / entry["balanced_accuracy"]
                * 100.0
            )
        comparison.append({"composition": name, **entry, "relative_gain_pct": gain})

    report = {
        "config_hash": cfg.config_hash(),
        "config": cfg.to_json(),
        "split_counts": seg_manifest["counts"],
        "ranking": ranking_obj,
        "best_individual": {
            "genome": best["genome"],
            "bands": best["bands"],
            "validation_balanced_accuracy": best["fitness"]["balanced_accuracy"],
            "test": {k: best_test[k] for k in ("balanced_accuracy", "recall_forest", "recall_nonforest")},
        },
        "per_seed": [
            {
                "seed": r["config"]["seed"],
                "best_genome": r["best"]["genome"],
                "best_bands": r["best"]["bands"],
                "best_fitness": r["best"]["fitness"]["balanced_accuracy"],
                "evaluations": r["evaluations"],
            }
            for r in results
        ],
        "comparison": comparison,
    }
    out = _stage_dir(cfg, STAGE_REPORT)
    _write_json(out / "report.json", report)
    (out / "report.txt").write_text(_report_text(report))
    _write_manifest(cfg, STAGE_REPORT)
    return report


def _report_text(report: dict) -> str:
    lines = []
    lines.append(f"config hash: {report['config_hash']}")
    lines.append("")
    lines.append("split counts (segments):")
    for split_name in ("train", "validation", "test"):
        counts = report["split_counts"][split_name]
        lines.append(
            f"  {split_name:<10} forest {counts['forest']:>6}  non-forest {counts['non-forest']:>6}"
        )
    lines.append("")
    lines.append("band ranking:")
    ranking = report["ranking"]
    for band, freq, rank in zip(ranking["bands"], ranking["frequencies"], ranking["ranks"]):
        rank_s = "-" if rank is None else str(rank)
        lines.append(f"  {band}  {freq * 100:5.1f}%  rank {rank_s}")
    lines.append("")
    lines.append("composition comparison (test balanced accuracy):")
    header = f"  {'composition':<16} {'bands':<36} {'bal.acc':>8} {'gain%':>8}"
    lines.append(header)
    for entry in report["comparison"]:
        gain = entry["relative_gain_pct"]
        gain_s = "-" if gain is None else f"{gain:+.2f}"
        bands = ",".join(entry["channels"])
        lines.append(
            f"  {entry['composition']:<16} {bands:<36} {entry['balanced_accuracy'] * 100:7.2f}% {gain_s:>8}"
        )
    lines.append("")
    best = report["best_individual"]
    lines.append(
        f"best individual: {best['genome']} ({','.join(best['bands'])}) "
        f"validation {best['validation_balanced_accuracy'] * 100:.2f}% "
        f"test {best['test']['balanced_accuracy'] * 100:.2f}%"
    )
    return "\n".join(lines) + "\n"


def run_pipeline(cfg: RunConfig, threads: int = 1, exhaustive: bool = False) -> dict:
    """Stages in order: composite, superpixels, segments, features, select, rank, report."""
    stage_composite(cfg)
    stage_superpixels(cfg)
    stage_segments(cfg)
    stage_features(cfg)
    stage_select(cfg, threads=threads, exhaustive=exhaustive)
    stage_rank(cfg)
    return stage_report(cfg)
