"""Scratch calibration script (not part of the package)."""
import os
import sys
import tempfile
import time

import numpy as np

import bandselect.synth as synth
from bandselect.pipeline import _channel_stack
from bandselect.raster import load_mask, load_raster, pca_composite
from bandselect import segset, slic as sl, texture
from bandselect.svm import FitnessOracle, SvmConfig

delta, glo, ghi = float(sys.argv[1]), float(sys.argv[2]), float(sys.argv[3])
synth.FOREST_ROUGHNESS = delta
synth.SHARED_ROUGHNESS_RANGE = (glo, ghi)

spec = synth.SyntheticSpec()
root = tempfile.mkdtemp()
synth.generate_corpus(spec, root)

seg_ids, reg_ids, labels, rows = [], [], [], []
channels = None
t0 = time.time()
for rid in (1, 2, 3, 4):
    r = load_raster(os.path.join(root, f"region_{rid}/raster"))
    m = load_mask(os.path.join(root, f"region_{rid}/mask.pgm"))
    comp = pca_composite(r, 3)
    sp = sl.slic_segment(sl.to_lab(comp), sl.SlicConfig(k=sl.default_k(256, 256)))
    recs = segset.build_segments(sp, m, region_id=rid)
    stack = _channel_stack(r)
    channels = stack.band_names
    for rec in recs:
        rows.append(texture.segment_features(stack, rec.pixels, levels=64))
        seg_ids.append(rec.segment_id)
        reg_ids.append(rec.region_id)
        labels.append(rec.majority_label)
table = texture.FeatureTable(
    channels=channels,
    segment_ids=np.array(seg_ids),
    region_ids=np.array(reg_ids),
    labels=np.array(labels),
    blocks=np.stack(rows),
)
train_t = table.rows_for_regions([1, 2])
val_t = table.rows_for_regions([3])
oracle = FitnessOracle(train_t, val_t, SvmConfig())


def g(*bands):
    return tuple(1 if f"B{i+1}" in bands else 0 for i in range(7))


print(f"delta={delta} gamma=({glo},{ghi}) feat_time={time.time()-t0:.1f}s")
for bands in [
    ("B1",), ("B3",), ("B4",), ("B2",), ("B2", "B5"),
    ("B1", "B3"), ("B1", "B4"), ("B3", "B4"), ("B1", "B3", "B4"),
    ("B1", "B3", "B4", "B7"), ("B1", "B2", "B3", "B4", "B5", "B6", "B7"),
]:
    v = oracle(g(*bands))
    print(" ", ",".join(bands), f"BA={v.balanced_accuracy:.4f}")

# contrast gaps
y = table.labels
for ch_i, ch in enumerate(channels[:7]):
    c = table.blocks[:, ch_i, 1]
    print(f"  {ch}: gap {c[y==1].mean()-c[y==0].mean():7.1f}")

# full protocol: exhaustive + 5-seed UMDA + pooled ranking
from bandselect import umda
from bandselect.pipeline import exhaustive_evaluation
import time

t0 = time.time()
ranked = exhaustive_evaluation(oracle)
print(f"exhaustive time {time.time()-t0:.1f}s; top7:")
for ind in ranked[:7]:
    print("  ", ind.genome, ind.bands(), f"{ind.fitness.balanced_accuracy:.4f}")
cut = ranked[6].fitness.balanced_accuracy
results = []
for seed in (1, 10, 20, 30, 42):
    cfg = umda.UmdaConfig(seed=seed)
    res = umda.run(cfg, oracle)
    results.append(res)
    print(f"seed {seed}: best {res.best.genome} {res.best.fitness.balanced_accuracy:.4f} evals {res.evaluations}")
    assert res.best.fitness.balanced_accuracy >= cut, "not top-5%"
pool = umda.pool_final_populations(results)
ranking = umda.rank_bands(pool, top_k=22)
print("pool size", ranking.pool_size)
for name, f, r in zip(ranking.band_names, ranking.frequencies, ranking.ranks):
    print(f"  {name} {f*100:5.1f}% rank {r}")
sig = {"B1", "B3", "B4"}
fmin = min(f for n, f in zip(ranking.band_names, ranking.frequencies) if n in sig)
fmax = max(f for n, f in zip(ranking.band_names, ranking.frequencies) if n not in sig)
print("min signal freq", fmin, "max noise freq", fmax, "OK" if fmin > fmax else "FAIL")
