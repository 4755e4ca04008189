"""Declarative run configuration: JSON schema, defaults, canonical hashing.

Unknown keys are rejected at every level. The config hash covers every
semantic section (the output root is excluded, so relocating artifacts does
not invalidate them); stages embed it in their manifests and refuse inputs
produced under a different hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .segset import DEFAULT_MIN_AREA, DEFAULT_MIN_HOR, DatasetSplit
from .slic import DEFAULT_PX_PER_SEGMENT
from .synth import SyntheticSpec

CONFIG_VERSION = 1

BASELINE_COMPOSITIONS = {
    "rgb": ["B4", "B3", "B2"],
    "pca": ["PC1", "PC2", "PC3"],
    "all+ndvi": ["B1", "B2", "B3", "B4", "B5", "B6", "B7", "NDVI"],
}

DERIVED_CHANNELS = ("PC1", "PC2", "PC3", "NDVI")


def _require_keys(obj: dict, known: set[str], where: str) -> None:
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def _typed(obj: dict, key: str, types, default, where: str):
    if key not in obj:
        return default
    value = obj[key]
    if value is None and default is None:
        return None
    type_tuple = types if isinstance(types, tuple) else (types,)
    if isinstance(value, bool) and bool not in type_tuple:
        raise ConfigError(f"{where}.{key} has wrong type bool")
    if not isinstance(value, type_tuple):
        raise ConfigError(f"{where}.{key} has wrong type {type(value).__name__}")
    return value


@dataclass(frozen=True)
class SlicSection:
    k: int | None = None
    px_per_segment: int = DEFAULT_PX_PER_SEGMENT
    m: float = 10.0
    max_iter: int = 10
    min_region_frac: float = 0.25


@dataclass(frozen=True)
class SegmentSection:
    min_hor: float = DEFAULT_MIN_HOR
    min_area: int = DEFAULT_MIN_AREA


@dataclass(frozen=True)
class TextureSection:
    levels: int = 64
    direction_mean: bool = False


@dataclass(frozen=True)
class SvmSection:
    lam: float = 1e-4
    epochs: int = 30
    seed: int = 0


@dataclass(frozen=True)
class UmdaSection:
    population: int = 10
    parents: int = 5
    generations: int = 10
    margins: bool = False
    seeds: tuple[int, ...] = (1, 10, 20, 30, 42)
    top_k: int | None = 22


@dataclass(frozen=True)
class RunConfig:
    corpus_root: str = "corpus"
    output_root: str = "out"
    slic: SlicSection = field(default_factory=SlicSection)
    segments: SegmentSection = field(default_factory=SegmentSection)
    texture: TextureSection = field(default_factory=TextureSection)
    svm: SvmSection = field(default_factory=SvmSection)
    umda: UmdaSection = field(default_factory=UmdaSection)
    split_train: tuple[int, ...] = (1, 2, 5, 6, 7, 9)
    split_validation: tuple[int, ...] = (8,)
    split_test: tuple[int, ...] = (3, 4)
    baselines: tuple[str, ...] = ("rgb", "pca", "all+ndvi")
    synth: SyntheticSpec | None = None

    def split(self) -> DatasetSplit:
        return DatasetSplit(
            train=frozenset(self.split_train),
            validation=frozenset(self.split_validation),
            test=frozenset(self.split_test),
        )

    def to_json(self) -> dict:
        obj = {
            "version": CONFIG_VERSION,
            "paths": {"corpus_root": self.corpus_root, "output_root": self.output_root},
            "slic": {
                "k": self.slic.k,
                "px_per_segment": self.slic.px_per_segment,
                "m": self.slic.m,
                "max_iter": self.slic.max_iter,
                "min_region_frac": self.slic.min_region_frac,
            },
            "segments": {"min_hor": self.segments.min_hor, "min_area": self.segments.min_area},
            "texture": {
                "levels": self.texture.levels,
                "direction_mean": self.texture.direction_mean,
            },
            "svm": {"lam": self.svm.lam, "epochs": self.svm.epochs, "seed": self.svm.seed},
            "umda": {
                "population": self.umda.population,
                "parents": self.umda.parents,
                "generations": self.umda.generations,
                "margins": self.umda.margins,
                "seeds": list(self.umda.seeds),
                "top_k": self.umda.top_k,
            },
            "split": {
                "train": list(self.split_train),
                "validation": list(self.split_validation),
                "test": list(self.split_test),
            },
            "compositions": {"baselines": list(self.baselines)},
        }
        if self.synth is not None:
            obj["synth"] = self.synth.to_json()
        return obj

    def config_hash(self) -> str:
        obj = self.to_json()
        obj["paths"] = {"corpus_root": self.corpus_root}
        blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def config_from_json(obj: dict) -> RunConfig:
    _require_keys(
        obj,
        {
            "version",
            "paths",
            "slic",
            "segments",
            "texture",
            "svm",
            "umda",
            "split",
            "compositions",
            "synth",
        },
        "config",
    )
    version = obj.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")

    paths = obj.get("paths", {})
    _require_keys(paths, {"corpus_root", "output_root"}, "paths")

    slic_obj = obj.get("slic", {})
    _require_keys(slic_obj, {"k", "px_per_segment", "m", "max_iter", "min_region_frac"}, "slic")
    slic = SlicSection(
        k=_typed(slic_obj, "k", int, None, "slic"),
        px_per_segment=_typed(slic_obj, "px_per_segment", int, DEFAULT_PX_PER_SEGMENT, "slic"),
        m=float(_typed(slic_obj, "m", (int, float), 10.0, "slic")),
        max_iter=_typed(slic_obj, "max_iter", int, 10, "slic"),
        min_region_frac=float(_typed(slic_obj, "min_region_frac", (int, float), 0.25, "slic")),
    )

    seg_obj = obj.get("segments", {})
    _require_keys(seg_obj, {"min_hor", "min_area"}, "segments")
    segments = SegmentSection(
        min_hor=float(_typed(seg_obj, "min_hor", (int, float), DEFAULT_MIN_HOR, "segments")),
        min_area=_typed(seg_obj, "min_area", int, DEFAULT_MIN_AREA, "segments"),
    )

    tex_obj = obj.get("texture", {})
    _require_keys(tex_obj, {"levels", "direction_mean"}, "texture")
    texture = TextureSection(
        levels=_typed(tex_obj, "levels", int, 64, "texture"),
        direction_mean=_typed(tex_obj, "direction_mean", bool, False, "texture"),
    )

    svm_obj = obj.get("svm", {})
    _require_keys(svm_obj, {"lam", "epochs", "seed"}, "svm")
    svm = SvmSection(
        lam=float(_typed(svm_obj, "lam", (int, float), 1e-4, "svm")),
        epochs=_typed(svm_obj, "epochs", int, 30, "svm"),
        seed=_typed(svm_obj, "seed", int, 0, "svm"),
    )

    umda_obj = obj.get("umda", {})
    _require_keys(
        umda_obj, {"population", "parents", "generations", "margins", "seeds", "top_k"}, "umda"
    )
    seeds = umda_obj.get("seeds", [1, 10, 20, 30, 42])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("umda.seeds must be a nonempty list of integers")
    umda = UmdaSection(
        population=_typed(umda_obj, "population", int, 10, "umda"),
        parents=_typed(umda_obj, "parents", int, 5, "umda"),
        generations=_typed(umda_obj, "generations", int, 10, "umda"),
        margins=_typed(umda_obj, "margins", bool, False, "umda"),
        seeds=tuple(seeds),
        top_k=_typed(umda_obj, "top_k", int, 22, "umda"),
    )

    split_obj = obj.get("split", {})
    _require_keys(split_obj, {"train", "validation", "test"}, "split")
    defaults = RunConfig()

    def _ids(key: str, fallback: tuple[int, ...]) -> tuple[int, ...]:
        value = split_obj.get(key, list(fallback))
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise ConfigError(f"split.{key} must be a list of integers")
        return tuple(value)

    comp_obj = obj.get("compositions", {})
    _require_keys(comp_obj, {"baselines"}, "compositions")
    baselines = comp_obj.get("baselines", list(defaults.baselines))
    for name in baselines:
        if name not in BASELINE_COMPOSITIONS:
            raise ConfigError(
                f"unknown baseline {name!r}; choose from {sorted(BASELINE_COMPOSITIONS)}"
            )

    synth = None
    if "synth" in obj and obj["synth"] is not None:
        synth = SyntheticSpec.from_json(obj["synth"])

    cfg = RunConfig(
        corpus_root=paths.get("corpus_root", defaults.corpus_root),
        output_root=paths.get("output_root", defaults.output_root),
        slic=slic,
        segments=segments,
        texture=texture,
        svm=svm,
        umda=umda,
        split_train=_ids("train", defaults.split_train),
        split_validation=_ids("validation", defaults.split_validation),
        split_test=_ids("test", defaults.split_test),
        baselines=tuple(baselines),
        synth=synth,
    )
    cfg.split()  # validate disjoint/nonempty early
    return cfg


def load_config(path) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return config_from_json(obj)
