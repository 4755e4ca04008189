"""Linear SVM trained by deterministic subgradient descent, plus the
balanced-accuracy fitness oracle used by the band search.

Training minimizes lam/2 * ||w||^2 + mean_i c_i * hinge_i with per-class
weights c = n_total / (2 * n_class), a 1/(lam*t) step schedule, projection
onto the 1/sqrt(lam) ball, and shuffling fixed by the seed. Non-forest is
the positive class throughout; a raw score of exactly zero predicts it.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, SingleClassError
from .texture import FeatureTable


@dataclass(frozen=True)
class SvmConfig:
    lam: float = 1e-4
    epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std == 0, 1.0, std)
        return cls(mean=mean, std=std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.mean.shape[0]:
            raise DimensionMismatchError(
                f"{x.shape[1]} features, standardizer fitted for {self.mean.shape[0]}"
            )
        return (x - self.mean) / self.std


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray
    bias: float
    class_weights: dict[int, float]
    config: SvmConfig
    loss_trace: tuple[float, ...]


def _objective(
    x: np.ndarray, signs: np.ndarray, weights: np.ndarray, w: np.ndarray, b: float, lam: float
) -> float:
    margins = signs * (x @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(0.5 * lam * (w @ w) + np.mean(weights * hinge))


def train(x: np.ndarray, y: np.ndarray, cfg: SvmConfig) -> SvmModel:
    """Fit the class-weighted linear SVM; rows must already be standardized."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("x must be (n, d) with one label per row")
    n = x.shape[0]
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("training data must contain both classes")
    class_weights = {0: n / (2.0 * n_neg), 1: n / (2.0 * n_pos)}
    signs = np.where(y == 1, 1.0, -1.0)
    weights = np.where(y == 1, class_weights[1], class_weights[0])

    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(x.shape[1], dtype=np.float64)
    b = 0.0
    lam = cfg.lam
    radius = 1.0 / np.sqrt(lam)
    t = 0
    trace = []
    for _ in range(cfg.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = signs[i] * (x[i] @ w + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += (eta * weights[i] * signs[i]) * x[i]
                b += eta * weights[i] * signs[i]
            norm = np.sqrt(w @ w)
            if norm > radius:
                w *= radius / norm
        trace.append(_objective(x, signs, weights, w, b, lam))
    return SvmModel(
        weights=w,
        bias=b,
        class_weights=class_weights,
        config=cfg,
        loss_trace=tuple(trace),
    )


def predict(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Binary labels; a score of exactly zero goes to the positive class."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.weights.shape[0]:
        raise DimensionMismatchError(
            f"{x.shape[1]} features, model trained on {model.weights.shape[0]}"
        )
    scores = x @ model.weights + model.bias
    return (scores >= 0).astype(np.int64)


def balanced_accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[float, float, float]:
    """(balanced accuracy, forest recall, non-forest recall)."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatchError("y_true and y_pred lengths differ")
    pos = y_true == 1
    neg = y_true == 0
    if not pos.any() or not neg.any():
        raise SingleClassError("ground truth must contain both classes")
    recall_nonforest = float((y_pred[pos] == 1).mean())
    recall_forest = float((y_pred[neg] == 0).mean())
    return (recall_forest + recall_nonforest) / 2.0, recall_forest, recall_nonforest


@dataclass(frozen=True)
class FitnessValue:
    balanced_accuracy: float
    recall_forest: float
    recall_nonforest: float
    split: str
    degenerate: bool = False


def genome_channels(genome: tuple[int, ...]) -> list[str]:
    return [f"B{i + 1}" for i, bit in enumerate(genome) if bit]


@dataclass
class FitnessOracle:
    """Balanced accuracy of an SVM trained on the genome's band blocks.

    Standardization is fitted on the training rows only; results are memoized
    by genome, so identical band sets never retrain. Thread-safe.
    """

    train_table: FeatureTable
    eval_table: FeatureTable
    cfg: SvmConfig
    split: str = "validation"
    cache: dict[tuple[int, ...], FitnessValue] = field(default_factory=dict)

    def __post_init__(self):
        self._lock = threading.Lock()
        self.evaluations = 0
        self.requests = 0

    def __call__(self, genome: tuple[int, ...]) -> FitnessValue:
        genome = tuple(int(b) for b in genome)
        with self._lock:
            self.requests += 1
            if genome in self.cache:
                return self.cache[genome]
        value = self._evaluate(genome)
        with self._lock:
            self.cache.setdefault(genome, value)
            self.evaluations += 1
        return value

    def _evaluate(self, genome: tuple[int, ...]) -> FitnessValue:
        channels = genome_channels(genome)
        if not channels:
            return FitnessValue(0.0, 0.0, 0.0, self.split, degenerate=True)
        x_train = self.train_table.matrix(channels)
        x_eval = self.eval_table.matrix(channels)
        scaler = Standardizer.fit(x_train)
        model = train(scaler.apply(x_train), self.train_table.labels, self.cfg)
        preds = predict(model, scaler.apply(x_eval))
        ba, rf, rnf = balanced_accuracy(self.eval_table.labels, preds)
        return FitnessValue(ba, rf, rnf, self.split)

    def save_cache(self, path) -> None:
        with self._lock:
            items = {
                "".join(map(str, genome)): {
                    "balanced_accuracy": v.balanced_accuracy,
                    "recall_forest": v.recall_forest,
                    "recall_nonforest": v.recall_nonforest,
                    "split": v.split,
                    "degenerate": v.degenerate,
                }
                for genome, v in self.cache.items()
            }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(items, sort_keys=True, indent=2) + "\n")


def fitness(
    genome: tuple[int, ...],
    train_table: FeatureTable,
    eval_table: FeatureTable,
    cfg: SvmConfig,
    cache: dict[tuple[int, ...], FitnessValue] | None = None,
    split: str = "validation",
) -> FitnessValue:
    """One-shot fitness evaluation sharing :class:`FitnessOracle` semantics."""
    oracle = FitnessOracle(train_table, eval_table, cfg, split, cache if cache is not None else {})
    return oracle(genome)


def save_model(model: SvmModel, scaler: Standardizer, path) -> None:
    obj = {
        "weights": [float(v) for v in model.weights],
        "bias": model.bias,
        "class_weights": {str(k): v for k, v in model.class_weights.items()},
        "standardizer": {
            "mean": [float(v) for v in scaler.mean],
            "std": [float(v) for v in scaler.std],
        },
        "config": {"lam": model.config.lam, "epochs": model.config.epochs, "seed": model.config.seed},
        "loss_trace": list(model.loss_trace),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
