"""Friendship prediction from the sociality of common locations.

Pairs of users with at least two common locations are labelled positive
when they are friends. An equal number of non-friend pairs is sampled as
negatives. Features are summary statistics (mean, max, min, population
standard deviation) of the common locations' sociality and/or entropy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from scipy.stats import rankdata

from .ingest import SocialNetwork, UserLocationNetwork
from .solver import Scores

logger = logging.getLogger(__name__)

MIN_COMMON = 2

SOCIALITY_COLUMNS = ("soc_avg", "soc_max", "soc_min", "soc_std")
ENTROPY_COLUMNS = ("ent_avg", "ent_max", "ent_min", "ent_std")
MODE_COLUMNS = {
    "sociality": SOCIALITY_COLUMNS,
    "entropy": ENTROPY_COLUMNS,
    "combined": SOCIALITY_COLUMNS + ENTROPY_COLUMNS,
}
MODES = tuple(MODE_COLUMNS)


class SamplingError(ValueError):
    """Not enough eligible non-friend pairs to balance the positives."""


@dataclass(frozen=True)
class PairExample:
    user_a: str
    user_b: str
    common_locations: frozenset[str]
    label: int

    def __post_init__(self):
        if len(self.common_locations) < MIN_COMMON:
            raise ValueError(f"pair ({self.user_a}, {self.user_b}) has fewer than {MIN_COMMON} common locations")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


@dataclass(frozen=True)
class FeatureVector:
    common_count: int
    soc_avg: float | None = None
    soc_max: float | None = None
    soc_min: float | None = None
    soc_std: float | None = None
    ent_avg: float | None = None
    ent_max: float | None = None
    ent_min: float | None = None
    ent_std: float | None = None

    def vector(self, mode: str) -> np.ndarray:
        """Feature values in the fixed column order of ``MODE_COLUMNS[mode]``."""
        cols = MODE_COLUMNS[mode]
        vals = [getattr(self, c) for c in cols]
        if any(v is None for v in vals):
            raise ValueError(f"feature vector lacks columns needed for mode {mode!r}")
        return np.asarray(vals, dtype=np.float64)


def build_pairs(social: SocialNetwork, ul: UserLocationNetwork, seed: int = 0) -> list[PairExample]:
    """Balanced labelled pairs.

    Positives are every friend pair sharing at least two locations.
    Negatives are drawn uniformly without replacement from the non-friend
    pairs that also share at least two locations.
    """
    if tuple(social.users) != tuple(ul.users):
        raise ValueError("networks disagree on user ordering")
    visited = (ul.weights > 0).astype(np.int64).tocsr()
    common = sp.triu(visited @ visited.T, k=1).tocoo()
    keep = common.data >= MIN_COMMON
    rows, cols = common.row[keep], common.col[keep]
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    adj = social.adjacency.tocsr()
    is_friend = np.asarray(adj[rows, cols]).ravel() > 0

    pos = [(int(a), int(b)) for a, b, f in zip(rows, cols, is_friend) if f]
    neg_pool = [(int(a), int(b)) for a, b, f in zip(rows, cols, is_friend) if not f]
    if len(neg_pool) < len(pos):
        raise SamplingError(
            f"{len(pos)} positive pairs but only {len(neg_pool)} eligible negative pairs"
        )
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(neg_pool), size=len(pos), replace=False))
    neg = [neg_pool[k] for k in picked]

    loc_sets = [frozenset(ul.locations[j] for j in visited.indices[visited.indptr[i]:visited.indptr[i + 1]])
                for i in range(visited.shape[0])]
    out = []
    for label, group in ((1, pos), (0, neg)):
        for a, b in group:
            out.append(PairExample(ul.users[a], ul.users[b], loc_sets[a] & loc_sets[b], label))
    logger.info("built %d positive and %d negative pairs", len(pos), len(neg))
    return out


def _stats(values: np.ndarray) -> tuple[float, float, float, float]:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        # avoid rounding noise so equal scores give exactly zero spread
        return lo, hi, lo, 0.0
    return float(values.mean()), hi, lo, float(values.std())


def _common_stats(common: Sequence[str], lookup: dict[str, float]) -> tuple[float, float, float, float]:
    return _stats(np.array([lookup[t] for t in common]))


def extract_features(
    pair: PairExample,
    scores: Scores | None,
    entropy: Scores | None = None,
    mode: str = "sociality",
) -> FeatureVector:
    """Summary statistics over the pair's common locations.

    ``mode`` decides which score sets are required; anything supplied
    beyond that is still computed so a single vector can be exported.
    """
    if mode not in MODE_COLUMNS:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
    if mode in ("sociality", "combined") and scores is None:
        raise ValueError(f"mode {mode!r} needs sociality scores")
    if mode in ("entropy", "combined") and entropy is None:
        raise ValueError(f"mode {mode!r} needs entropy scores")
    common = sorted(pair.common_locations)
    fields: dict = {"common_count": len(common)}
    if scores is not None:
        fields.update(zip(SOCIALITY_COLUMNS, _common_stats(common, scores.as_dict())))
    if entropy is not None:
        fields.update(zip(ENTROPY_COLUMNS, _common_stats(common, entropy.as_dict())))
    return FeatureVector(**fields)


def feature_matrix(pairs: Sequence[PairExample], scores, entropy, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix (columns per ``MODE_COLUMNS[mode]``) and 0/1 labels."""
    soc = scores.as_dict() if scores is not None else None
    ent = entropy.as_dict() if entropy is not None else None
    rows = []
    for p in pairs:
        common = sorted(p.common_locations)
        feats = []
        if mode in ("sociality", "combined"):
            feats.extend(_common_stats(common, soc))
        if mode in ("entropy", "combined"):
            feats.extend(_common_stats(common, ent))
        rows.append(feats)
    X = np.asarray(rows, dtype=np.float64).reshape(len(pairs), len(MODE_COLUMNS[mode]))
    y = np.asarray([p.label for p in pairs], dtype=np.int64)
    return X, y


@dataclass(frozen=True)
class LogisticConfig:
    learning_rate: float = 0.5
    epochs: int = 2000
    l2: float = 1e-4
    tolerance: float = 1e-6


@dataclass
class LogisticModel:
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: float
    epochs_run: int = 0

    def decision(self, X: np.ndarray) -> np.ndarray:
        z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return z @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision(X))


def train_logistic(X: np.ndarray, y: np.ndarray, config: LogisticConfig = LogisticConfig()) -> LogisticModel:
    """Full-batch gradient descent on L2-regularised mean log-loss.

    Features are z-scored with the training statistics (constant columns
    keep unit scale). Stops once the gradient's max-norm falls below
    ``config.tolerance`` or after ``config.epochs`` steps.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        p = expit(Z @ w + b)
        r = p - y
        gw = Z.T @ r / n + config.l2 * w
        gb = float(r.mean())
        w -= config.learning_rate * gw
        b -= config.learning_rate * gb
        if max(float(np.max(np.abs(gw))), abs(gb)) < config.tolerance:
            break
    return LogisticModel(mean, scale, w, b, epoch)


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def roc_curve(scores, labels) -> RocCurve:
    """ROC swept over every distinct score, highest threshold first.

    Tied scores move along a diagonal segment, so the trapezoidal area
    credits ties with one half.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    distinct = np.flatnonzero(np.diff(s)) if len(s) > 1 else np.array([], dtype=np.int64)
    ends = np.r_[distinct, len(s) - 1]
    tp = np.cumsum(y)[ends]
    fp = np.cumsum(~y)[ends]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[ends]]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def auc_trapezoid(scores, labels) -> float:
    return roc_curve(scores, labels).auc


def auc_mann_whitney(scores, labels) -> float:
    """Probability a random positive outranks a random negative, ties one half (via midranks)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy_f1(prob: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> tuple[float, float]:
    pred = np.asarray(prob) >= threshold
    y = np.asarray(labels).astype(bool)
    acc = float(np.mean(pred == y))
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    f1 = 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)
    return acc, float(f1)


def baseline_common_count(pairs: Sequence[PairExample]) -> RocCurve:
    """ROC of thresholding the number of common locations."""
    if not pairs:
        raise ValueError("no pairs")
    return roc_curve([len(p.common_locations) for p in pairs], [p.label for p in pairs])


@dataclass
class EvalReport:
    mode: str
    repetitions: int
    split_fraction: float
    seed: int
    auc: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    f1: list[float] = field(default_factory=list)
    redraws: int = 0

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.auc))

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracy))

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.f1))

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "repetitions": self.repetitions,
            "split_fraction": self.split_fraction,
            "seed": self.seed,
            "redraws": self.redraws,
            "per_repetition": [
                {"auc": a, "accuracy": c, "f1": f} for a, c, f in zip(self.auc, self.accuracy, self.f1)
            ],
            "mean": {"auc": self.mean_auc, "accuracy": self.mean_accuracy, "f1": self.mean_f1},
        }


MAX_REDRAWS = 10


def evaluate(
    pairs: Sequence[PairExample],
    scores: Scores | None,
    entropy: Scores | None = None,
    mode: str = "sociality",
    split_fraction: float = 0.7,
    repetitions: int = 10,
    seed: int = 0,
    config: LogisticConfig = LogisticConfig(),
) -> EvalReport:
    """Repeated random train/test splits with a logistic-regression classifier.

    Repetition ``r`` draws from its own generator seeded with ``(seed, r)``.
    A split whose training or test part lacks a class is redrawn, at most
    ``MAX_REDRAWS`` times per repetition.
    """
    if not pairs:
        raise ValueError("no pairs to evaluate")
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must lie in (0, 1)")
    X, y = feature_matrix(pairs, scores, entropy, mode)
    if len(np.unique(y)) < 2:
        raise ValueError("pairs must contain both classes")
    n = len(y)
    n_train = int(round(split_fraction * n))
    report = EvalReport(mode, repetitions, split_fraction, seed)
    for rep in range(repetitions):
        rng = np.random.default_rng([seed, rep])
        for attempt in range(MAX_REDRAWS + 1):
            perm = rng.permutation(n)
            tr, te = perm[:n_train], perm[n_train:]
            if len(np.unique(y[tr])) == 2 and len(np.unique(y[te])) == 2:
                break
            if attempt == MAX_REDRAWS:
                raise ValueError(f"repetition {rep}: no split with both classes after {MAX_REDRAWS} redraws")
            report.redraws += 1
            logger.info("repetition %d: split lacks a class, redrawing", rep)
        model = train_logistic(X[tr], y[tr], config)
        prob = model.predict_proba(X[te])
        report.auc.append(auc_trapezoid(prob, y[te]))
        acc, f1 = accuracy_f1(prob, y[te])
        report.accuracy.append(acc)
        report.f1.append(f1)
    return report


def feature_rows(pairs: Sequence[PairExample], scores, entropy) -> list[dict]:
    """Rows for the ``features.csv`` export, every available column filled."""
    out = []
    soc = scores.as_dict() if scores is not None else None
    ent = entropy.as_dict() if entropy is not None else None
    for p in pairs:
        common = sorted(p.common_locations)
        row = {"user_a": p.user_a, "user_b": p.user_b, "label": p.label, "common_count": len(common)}
        for prefix, lookup in (("soc", soc), ("ent", ent)):
            names = [f"{prefix}_{k}" for k in ("avg", "max", "min", "std")]
            if lookup is None:
                row.update(dict.fromkeys(names))
            else:
                row.update(zip(names, _common_stats(common, lookup)))
        out.append(row)
    return out
