"""New-location recommendation by random walk with restart.

The walk runs on the bipartite user/location graph. Edge weights are
raw visit counts (``plain``) or visit counts scaled by ``1 / -ln(s)``
where ``s`` is the location's sociality (``sociality``), which tilts the
walk towards social places. Evaluation slides over consecutive windows:
the first half of each window trains, the second half supplies each
user's newly visited locations as ground truth.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .ingest import CheckIn, EmptyAfterFilteringError, FilterConfig, FollowEdge, UserLocationNetwork, build_networks
from .solver import Scores, SolverConfig, ZeroColumnPolicy, column_stochastic, compute_sociality

logger = logging.getLogger(__name__)

DAY = 86_400
SOCIALITY_CLAMP = 1.0 - 1e-12
WEIGHTINGS = ("plain", "sociality")


class WalkConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class RwrConfig:
    restart_probability: float = 0.15
    tolerance: float = 1e-8
    max_iterations: int = 1000
    weighting: str = "plain"
    # "k" divides hits by k; "length" divides by the recommendation list length
    precision_denominator: str = "k"

    def __post_init__(self):
        if not 0.0 < self.restart_probability < 1.0:
            raise ValueError("restart_probability must lie in (0, 1)")
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerance and max_iterations must be positive")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        if self.precision_denominator not in ("k", "length"):
            raise ValueError("precision_denominator must be 'k' or 'length'")


@dataclass(frozen=True, eq=False)
class BipartiteWalkGraph:
    """Column-stochastic transition matrix over users followed by locations."""

    users: tuple[str, ...]
    locations: tuple[str, ...]
    edge_weights: sp.csr_matrix  # users x locations
    transition: sp.csr_matrix  # (U+L) x (U+L), column-stochastic
    weighting: str

    @property
    def n_nodes(self) -> int:
        return len(self.users) + len(self.locations)

    def __post_init__(self):
        object.__setattr__(self, "_index", {u: i for i, u in enumerate(self.users)})

    def user_index(self, user: str) -> int:
        try:
            return self._index[user]
        except KeyError:
            raise KeyError(f"user {user!r} not in graph") from None

    def personalized(self, user: str, restart_probability: float) -> np.ndarray:
        """Dense restart-augmented matrix for one target user (small graphs only)."""
        q = (1.0 - restart_probability) * self.transition.toarray()
        q[self.user_index(user), :] += restart_probability
        return q


def sociality_edge_weights(ul: UserLocationNetwork, scores: Scores) -> sp.csr_matrix:
    """Visit counts scaled per location by ``1 / -ln(s)``.

    Scores at or above 1 are clamped just below 1; nonpositive scores
    raise because the logarithm is undefined.
    """
    lookup = scores.as_dict()
    missing = [l for l in ul.locations if l not in lookup]
    if missing:
        raise ValueError(f"no sociality score for locations {missing[:5]}")
    s = np.array([lookup[l] for l in ul.locations], dtype=np.float64)
    bad = [l for l, v in zip(ul.locations, s) if not v > 0]
    if bad:
        raise ValueError(f"sociality must be positive for the log weighting, got nonpositive at {bad[:5]}")
    if np.any(s >= 1.0):
        logger.warning("clamping %d sociality scores >= 1", int(np.sum(s >= 1.0)))
        s = np.minimum(s, SOCIALITY_CLAMP)
    factor = 1.0 / (-np.log(s))
    return sp.csr_matrix(ul.weights.astype(np.float64) @ sp.diags(factor))


def build_walk_graph(ul: UserLocationNetwork, scores: Scores | None, config: RwrConfig = RwrConfig()) -> BipartiteWalkGraph:
    if config.weighting == "sociality":
        if scores is None:
            raise ValueError("sociality weighting needs sociality scores")
        t = sociality_edge_weights(ul, scores)
    else:
        t = sp.csr_matrix(ul.weights, dtype=np.float64)
    q = sp.bmat([[None, t], [t.T, None]], format="csc")
    n = len(ul.users) + len(ul.locations)
    q.resize((n, n))
    p = column_stochastic(q, ZeroColumnPolicy.UNIFORM)
    return BipartiteWalkGraph(tuple(ul.users), tuple(ul.locations), t, p, config.weighting)


def _walk(graph: BipartiteWalkGraph, targets: Sequence[int], config: RwrConfig) -> np.ndarray:
    """Stationary restart distributions, one column per target user index.

    Stops once the a-posteriori error bound falls below the tolerance.
    """
    n = graph.n_nodes
    c = config.restart_probability
    k = len(targets)
    restart = np.zeros((n, k))
    restart[np.asarray(targets, dtype=np.int64), np.arange(k)] = 1.0
    r = restart.copy()
    residual = math.inf
    # the map contracts by (1 - c) in the 1-norm, so this bounds the distance to the fixed point
    bound = (1.0 - c) / c
    for it in range(1, config.max_iterations + 1):
        nxt = (1.0 - c) * (graph.transition @ r) + c * restart
        residual = float(np.max(np.sum(np.abs(nxt - r), axis=0))) if k else 0.0
        r = nxt
        if residual * bound < config.tolerance:
            logger.debug("walk converged after %d iterations", it)
            return r
    raise WalkConvergenceError(
        f"random walk did not converge in {config.max_iterations} iterations (residual {residual:.3e})"
    )


def personalize_and_walk(graph: BipartiteWalkGraph, user: str, config: RwrConfig = RwrConfig()) -> np.ndarray:
    """Relevance of every node (users then locations) to ``user``; sums to one."""
    return _walk(graph, [graph.user_index(user)], config)[:, 0]


def recommend_new(
    graph: BipartiteWalkGraph,
    user: str,
    train_history: Iterable[str],
    k: int = 10,
    relevance: np.ndarray | None = None,
    config: RwrConfig = RwrConfig(),
) -> list[tuple[str, float]]:
    """Top ``k`` locations by relevance, skipping places the user already visited."""
    if relevance is None:
        relevance = personalize_and_walk(graph, user, config)
    else:
        graph.user_index(user)
    seen = set(train_history)
    loc_rel = relevance[len(graph.users):]
    cands = [(l, float(v)) for l, v in zip(graph.locations, loc_rel) if l not in seen]
    cands.sort(key=lambda t: (-t[1], t[0]))
    return cands[:k]


@dataclass(frozen=True)
class TemporalSplit:
    start: int
    middle: int
    end: int
    train: list[CheckIn]
    test: list[CheckIn]


def split_window(checkins: Iterable[CheckIn], start: int, window_days: int = 60) -> TemporalSplit:
    """Train on ``[start, start + half)``, test on ``[start + half, start + window)``."""
    half = window_days * DAY // 2
    middle, end = start + half, start + window_days * DAY
    train, test = [], []
    for c in checkins:
        if start <= c.timestamp < middle:
            train.append(c)
        elif middle <= c.timestamp < end:
            test.append(c)
    return TemporalSplit(start, middle, end, train, test)


def window_starts(checkins: Sequence[CheckIn], window_days: int = 60, stride_days: int | None = None) -> list[int]:
    """Starts of every full window, anchored at UTC midnight of the first check-in."""
    if not checkins:
        return []
    stride = (stride_days or window_days) * DAY
    first = min(c.timestamp for c in checkins)
    last = max(c.timestamp for c in checkins)
    origin = first - first % DAY
    horizon = last - last % DAY + DAY
    starts = []
    s = origin
    while s + window_days * DAY <= horizon:
        starts.append(s)
        s += stride
    return starts


def precision_recall(recommended: Sequence[str], truth: set[str], k: int, denominator: str = "k") -> tuple[float, float]:
    hits = len(set(recommended[:k]) & truth)
    denom = k if denominator == "k" else max(len(recommended[:k]), 1)
    return hits / denom, (hits / len(truth) if truth else 0.0)


@dataclass
class WindowReport:
    window_start: int
    window_end: int
    weighting: str
    precision: float | None = None
    recall: float | None = None
    n_evaluable: int = 0
    n_no_ground_truth: int = 0
    n_absent_from_train: int = 0
    skipped: bool = False
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "window_start": self.window_start,
            "window_start_utc": datetime.fromtimestamp(self.window_start, timezone.utc).strftime("%Y-%m-%d"),
            "window_end": self.window_end,
            "weighting": self.weighting,
            "precision_at_k": self.precision,
            "recall_at_k": self.recall,
            "evaluable_users": self.n_evaluable,
            "skipped_no_ground_truth": self.n_no_ground_truth,
            "skipped_absent_from_train": self.n_absent_from_train,
            "skipped": self.skipped,
            "reason": self.reason,
        }


@dataclass
class RecommendationRun:
    reports: list[WindowReport] = field(default_factory=list)
    # (window_start, weighting, user, rank, location, relevance)
    recommendations: list[tuple[int, str, str, int, str, float]] = field(default_factory=list)


def evaluate_windows(
    checkins: Sequence[CheckIn],
    follows: Sequence[FollowEdge],
    filter_config: FilterConfig = FilterConfig(min_user_checkins=5, min_location_checkins=3),
    rwr_config: RwrConfig = RwrConfig(),
    solver_config: SolverConfig = SolverConfig(),
    window_days: int = 60,
    k: int = 10,
    weightings: Sequence[str] = WEIGHTINGS,
    stride_days: int | None = None,
) -> RecommendationRun:
    """Precision@k and recall@k per window and weighting.

    Networks and sociality are rebuilt from each window's training half
    only. Users absent from the training graph or with no new test
    locations are skipped and counted.
    """
    run = RecommendationRun()
    starts = window_starts(checkins, window_days, stride_days)
    if not starts:
        raise ValueError(f"check-ins do not span a full {window_days}-day window")
    for start in starts:
        split = split_window(checkins, start, window_days)
        history: dict[str, set[str]] = {}
        for c in split.train:
            history.setdefault(c.user_id, set()).add(c.location_id)
        future: dict[str, set[str]] = {}
        for c in split.test:
            future.setdefault(c.user_id, set()).add(c.location_id)
        truth = {u: locs - history.get(u, set()) for u, locs in future.items()}

        try:
            social, ul = build_networks(split.train, follows, filter_config)
        except EmptyAfterFilteringError as exc:
            for w in weightings:
                run.reports.append(WindowReport(start, split.end, w, skipped=True, reason=str(exc)))
            continue
        in_graph = set(ul.users)
        absent = sum(1 for u, t in truth.items() if t and u not in in_graph)
        no_truth = sum(1 for u in in_graph if not truth.get(u))
        evaluable = sorted(u for u in in_graph if truth.get(u))

        scores = None
        if "sociality" in weightings:
            scores, _ = compute_sociality(social, ul, solver_config)

        for w in weightings:
            report = WindowReport(start, split.end, w, n_no_ground_truth=no_truth, n_absent_from_train=absent)
            if not evaluable:
                report.skipped = True
                report.reason = "no evaluable users"
                run.reports.append(report)
                continue
            cfg = RwrConfig(rwr_config.restart_probability, rwr_config.tolerance,
                            rwr_config.max_iterations, w, rwr_config.precision_denominator)
            graph = build_walk_graph(ul, scores, cfg)
            rel = _walk(graph, [graph.user_index(u) for u in evaluable], cfg)
            precisions, recalls = [], []
            for col, u in enumerate(evaluable):
                recs = recommend_new(graph, u, history.get(u, ()), k, relevance=rel[:, col])
                p, r = precision_recall([l for l, _ in recs], truth[u], k, cfg.precision_denominator)
                precisions.append(p)
                recalls.append(r)
                for rank_pos, (l, v) in enumerate(recs, start=1):
                    run.recommendations.append((start, w, u, rank_pos, l, v))
            report.precision = float(np.mean(precisions))
            report.recall = float(np.mean(recalls))
            report.n_evaluable = len(evaluable)
            run.reports.append(report)
            logger.info("window %d [%s]: precision@%d %.4f recall@%d %.4f over %d users",
                        start, w, k, report.precision, k, report.recall, len(evaluable))
    return run
