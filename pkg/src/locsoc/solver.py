"""Location sociality and user influence as a mutual-reinforcement fixed point.

User influence mixes a PageRank-style walk on the friendship graph with a
HITS-style exchange over the user-location graph::

    eta   <- alpha * Xbar @ eta + (1 - alpha) * Ybar @ kappa
    kappa <- YTbar @ eta

where ``Xbar``, ``Ybar`` and ``YTbar`` are the column-stochastic versions
of the friendship matrix, the visit-count matrix and its transpose.
Iteration starts from uniform vectors and stops once the largest change
in ``kappa`` between two sweeps drops below the tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .ingest import SocialNetwork, UserLocationNetwork

logger = logging.getLogger(__name__)


class ZeroColumnPolicy(str, Enum):
    UNIFORM = "uniform"
    SELF_LOOP = "self-loop"
    DROP_NODE = "drop-node"


class ZeroColumnError(ValueError):
    """A zero column was found under the ``drop-node`` policy."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during iteration."""


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 0.5
    tolerance: float = 1e-5
    max_iterations: int = 200
    zero_column_policy: ZeroColumnPolicy = ZeroColumnPolicy.UNIFORM

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        object.__setattr__(self, "zero_column_policy", ZeroColumnPolicy(self.zero_column_policy))


@dataclass(frozen=True, eq=False)
class Scores:
    """Scores aligned with an ordered token list."""

    tokens: tuple[str, ...]
    values: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.tokens, self.values.tolist()))

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True, eq=False)
class SocialityScores(Scores):
    iterations_used: int = 0
    converged: bool = False


@dataclass(frozen=True, eq=False)
class InfluenceScores(Scores):
    pass


@dataclass(frozen=True, eq=False)
class StochasticOperators:
    """Column-stochastic operators for one user/location network pair.

    ``x_bar`` is users x users, ``y_bar`` is users x locations (mass
    flowing from a location to its visitors) and ``yt_bar`` is
    locations x users (mass flowing from a user to the places they visit).
    """

    users: tuple[str, ...]
    locations: tuple[str, ...]
    x_bar: sp.csr_matrix
    y_bar: sp.csr_matrix
    yt_bar: sp.csr_matrix
    zero_column_policy: ZeroColumnPolicy


def column_stochastic(
    matrix, policy: ZeroColumnPolicy | str = ZeroColumnPolicy.UNIFORM, labels: Sequence[str] | None = None
) -> sp.csr_matrix:
    """Divide every column by its sum, handling empty columns per ``policy``.

    ``uniform`` fills an empty column with ``1/n``; ``self-loop`` puts unit
    mass on the diagonal (square matrices only; a rectangular empty
    column stays empty); ``drop-node`` raises :class:`ZeroColumnError`
    naming the first offending column.
    """
    policy = ZeroColumnPolicy(policy)
    m = sp.csc_matrix(matrix, dtype=np.float64, copy=True)
    m.sum_duplicates()
    n_rows, n_cols = m.shape
    sums = np.asarray(m.sum(axis=0)).ravel()
    if np.any(m.data < 0):
        raise ValueError("column_stochastic requires nonnegative entries")
    nonzero = sums > 0
    scale = np.zeros(n_cols)
    scale[nonzero] = 1.0 / sums[nonzero]
    m = m @ sp.diags(scale)
    empty = np.flatnonzero(~nonzero)
    if len(empty):
        if policy is ZeroColumnPolicy.DROP_NODE:
            name = labels[empty[0]] if labels is not None else int(empty[0])
            raise ZeroColumnError(f"node {name!r} has no outgoing mass ({len(empty)} zero columns)")
        if policy is ZeroColumnPolicy.UNIFORM:
            rows = np.tile(np.arange(n_rows), len(empty))
            cols = np.repeat(empty, n_rows)
            fill = sp.csc_matrix((np.full(len(rows), 1.0 / n_rows), (rows, cols)), shape=m.shape)
            m = m + fill
        elif n_rows == n_cols:
            m = m + sp.csc_matrix((np.ones(len(empty)), (empty, empty)), shape=m.shape)
        else:
            logger.warning("%d empty columns left empty under self-loop policy (non-square)", len(empty))
    out = sp.csr_matrix(m)
    out.sort_indices()
    return out


def normalize(
    social: SocialNetwork,
    ul: UserLocationNetwork,
    policy: ZeroColumnPolicy | str = ZeroColumnPolicy.UNIFORM,
) -> StochasticOperators:
    if tuple(social.users) != tuple(ul.users):
        raise ValueError("social and user-location networks disagree on user ordering")
    policy = ZeroColumnPolicy(policy)
    x_bar = column_stochastic(social.adjacency, policy, ul.users)
    y_bar = column_stochastic(ul.weights, policy, ul.locations)
    yt_bar = column_stochastic(ul.weights.T, policy, ul.users)
    return StochasticOperators(ul.users, ul.locations, x_bar, y_bar, yt_bar, policy)


SweepCallback = Callable[[int, np.ndarray, np.ndarray], None]


def solve(
    ops: StochasticOperators,
    config: SolverConfig = SolverConfig(),
    callback: SweepCallback | None = None,
) -> tuple[SocialityScores, InfluenceScores]:
    """Iterate the coupled updates to their fixed point.

    Each sweep updates ``eta`` first, then ``kappa`` from the new ``eta``.
    Convergence is judged on ``kappa`` alone. ``callback(sweep, eta,
    kappa)`` is invoked after every sweep with read-only views.

    Raises
    ------
    NumericError
        If an iterate contains NaN or infinity.
    """
    n_users, n_locs = len(ops.users), len(ops.locations)
    if n_users == 0 or n_locs == 0:
        raise ValueError("cannot solve on an empty network")
    alpha = config.alpha
    eta = np.full(n_users, 1.0 / n_users)
    kappa = np.full(n_locs, 1.0 / n_locs)
    converged = False
    sweep = 0
    for sweep in range(1, config.max_iterations + 1):
        eta_new = alpha * (ops.x_bar @ eta) + (1.0 - alpha) * (ops.y_bar @ kappa)
        kappa_new = ops.yt_bar @ eta_new
        if not (np.all(np.isfinite(eta_new)) and np.all(np.isfinite(kappa_new))):
            raise NumericError(f"non-finite value at sweep {sweep}")
        diff = float(np.max(np.abs(kappa_new - kappa)))
        eta_diff = float(np.max(np.abs(eta_new - eta)))
        eta, kappa = eta_new, kappa_new
        if callback is not None:
            e, k = eta.view(), kappa.view()
            e.flags.writeable = False
            k.flags.writeable = False
            callback(sweep, e, k)
        logger.debug("sweep %d: max kappa change %.3e, max eta change %.3e", sweep, diff, eta_diff)
        if diff < config.tolerance:
            converged = True
            break
    if converged:
        logger.info("converged after %d sweeps", sweep)
    else:
        logger.warning("no convergence within %d sweeps", config.max_iterations)
    return (
        SocialityScores(ops.locations, kappa, iterations_used=sweep, converged=converged),
        InfluenceScores(ops.users, eta),
    )


def compute_sociality(
    social: SocialNetwork, ul: UserLocationNetwork, config: SolverConfig = SolverConfig()
) -> tuple[SocialityScores, InfluenceScores]:
    """Normalize and solve in one call."""
    return solve(normalize(social, ul, config.zero_column_policy), config)


def rank(scores: Scores, k: int) -> list[tuple[str, float]]:
    """Top ``k`` (token, score) pairs, descending, ties by token."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    order = sorted(zip(scores.tokens, scores.values.tolist()), key=lambda t: (-t[1], t[0]))
    return order[:k]
