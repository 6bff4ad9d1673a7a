"""Independent reference implementations used only by the tests.

Everything here works on dense Python/numpy arrays with explicit loops so
that it shares no code path with the sparse package implementation.
"""

from __future__ import annotations

import itertools

import numpy as np


def dense_column_stochastic(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    n_rows, n_cols = m.shape
    out = np.zeros_like(m)
    for j in range(n_cols):
        total = sum(m[k, j] for k in range(n_rows))
        for i in range(n_rows):
            out[i, j] = m[i, j] / total if total > 0 else 1.0 / n_rows
    return out


def literal_fixed_point(X, Y, alpha=0.5, tol=1e-5, max_iter=200):
    """Iterate the two update equations entry by entry.

    Returns ``(kappa, eta, sweeps, history)`` where history holds
    ``(sum(eta), sum(kappa))`` after each sweep.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, m = Y.shape
    xb = dense_column_stochastic(X)
    yb = dense_column_stochastic(Y)
    ytb = dense_column_stochastic(Y.T)
    eta = [1.0 / n] * n
    kappa = [1.0 / m] * m
    history = []
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        new_eta = []
        for i in range(n):
            social = sum(xb[i, j] * eta[j] for j in range(n))
            mobile = sum(yb[i, j] * kappa[j] for j in range(m))
            new_eta.append(alpha * social + (1 - alpha) * mobile)
        new_kappa = [sum(ytb[j, i] * new_eta[i] for i in range(n)) for j in range(m)]
        diff = max(abs(a - b) for a, b in zip(new_kappa, kappa))
        eta, kappa = new_eta, new_kappa
        history.append((sum(eta), sum(kappa)))
        if diff < tol:
            break
    return np.array(kappa), np.array(eta), sweeps, history


def rwr_stationary(T: np.ndarray, target: int, c: float) -> np.ndarray:
    """Solve ``r = (1-c) P r + c e_target`` directly, with P the normalized bipartite block matrix."""
    T = np.asarray(T, dtype=float)
    n, m = T.shape
    Q = np.zeros((n + m, n + m))
    Q[:n, n:] = T
    Q[n:, :n] = T.T
    P = dense_column_stochastic(Q)
    e = np.zeros(n + m)
    e[target] = 1.0
    return np.linalg.solve(np.eye(n + m) - (1 - c) * P, c * e)


def pairwise_auc(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ordered correctly; ties count one half."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def maximal_core(counts: dict[tuple[str, str], int], min_user: int, min_loc: int):
    """Largest (users, locations) pair meeting both thresholds, by brute-force enumeration."""
    users = sorted({u for u, _ in counts})
    locs = sorted({l for _, l in counts})
    best = (frozenset(), frozenset())
    best_size = -1
    for ru in range(len(users) + 1):
        for us in itertools.combinations(users, ru):
            for rl in range(len(locs) + 1):
                for ls in itertools.combinations(locs, rl):
                    if not us or not ls:
                        continue
                    ok = all(sum(counts.get((u, l), 0) for l in ls) >= max(min_user, 1) for u in us)
                    ok = ok and all(sum(counts.get((u, l), 0) for u in us) >= max(min_loc, 1) for l in ls)
                    if ok and len(us) + len(ls) > best_size:
                        best = (frozenset(us), frozenset(ls))
                        best_size = len(us) + len(ls)
    return best
