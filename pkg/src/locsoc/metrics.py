"""Descriptive analytics over sociality scores.

Location entropy, per-category means, an OLS fit of sociality against
Foursquare-style rating/tips/likes, histograms and spatial grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import stats

from .ingest import LocationMeta, UserLocationNetwork
from .solver import Scores

UNKNOWN_CATEGORY = "unknown"


class InsufficientDataError(ValueError):
    """Too few complete rows for a regression."""


@dataclass(frozen=True, eq=False)
class LocationEntropy(Scores):
    pass


def location_entropy(ul: UserLocationNetwork) -> LocationEntropy:
    """Shannon entropy (natural log) of each location's visits over its visitors."""
    w = ul.weights.tocsc().astype(np.float64)
    out = np.zeros(w.shape[1])
    for j in range(w.shape[1]):
        counts = w.data[w.indptr[j]:w.indptr[j + 1]]
        counts = counts[counts > 0]
        total = counts.sum()
        if total <= 0:
            raise ValueError(f"location {ul.locations[j]!r} has no check-ins")
        p = counts / total
        out[j] = max(0.0, -float(np.sum(p * np.log(p))))
    return LocationEntropy(ul.locations, out)


def _meta_index(meta: Iterable[LocationMeta]) -> dict[str, LocationMeta]:
    return {m.location_id: m for m in meta}


def category_summary(scores: Scores, meta: Iterable[LocationMeta]) -> list[tuple[str, float, int]]:
    """Mean score per category as ``(category, mean, count)``, best first.

    Locations without metadata or with a blank category fall under
    ``"unknown"``. Equal means are ordered by category name.
    """
    index = _meta_index(meta)
    groups: dict[str, list[float]] = {}
    for tok, v in zip(scores.tokens, scores.values.tolist()):
        m = index.get(tok)
        cat = m.category if m is not None and m.category else UNKNOWN_CATEGORY
        groups.setdefault(cat, []).append(v)
    rows = [(c, math.fsum(vs) / len(vs), len(vs)) for c, vs in groups.items()]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows


@dataclass
class RegressionResult:
    """OLS fit ``score ~ intercept + rating + tips + likes``."""

    intercept: float
    coefficients: dict[str, float]
    r_squared: float
    n_rows: int
    degenerate: bool = False
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "coefficients": self.coefficients,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_rows": self.n_rows,
            "degenerate": self.degenerate,
            "notes": self.notes,
        }


EXPLANATORY = ("rating", "tips", "likes")
MIN_REGRESSION_ROWS = 5


def ols(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    """Least squares through the normal equations.

    Returns ``(beta, degenerate)``. When ``design.T @ design`` is singular
    the minimum-norm solution is returned and ``degenerate`` is True.
    """
    gram = design.T @ design
    rhs = design.T @ y
    rank = np.linalg.matrix_rank(gram)
    if rank == gram.shape[0]:
        return np.linalg.solve(gram, rhs), False
    return np.linalg.pinv(gram) @ rhs, True


def rating_regression(scores: Scores, meta: Iterable[LocationMeta]) -> RegressionResult:
    """Regress sociality on rating, tips and likes.

    Only locations with all three fields present are used. A constant
    response gives ``r_squared = 1`` with ``degenerate`` set.

    Raises
    ------
    InsufficientDataError
        Fewer than five complete rows.
    """
    index = _meta_index(meta)
    xs, ys = [], []
    for tok, v in zip(scores.tokens, scores.values.tolist()):
        m = index.get(tok)
        if m is None or m.rating is None or m.tips is None or m.likes is None:
            continue
        xs.append((1.0, float(m.rating), float(m.tips), float(m.likes)))
        ys.append(v)
    if len(ys) < MIN_REGRESSION_ROWS:
        raise InsufficientDataError(
            f"insufficient data: {len(ys)} complete rows, need {MIN_REGRESSION_ROWS}"
        )
    design = np.asarray(xs)
    y = np.asarray(ys)
    beta, degenerate = ols(design, y)
    notes = ["rank-deficient design, minimum-norm solution"] if degenerate else []
    resid = y - design @ beta
    ss_res = float(resid @ resid)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        r2 = 1.0
        degenerate = True
        notes.append("constant response, r_squared defined as 1")
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RegressionResult(
        intercept=float(beta[0]),
        coefficients={name: float(b) for name, b in zip(EXPLANATORY, beta[1:])},
        r_squared=r2,
        n_rows=len(ys),
        degenerate=degenerate,
        notes=notes,
    )


def histogram(scores: Scores, bins: int = 20, log_transform: bool = True) -> list[tuple[float, float, int]]:
    """Equal-width histogram as ``(low, high, count)`` rows.

    The last bin is closed on the right. If every value is equal a single
    zero-width bin holds the whole population.
    """
    if bins < 1:
        raise ValueError("bins must be at least 1")
    values = np.asarray(scores.values, dtype=np.float64)
    if log_transform:
        bad = [t for t, v in zip(scores.tokens, values.tolist()) if v <= 0]
        if bad:
            raise ValueError(f"log transform undefined for nonpositive scores at {bad}")
        values = np.log(values)
    if len(values) == 0:
        return []
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return [(lo, hi, len(values))]
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return [(float(edges[b]), float(edges[b + 1]), int(counts[b])) for b in range(bins)]


@dataclass
class GridHeatmap:
    """Values summed over half-open ``cell_size`` squares anchored at the data's south-west corner."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float
    cell_size: float
    n_rows: int
    n_cols: int
    cells: dict[tuple[int, int], float]

    def total(self) -> float:
        return math.fsum(self.cells.values())

    def cell_bounds(self, row: int, col: int) -> tuple[float, float, float, float]:
        lat0 = self.min_lat + row * self.cell_size
        lon0 = self.min_lon + col * self.cell_size
        return lat0, lon0, lat0 + self.cell_size, lon0 + self.cell_size

    def to_geojson(self) -> dict:
        features = []
        for (r, c) in sorted(self.cells):
            lat0, lon0, lat1, lon1 = self.cell_bounds(r, c)
            ring = [[lon0, lat0], [lon1, lat0], [lon1, lat1], [lon0, lat1], [lon0, lat0]]
            features.append({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {"row": r, "col": c, "value": self.cells[(r, c)]},
            })
        return {"type": "FeatureCollection", "features": features}


def grid_heatmap(values: Mapping[str, float] | Scores, meta: Iterable[LocationMeta], cell_size: float) -> GridHeatmap:
    """Sum per-location values over a regular lat/lon grid.

    Locations without coordinates are ignored. A point on a cell edge
    belongs to the cell whose south-west corner it sits on.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if isinstance(values, Scores):
        values = values.as_dict()
    index = _meta_index(meta)
    points = []
    for tok in sorted(values):
        m = index.get(tok)
        if m is None or m.latitude is None or m.longitude is None:
            continue
        points.append((m.latitude, m.longitude, float(values[tok])))
    if not points:
        raise ValueError("no locations with coordinates")
    lats = np.array([p[0] for p in points])
    lons = np.array([p[1] for p in points])
    min_lat, min_lon = float(lats.min()), float(lons.min())
    cells: dict[tuple[int, int], float] = {}
    for lat, lon, v in points:
        key = (int(math.floor((lat - min_lat) / cell_size)), int(math.floor((lon - min_lon) / cell_size)))
        cells[key] = cells.get(key, 0.0) + v
    n_rows = max(r for r, _ in cells) + 1
    n_cols = max(c for _, c in cells) + 1
    return GridHeatmap(min_lat, min_lon, float(lats.max()), float(lons.max()),
                       cell_size, n_rows, n_cols, cells)


def grid_correlation(a: GridHeatmap, b: GridHeatmap) -> float:
    """Spearman rank correlation between two grids over the union of their cells.

    Both grids must share origin and cell size; cells absent from one grid
    count as zero there.
    """
    if (a.min_lat, a.min_lon, a.cell_size) != (b.min_lat, b.min_lon, b.cell_size):
        raise ValueError("grids are not aligned")
    keys = sorted(set(a.cells) | set(b.cells))
    va = [a.cells.get(k, 0.0) for k in keys]
    vb = [b.cells.get(k, 0.0) for k in keys]
    if len(keys) < 2:
        return float("nan")
    return float(stats.spearmanr(va, vb).statistic)

