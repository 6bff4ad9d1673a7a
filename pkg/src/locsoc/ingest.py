"""Input parsing, dataset filtering and network construction.

Check-ins, follow edges and venue metadata arrive as CSV files. The
filtering pipeline trims the most-followed accounts, keeps mutual follows
as friendships, and then repeatedly drops inactive users and rarely
visited locations until both activity thresholds hold at once.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

Source = Union[str, os.PathLike, IO[str], IO[bytes]]

CHECKIN_HEADER = ("user_id", "location_id", "timestamp", "lat", "lon")
FOLLOW_HEADER = ("follower", "followee")
LOCATION_HEADER = ("location_id", "name", "category", "rating", "tips", "likes", "lat", "lon")


class InputError(ValueError):
    """Raised when an input file cannot be read or lacks a required column."""


class EmptyAfterFilteringError(ValueError):
    """Raised when the filtering pipeline leaves no users or no locations.

    ``threshold`` names the filter that removed the last survivors.
    """

    def __init__(self, threshold: str, message: str):
        super().__init__(message)
        self.threshold = threshold


@dataclass(frozen=True)
class CheckIn:
    user_id: str
    location_id: str
    timestamp: int
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class FollowEdge:
    follower: str
    followee: str

    def __post_init__(self):
        if self.follower == self.followee:
            raise ValueError(f"self-follow by {self.follower!r}")


@dataclass(frozen=True)
class LocationMeta:
    location_id: str
    name: str = ""
    category: str = ""
    rating: float | None = None
    tips: int | None = None
    likes: int | None = None
    latitude: float | None = None
    longitude: float | None = None

    def __post_init__(self):
        if self.rating is not None and not 1.0 <= self.rating <= 10.0:
            raise ValueError(f"rating {self.rating} outside [1, 10]")
        if self.tips is not None and self.tips < 0:
            raise ValueError(f"negative tips count {self.tips}")
        if self.likes is not None and self.likes < 0:
            raise ValueError(f"negative likes count {self.likes}")


@dataclass(frozen=True)
class FilterConfig:
    min_user_checkins: int = 20
    min_location_checkins: int = 10
    follower_trim_fraction: float = 0.05

    def __post_init__(self):
        if self.min_user_checkins < 0 or self.min_location_checkins < 0:
            raise ValueError("check-in thresholds must be nonnegative")
        if not 0.0 <= self.follower_trim_fraction < 1.0:
            raise ValueError("follower_trim_fraction must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class SocialNetwork:
    """Undirected friendship graph over the active users.

    ``adjacency`` is a symmetric 0/1 CSR matrix indexed by ``users``.
    """

    users: tuple[str, ...]
    adjacency: sp.csr_matrix

    @property
    def degree(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=0)).ravel().astype(np.int64)

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.nnz // 2)

    def edges(self) -> list[tuple[str, str]]:
        """Undirected edges as ``(a, b)`` token pairs with index ``a < b``."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return [(self.users[upper.row[k]], self.users[upper.col[k]]) for k in order]


@dataclass(frozen=True, eq=False)
class UserLocationNetwork:
    """Weighted bipartite graph; ``weights[i, j]`` counts visits of user i to location j."""

    users: tuple[str, ...]
    locations: tuple[str, ...]
    weights: sp.csr_matrix

    def visited(self, user: str) -> set[str]:
        i = self.users.index(user)
        row = self.weights.getrow(i)
        return {self.locations[j] for j in row.indices}


@dataclass
class ParseResult:
    """Records parsed from one file plus the number of rows rejected."""

    records: list
    skipped: int = 0
    diagnostics: list[str] = field(default_factory=list)


def _open_text(source: Source):
    if isinstance(source, (str, os.PathLike)):
        try:
            return open(source, newline="", encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read {os.fspath(source)}: {exc.strerror}") from exc
    if isinstance(source, io.TextIOBase):
        return source
    # assume binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _read_rows(source: Source, header: Sequence[str], required: Sequence[str]):
    fh = _open_text(source)
    owns = isinstance(source, (str, os.PathLike))
    try:
        try:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames
        except UnicodeDecodeError as exc:
            raise InputError(f"input is not UTF-8: {exc}") from exc
        if fields is None:
            raise InputError(f"missing header row, expected {','.join(header)}")
        missing = [c for c in required if c not in fields]
        if missing:
            raise InputError(f"header lacks column(s) {missing}; expected {','.join(header)}")
        try:
            for lineno, row in enumerate(reader, start=2):
                yield lineno, row
        except UnicodeDecodeError as exc:
            raise InputError(f"input is not UTF-8: {exc}") from exc
    finally:
        if owns:
            fh.close()


def _optional(value: str | None, cast):
    if value is None or value.strip() == "":
        return None
    return cast(value)


def _parse(source, header, required, build) -> ParseResult:
    result = ParseResult(records=[])
    for lineno, row in _read_rows(source, header, required):
        try:
            result.records.append(build(row))
        except (TypeError, ValueError) as exc:
            result.skipped += 1
            msg = f"line {lineno}: {exc}"
            result.diagnostics.append(msg)
            logger.warning("skipping malformed row, %s", msg)
    return result


def _build_checkin(row) -> CheckIn:
    user, loc = row["user_id"], row["location_id"]
    if not user or not loc:
        raise ValueError("empty user or location token")
    return CheckIn(user, loc, int(row["timestamp"]), float(row["lat"]), float(row["lon"]))


def _build_follow(row) -> FollowEdge:
    if not row["follower"] or not row["followee"]:
        raise ValueError("empty user token")
    return FollowEdge(row["follower"], row["followee"])


def _build_location(row) -> LocationMeta:
    if not row["location_id"]:
        raise ValueError("empty location token")
    return LocationMeta(
        location_id=row["location_id"],
        name=row.get("name") or "",
        category=row.get("category") or "",
        rating=_optional(row.get("rating"), float),
        tips=_optional(row.get("tips"), int),
        likes=_optional(row.get("likes"), int),
        latitude=_optional(row.get("lat"), float),
        longitude=_optional(row.get("lon"), float),
    )


def parse_checkins(source: Source) -> ParseResult:
    """Parse ``user_id,location_id,timestamp,lat,lon`` rows.

    Malformed rows (bad numbers, out-of-range coordinates, negative
    timestamps) are skipped and counted; an unreadable file raises
    :class:`InputError`.
    """
    return _parse(source, CHECKIN_HEADER, CHECKIN_HEADER, _build_checkin)


def parse_follows(source: Source) -> ParseResult:
    return _parse(source, FOLLOW_HEADER, FOLLOW_HEADER, _build_follow)


def parse_locations(source: Source) -> ParseResult:
    return _parse(source, LOCATION_HEADER, ("location_id",), _build_location)


def _trimmed_users(checkins: Sequence[CheckIn], follows: Sequence[FollowEdge], fraction: float) -> set[str]:
    """Users removed as celebrity/business accounts.

    The population is everyone seen in either input. Ranking is by
    distinct follower count, descending, ties by token.
    """
    if fraction <= 0:
        return set()
    followers: dict[str, set[str]] = {}
    for e in follows:
        followers.setdefault(e.followee, set()).add(e.follower)
    population = {c.user_id for c in checkins}
    for e in follows:
        population.add(e.follower)
        population.add(e.followee)
    n_trim = math.floor(fraction * len(population))
    if n_trim == 0:
        return set()
    ranked = sorted(population, key=lambda u: (-len(followers.get(u, ())), u))
    return set(ranked[:n_trim])


def build_networks(
    checkins: Iterable[CheckIn],
    follows: Iterable[FollowEdge],
    config: FilterConfig = FilterConfig(),
) -> tuple[SocialNetwork, UserLocationNetwork]:
    """Apply the filtering pipeline and build both networks.

    Order of operations: follower trim, then the two check-in thresholds
    applied alternately until neither removes anything, then mutual-follow
    edges restricted to the surviving users. Users and locations are
    indexed in lexicographic token order.
    """
    checkins = list(checkins)
    follows = list(follows)
    trimmed = _trimmed_users(checkins, follows, config.follower_trim_fraction)
    if trimmed:
        logger.info("follower trim removed %d users", len(trimmed))

    pair_counts = Counter((c.user_id, c.location_id) for c in checkins if c.user_id not in trimmed)
    if not pair_counts:
        raise EmptyAfterFilteringError(
            "follower_trim_fraction" if trimmed else "min_user_checkins",
            "no check-ins remain after the follower trim" if trimmed else "no check-ins in input",
        )

    users = {u for u, _ in pair_counts}
    locations = {l for _, l in pair_counts}
    last = None
    while True:
        user_tot: Counter = Counter()
        loc_tot: Counter = Counter()
        for (u, l), n in pair_counts.items():
            if u in users and l in locations:
                user_tot[u] += n
                loc_tot[l] += n
        bad_users = {u for u in users if user_tot[u] < max(config.min_user_checkins, 1)}
        if bad_users:
            users -= bad_users
            last = "min_user_checkins"
            if not users:
                break
            continue
        bad_locs = {l for l in locations if loc_tot[l] < max(config.min_location_checkins, 1)}
        if bad_locs:
            locations -= bad_locs
            last = "min_location_checkins"
            continue
        break

    if not users or not locations:
        binding = last or "min_user_checkins"
        value = getattr(config, binding)
        raise EmptyAfterFilteringError(
            binding, f"empty-after-filtering: no users/locations survive {binding}={value}"
        )

    user_list = tuple(sorted(users))
    loc_list = tuple(sorted(locations))
    uidx = {u: i for i, u in enumerate(user_list)}
    lidx = {l: j for j, l in enumerate(loc_list)}

    rows, cols, vals = [], [], []
    for (u, l), n in sorted(pair_counts.items()):
        if u in uidx and l in lidx:
            rows.append(uidx[u])
            cols.append(lidx[l])
            vals.append(n)
    weights = sp.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (rows, cols)), shape=(len(user_list), len(loc_list))
    )

    directed = {(e.follower, e.followee) for e in follows}
    er, ec = [], []
    for a, b in directed:
        if a in uidx and b in uidx and (b, a) in directed:
            er.append(uidx[a])
            ec.append(uidx[b])
    adjacency = sp.csr_matrix(
        (np.ones(len(er), dtype=np.int64), (er, ec)), shape=(len(user_list), len(user_list))
    )
    adjacency.sort_indices()

    social = SocialNetwork(user_list, adjacency)
    ul = UserLocationNetwork(user_list, loc_list, weights)
    logger.info(
        "built networks: %d users, %d locations, %d friendships",
        len(user_list), len(loc_list), social.n_edges,
    )
    return social, ul


def surviving_checkins(checkins: Iterable[CheckIn], ul: UserLocationNetwork) -> list[CheckIn]:
    """Check-ins whose user and location both survived filtering."""
    users, locs = set(ul.users), set(ul.locations)
    return [c for c in checkins if c.user_id in users and c.location_id in locs]


def write_checkins(path, checkins: Iterable[CheckIn]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHECKIN_HEADER)
        for c in checkins:
            w.writerow([c.user_id, c.location_id, c.timestamp, repr(c.latitude), repr(c.longitude)])


def write_follows(path, follows: Iterable[FollowEdge]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FOLLOW_HEADER)
        for e in follows:
            w.writerow([e.follower, e.followee])


def write_locations(path, metas: Iterable[LocationMeta]) -> None:
    def fmt(v):
        return "" if v is None else repr(v)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOCATION_HEADER)
        for m in metas:
            w.writerow([m.location_id, m.name, m.category, fmt(m.rating), fmt(m.tips),
                        fmt(m.likes), fmt(m.latitude), fmt(m.longitude)])
