"""Synthetic cities with planted social structure.

A small set of *hub* users are densely befriended and spend much of their
time at a designated set of *social venues*. Each hub visits a fresh
handful of social venues in every period, so venues new to a hub keep
appearing over time. In the later period of each two-period window
ordinary users pick up social venues too (``adoption_rate``). Ordinary
users repeat a few favourite places and otherwise wander according to a
Zipf popularity profile. A few
celebrity accounts with many one-way followers and almost no check-ins
give the follower trim something to remove.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ingest import CheckIn, FollowEdge, LocationMeta

DAY = 86_400

SOCIAL_CATEGORIES = ("Music Venue", "Nightclub", "Concert Hall", "Bar")
ORDINARY_CATEGORIES = (
    "Convenience Store", "Pharmacy", "Fast Food Restaurant", "Office",
    "Post Office", "Laundry Service", "Museum", "Mall",
)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the planted model.

    Rates are multiplicative weights on a user's location-choice
    distribution. With ``n_hubs=0``, every rate (including
    ``adoption_rate``) at 1 and ``popularity_skew=0`` each visit picks a
    location uniformly at random.
    """

    n_users: int = 200
    n_locations: int = 100
    n_hubs: int = 20
    n_social_venues: int = 10
    checkins_per_user: float = 40.0
    # location choice
    popularity_skew: float = 1.0
    social_venue_rate: float = 1.0
    hub_social_rate: float = 30.0
    hub_venues_per_period: int = 3
    favorites_per_user: int = 4
    favorite_rate: float = 4.0
    # ordinary users' multiplier on social venues in the second period of
    # every two-period window
    adoption_rate: float = 4.0
    # friendships
    hub_friend_prob: float = 0.5
    covisit_friend_prob: float = 0.1
    background_friend_prob: float = 0.01
    one_way_follow_prob: float = 0.01
    # celebrity accounts; None picks enough to absorb a 5% follower trim
    n_celebrities: int | None = None
    celebrity_follow_prob: float = 0.5
    celebrity_checkins: int = 2
    # time and space
    n_days: int = 60
    period_days: int = 30
    start_timestamp: int = 1_438_387_200  # 2015-08-01T00:00:00Z
    center_lat: float = 40.75
    center_lon: float = -73.98
    spread_deg: float = 0.08

    def validate(self) -> None:
        if self.n_users < 1 or self.n_locations < 1:
            raise ValueError("need at least one user and one location")
        if not 0 <= self.n_hubs <= self.n_users:
            raise ValueError(f"n_hubs={self.n_hubs} exceeds n_users={self.n_users}")
        if not 0 <= self.n_social_venues <= self.n_locations:
            raise ValueError(
                f"n_social_venues={self.n_social_venues} exceeds n_locations={self.n_locations}"
            )
        if self.favorites_per_user > self.n_locations:
            raise ValueError("favorites_per_user exceeds n_locations")
        if self.hub_venues_per_period > max(self.n_social_venues, 0) and self.n_hubs:
            raise ValueError("hub_venues_per_period exceeds n_social_venues")
        for name in ("social_venue_rate", "hub_social_rate", "favorite_rate", "adoption_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("hub_friend_prob", "covisit_friend_prob", "background_friend_prob",
                     "one_way_follow_prob", "celebrity_follow_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_days < 1 or self.period_days < 1 or self.checkins_per_user < 0:
            raise ValueError("time span, period and check-in rate must be positive")
        if self.popularity_skew < 0:
            raise ValueError("popularity_skew must be nonnegative")

    @property
    def celebrities(self) -> int:
        if self.n_celebrities is not None:
            return self.n_celebrities
        return math.ceil(0.06 * self.n_users)


@dataclass
class SyntheticCity:
    checkins: list[CheckIn]
    follows: list[FollowEdge]
    locations: list[LocationMeta]
    hubs: frozenset[str]
    social_venues: frozenset[str]


def _tok(prefix: str, i: int, n: int) -> str:
    return f"{prefix}{i:0{max(3, len(str(n)))}d}"


def generate_synthetic(spec: SynthSpec = SynthSpec(), seed: int = 0) -> SyntheticCity:
    """Draw one synthetic city. Identical ``(spec, seed)`` gives identical output."""
    spec.validate()
    rng = np.random.default_rng(seed)
    nu, nl = spec.n_users, spec.n_locations
    users = [_tok("u", i, nu) for i in range(nu)]
    locs = [_tok("l", j, nl) for j in range(nl)]
    celebs = [_tok("c", k, spec.celebrities) for k in range(spec.celebrities)]

    hub_idx = np.sort(rng.choice(nu, size=spec.n_hubs, replace=False))
    social_idx = np.sort(rng.choice(nl, size=spec.n_social_venues, replace=False))
    is_hub = np.zeros(nu, dtype=bool)
    is_hub[hub_idx] = True
    is_social = np.zeros(nl, dtype=bool)
    is_social[social_idx] = True

    # base popularity: Zipf over a random ranking of the ordinary venues;
    # social venues sit at the mean ordinary weight
    ordinary = np.flatnonzero(~is_social)
    base = np.ones(nl)
    if len(ordinary):
        ranks = rng.permutation(len(ordinary)) + 1
        base[ordinary] = ranks.astype(float) ** (-spec.popularity_skew)
        base /= base[ordinary].max()
        if len(social_idx):
            base[social_idx] = base[ordinary].mean()
    base[social_idx] *= spec.social_venue_rate

    n_periods = math.ceil(spec.n_days / spec.period_days)
    favorites = [
        rng.choice(nl, size=spec.favorites_per_user, replace=False, p=base / base.sum())
        for _ in range(nu)
    ]

    lat = spec.center_lat + rng.uniform(-spec.spread_deg, spec.spread_deg, nl)
    lon = spec.center_lon + rng.uniform(-spec.spread_deg, spec.spread_deg, nl)
    lat = np.round(lat, 6)
    lon = np.round(lon, 6)

    checkins: list[CheckIn] = []
    ever_visited = [set() for _ in range(nu)]
    for i in range(nu):
        n = rng.poisson(spec.checkins_per_user)
        if n == 0:
            continue
        days = rng.integers(0, spec.n_days, size=n)
        secs = rng.integers(0, DAY, size=n)
        periods = np.minimum(days // spec.period_days, n_periods - 1)
        w_user = base.copy()
        w_user[favorites[i]] *= spec.favorite_rate
        choice = np.empty(n, dtype=np.int64)
        for p in range(n_periods):
            mask = periods == p
            k = int(mask.sum())
            if k == 0:
                continue
            w = w_user.copy()
            if is_hub[i] and spec.hub_venues_per_period:
                current = rng.choice(social_idx, size=spec.hub_venues_per_period, replace=False)
                w[current] *= spec.hub_social_rate
            elif not is_hub[i] and p % 2 == 1:
                w[social_idx] *= spec.adoption_rate
            choice[mask] = rng.choice(nl, size=k, p=w / w.sum())
        for d, s, j in zip(days, secs, choice):
            ever_visited[i].add(int(j))
            checkins.append(CheckIn(
                users[i], locs[j], int(spec.start_timestamp + d * DAY + s), float(lat[j]), float(lon[j])
            ))
    for c in celebs:
        for j in rng.choice(nl, size=spec.celebrity_checkins, replace=True):
            t = int(spec.start_timestamp + rng.integers(0, spec.n_days * DAY))
            checkins.append(CheckIn(c, locs[j], t, float(lat[j]), float(lon[j])))

    # friendships: dense hub core, hubs befriend co-visitors of social venues
    social_visits = np.zeros((nu, nl), dtype=bool)
    for i in range(nu):
        social_visits[i, list(ever_visited[i])] = True
    social_visits &= is_social[None, :]
    shares_social = (social_visits.astype(np.int64) @ social_visits.T.astype(np.int64)) > 0
    either_hub = is_hub[:, None] | is_hub[None, :]
    both_hub = is_hub[:, None] & is_hub[None, :]
    prob = np.full((nu, nu), spec.background_friend_prob)
    prob[either_hub & shares_social] = spec.covisit_friend_prob
    prob[both_hub] = spec.hub_friend_prob
    draws = rng.random((nu, nu))
    a_idx, b_idx = np.nonzero(np.triu(draws < prob, k=1))
    friends = set(zip(a_idx.tolist(), b_idx.tolist()))

    follows: list[FollowEdge] = []
    for a, b in sorted(friends):
        follows.append(FollowEdge(users[a], users[b]))
        follows.append(FollowEdge(users[b], users[a]))
    if spec.one_way_follow_prob > 0:
        mask = rng.random((nu, nu)) < spec.one_way_follow_prob
        for a, b in zip(*np.nonzero(mask)):
            if a != b and (min(a, b), max(a, b)) not in friends:
                follows.append(FollowEdge(users[a], users[b]))
    for c in celebs:
        for i in np.flatnonzero(rng.random(nu) < spec.celebrity_follow_prob):
            follows.append(FollowEdge(users[i], c))
    follows = sorted(set(follows), key=lambda e: (e.follower, e.followee))

    metas: list[LocationMeta] = []
    for j in range(nl):
        if is_social[j]:
            category = SOCIAL_CATEGORIES[int(rng.integers(len(SOCIAL_CATEGORIES)))]
            rating = float(np.clip(rng.normal(8.2, 0.7), 1.0, 10.0))
        else:
            category = ORDINARY_CATEGORIES[int(rng.integers(len(ORDINARY_CATEGORIES)))]
            rating = float(np.clip(rng.normal(6.5, 1.0), 1.0, 10.0))
        metas.append(LocationMeta(
            location_id=locs[j],
            name=f"{category} #{j}",
            category=category,
            rating=round(rating, 1),
            tips=int(rng.poisson(5 + 50 * base[j])),
            likes=int(rng.poisson(20 + 200 * base[j])),
            latitude=float(lat[j]),
            longitude=float(lon[j]),
        ))

    checkins.sort(key=lambda c: (c.timestamp, c.user_id, c.location_id))
    return SyntheticCity(
        checkins=checkins,
        follows=follows,
        locations=metas,
        hubs=frozenset(users[i] for i in hub_idx),
        social_venues=frozenset(locs[j] for j in social_idx),
    )
