"""Location sociality: a mixed HITS/PageRank score for places, and two experiments that use it."""

from .ingest import (
    CheckIn, FilterConfig, FollowEdge, LocationMeta, SocialNetwork, UserLocationNetwork, build_networks,
    parse_checkins, parse_follows, parse_locations,
)
from .solver import InfluenceScores, SocialityScores, SolverConfig, compute_sociality, normalize, rank, solve

__all__ = [
    "CheckIn", "FilterConfig", "FollowEdge", "LocationMeta", "SocialNetwork", "UserLocationNetwork",
    "build_networks", "parse_checkins", "parse_follows", "parse_locations",
    "InfluenceScores", "SocialityScores", "SolverConfig", "compute_sociality", "normalize", "rank", "solve",
]
