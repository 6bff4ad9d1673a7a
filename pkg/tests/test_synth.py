import numpy as np
import pytest

from locsoc.ingest import build_networks
from locsoc.solver import compute_sociality
from locsoc.synth import SynthSpec, generate_synthetic

SMALL = SynthSpec(n_users=80, n_locations=40, n_hubs=8, n_social_venues=6)


def test_same_seed_same_city():
    a, b = generate_synthetic(SMALL, 4), generate_synthetic(SMALL, 4)
    assert a.checkins == b.checkins and a.follows == b.follows and a.locations == b.locations
    assert generate_synthetic(SMALL, 5).checkins != a.checkins


def test_timestamps_within_span():
    city = generate_synthetic(SMALL, 1)
    ts = [c.timestamp for c in city.checkins]
    assert min(ts) >= SMALL.start_timestamp
    assert max(ts) < SMALL.start_timestamp + SMALL.n_days * 86_400


def test_planted_sets_sizes():
    city = generate_synthetic(SMALL, 2)
    assert len(city.hubs) == 8 and len(city.social_venues) == 6
    assert {m.location_id for m in city.locations} >= city.social_venues


def test_hubs_favour_social_venues():
    city = generate_synthetic(SMALL, 3)
    hub = [c.location_id in city.social_venues for c in city.checkins if c.user_id in city.hubs]
    other = [c.location_id in city.social_venues for c in city.checkins
             if c.user_id not in city.hubs and c.user_id.startswith("u")]
    assert np.mean(hub) > 2 * np.mean(other)


def test_null_model_is_unstructured():
    null = SynthSpec(n_users=150, n_locations=50, n_hubs=0, n_social_venues=10, popularity_skew=0.0,
                     hub_social_rate=1.0, favorite_rate=1.0, adoption_rate=1.0)
    city = generate_synthetic(null, 0)
    share = np.mean([c.location_id in city.social_venues for c in city.checkins if c.user_id.startswith("u")])
    assert share == pytest.approx(10 / 50, abs=0.03)


def test_social_venues_rank_higher_on_average():
    gaps = []
    for seed in range(10):
        city = generate_synthetic(SMALL, seed)
        social, ul = build_networks(city.checkins, city.follows)
        kappa, _ = compute_sociality(social, ul)
        d = kappa.as_dict()
        soc = [d[l] for l in city.social_venues if l in d]
        rest = [v for l, v in d.items() if l not in city.social_venues]
        gaps.append(np.mean(soc) - np.mean(rest))
    assert np.mean(gaps) > 0


@pytest.mark.parametrize("kw", [
    {"n_hubs": 500}, {"n_social_venues": 200}, {"adoption_rate": 0.0}, {"hub_friend_prob": 1.5},
    {"n_users": 0}, {"popularity_skew": -1.0},
])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        generate_synthetic(SynthSpec(**kw))
