"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; ``conftest.py`` prints them all in the
terminal summary, and running this file directly prints them as well.
"""

import functools
import logging
import time

import numpy as np

from conftest import networks_from_dense, random_instance
from locsoc.friendship import (
    MODES, auc_mann_whitney, auc_trapezoid, baseline_common_count, build_pairs, evaluate,
)
from locsoc.ingest import build_networks
from locsoc.metrics import location_entropy
from locsoc.recommend import RwrConfig, build_walk_graph, evaluate_windows, personalize_and_walk
from locsoc.solver import Scores, compute_sociality, normalize, solve
from locsoc.synth import SynthSpec, generate_synthetic
from oracles import literal_fixed_point

RESULTS: dict[int, tuple[bool, str, str]] = {}
N_PLANTED_SEEDS = 20


def criterion(number: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs) or ""
            except BaseException as exc:
                RESULTS[number] = (False, title, f"{type(exc).__name__}: {exc}".splitlines()[0][:200])
                print(f"FAIL  [{number:2d}] {title}")
                raise
            RESULTS[number] = (True, title, detail)
            print(f"PASS  [{number:2d}] {title}  {detail}")
        return inner
    return wrap


def summary_lines() -> list[str]:
    out = []
    for n in sorted(RESULTS):
        ok, title, detail = RESULTS[n]
        out.append(f"{'PASS' if ok else 'FAIL'}  [{n:2d}] {title}  {detail}".rstrip())
    return out


@criterion(1, "solver matches dense literal oracle on 100 random instances (1e-10)")
def test_c01_solver_oracle_equivalence():
    started = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        X, Y = random_instance(seed, max_users=50, max_locations=30)
        kappa, eta = compute_sociality(*networks_from_dense(X, Y))
        ok, oe, _, _ = literal_fixed_point(X, Y)
        worst = max(worst, float(np.abs(kappa.values - ok).max()), float(np.abs(eta.values - oe).max()))
    elapsed = time.perf_counter() - started
    assert worst <= 1e-10, f"max deviation {worst:.3e}"
    assert elapsed < 10.0, f"runtime {elapsed:.2f}s"
    return f"max dev {worst:.2e}, {elapsed:.2f}s (oracle included)"


@criterion(2, "mass conservation at every sweep (1e-9)")
def test_c02_mass_conservation():
    worst = 0.0
    sweeps = 0
    for seed in range(100):
        X, Y = random_instance(seed, max_users=50, max_locations=30)
        ops = normalize(*networks_from_dense(X, Y), "uniform")
        deviations = []
        solve(ops, callback=lambda _, e, k: deviations.append(max(abs(e.sum() - 1), abs(k.sum() - 1))))
        _, _, _, history = literal_fixed_point(X, Y)
        deviations += [max(abs(se - 1), abs(sk - 1)) for se, sk in history]
        worst = max(worst, max(deviations))
        sweeps += len(history)
    assert worst <= 1e-9, f"max mass error {worst:.3e}"
    return f"max |sum-1| {worst:.2e} over {sweeps} sweeps"


@criterion(3, "1,000-user / 500-location city converges within 50 sweeps in < 5 s")
def test_c03_convergence_on_large_city(caplog):
    spec = SynthSpec(n_users=1000, n_locations=500, n_hubs=100, n_social_venues=50)
    city = generate_synthetic(spec, 0)
    social, ul = build_networks(city.checkins, city.follows)
    started = time.perf_counter()
    with caplog.at_level(logging.INFO, logger="locsoc.solver"):
        kappa, _ = compute_sociality(social, ul)
    elapsed = time.perf_counter() - started
    assert kappa.converged and kappa.iterations_used <= 50, f"{kappa.iterations_used} sweeps"
    assert any("converged after" in r.getMessage() for r in caplog.records)
    assert elapsed < 5.0, f"{elapsed:.2f}s"
    return f"{kappa.iterations_used} sweeps on {len(ul.users)}x{len(ul.locations)}, {elapsed:.3f}s"


@criterion(4, "symmetry fixtures: single location kappa=(1), two locations kappa=(0.5,0.5)")
def test_c04_symmetry_fixtures():
    friends = [[0, 1], [1, 0]]
    one, _ = compute_sociality(*networks_from_dense(friends, [[1], [1]]))
    two, _ = compute_sociality(*networks_from_dense(friends, [[1, 0], [0, 1]]))
    assert abs(one.values[0] - 1.0) <= 1e-12
    assert np.abs(two.values - 0.5).max() <= 1e-12
    return f"kappa={one.values.tolist()} and {two.values.tolist()}"


@criterion(5, "entropy fixtures: ln 4, 0, and the (3,1) split")
def test_c05_entropy_fixtures():
    def ent(col):
        _, ul = networks_from_dense(np.zeros((len(col), len(col))), np.array([col]).T)
        return location_entropy(ul).values[0]

    direct = -(0.75 * np.log(0.75) + 0.25 * np.log(0.25))
    assert abs(ent([5, 5, 5, 5]) - np.log(4)) <= 1e-12
    assert ent([7]) == 0.0
    assert abs(ent([3, 1]) - direct) <= 1e-12
    return f"(3,1) -> {ent([3, 1]):.6f}"


@criterion(6, "trapezoid AUC equals Mann-Whitney on 1,000 random sets (1e-12)")
def test_c06_auc_dual_definition():
    rng = np.random.default_rng(2024)
    worst = 0.0
    done = 0
    while done < 1000:
        n = int(rng.integers(2, 200))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            continue
        # coarse rounding on half the sets forces many ties
        scores = rng.random(n)
        if done % 2:
            scores = np.round(scores * rng.integers(1, 6)) / 5
        worst = max(worst, abs(auc_trapezoid(scores, labels) - auc_mann_whitney(scores, labels)))
        done += 1
    assert worst <= 1e-12, f"max gap {worst:.3e}"
    return f"max gap {worst:.1e}"


@criterion(7, "planted friendships: sociality LR beats common-count baseline; combined >= entropy")
def test_c07_friendship_signal_recovery():
    base, soc, ent, comb = [], [], [], []
    for seed in range(N_PLANTED_SEEDS):
        city = generate_synthetic(SynthSpec(), seed)
        social, ul = build_networks(city.checkins, city.follows)
        kappa, _ = compute_sociality(social, ul)
        entropy = location_entropy(ul)
        pairs = build_pairs(social, ul, seed)
        base.append(baseline_common_count(pairs).auc)
        auc = {m: evaluate(pairs, kappa, entropy, m, seed=seed).mean_auc for m in MODES}
        soc.append(auc["sociality"])
        ent.append(auc["entropy"])
        comb.append(auc["combined"])
    means = [float(np.mean(v)) for v in (base, soc, ent, comb)]
    detail = "baseline {:.3f}, sociality {:.3f}, entropy {:.3f}, combined {:.3f}".format(*means)
    assert means[1] > means[0], detail
    assert means[3] >= means[2], detail
    return detail


@criterion(8, "RWR single user/location = (1/1.85, 0.85/1.85); target relevance >= c")
def test_c08_rwr_analytic():
    _, ul = networks_from_dense([[0]], [[3]])
    r = personalize_and_walk(build_walk_graph(ul, None), "u0")
    assert np.abs(r - [1 / 1.85, 0.85 / 1.85]).max() <= 1e-9
    checked = 0
    for seed in range(30):
        _, Y = random_instance(seed)
        _, ul = networks_from_dense(np.zeros((Y.shape[0],) * 2), Y)
        for c in (0.05, 0.15, 0.5, 0.95):
            cfg = RwrConfig(restart_probability=c)
            g = build_walk_graph(ul, None, cfg)
            for u in g.users[:3]:
                rel = personalize_and_walk(g, u, cfg)
                assert rel[g.user_index(u)] >= c - 1e-9
                assert abs(rel.sum() - 1) <= 1e-9
                checked += 1
    return f"relevance={np.round(r, 6).tolist()}, {checked} restart bounds checked"


@criterion(9, "uniform sociality makes weighted and plain transition matrices identical (1e-12)")
def test_c09_weighting_equivalence():
    worst = 0.0
    for seed in range(20):
        _, Y = random_instance(seed)
        _, ul = networks_from_dense(np.zeros((Y.shape[0],) * 2), Y)
        level = float(np.random.default_rng(seed).uniform(0.01, 0.99))
        flat = Scores(ul.locations, np.full(len(ul.locations), level))
        target = ul.users[0]
        plain = build_walk_graph(ul, None).personalized(target, 0.15)
        weighted = build_walk_graph(ul, flat, RwrConfig(weighting="sociality")).personalized(target, 0.15)
        worst = max(worst, float(np.abs(plain - weighted).max()))
    assert worst <= 1e-12, f"max gap {worst:.3e}"
    return f"max gap {worst:.1e}"


@criterion(10, "planted streams: sociality-weighted recall@10 >= plain (paired, 20 seeds)")
def test_c10_recommendation_signal_recovery():
    plain, weighted = [], []
    for seed in range(N_PLANTED_SEEDS):
        city = generate_synthetic(SynthSpec(), seed)
        run = evaluate_windows(city.checkins, city.follows)
        recall = {r.weighting: r.recall for r in run.reports if not r.skipped}
        plain.append(recall["plain"])
        weighted.append(recall["sociality"])
    p, w = float(np.mean(plain)), float(np.mean(weighted))
    wins = sum(b >= a for a, b in zip(plain, weighted))
    detail = f"plain {p:.4f}, sociality {w:.4f}, sociality >= plain in {wins}/{len(plain)} seeds"
    assert w >= p, detail
    return detail


@criterion(11, "every CLI subcommand twice on the bundled fixture gives byte-identical outputs")
def test_c11_cli_determinism(tmp_path):
    from locsoc.cli import main

    commands = {
        "solve": [],
        "metrics": [],
        "friendship": [],
        "recommend": [],
        "synth": ["--users", "80", "--n-locations", "40", "--hubs", "8", "--social-venues", "6"],
    }
    compared = 0
    for name, extra in commands.items():
        snapshots = []
        for tag in ("a", "b"):
            out = tmp_path / f"{name}_{tag}"
            argv = [name, "--out", str(out), "--seed", "5", *extra]
            if name != "synth":
                argv += ["--fixture", "city"]
            assert main(argv) == 0, f"{name} exited nonzero"
            snapshots.append({p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "run.json"})
        assert snapshots[0] == snapshots[1], f"{name} outputs differ"
        compared += len(snapshots[0])
    return f"{compared} files compared across {len(commands)} subcommands"


if __name__ == "__main__":
    import sys

    import pytest

    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
