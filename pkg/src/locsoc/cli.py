"""Command-line entry point: ``locsoc {solve,metrics,friendship,recommend,synth}``.

Settings come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then command-line flags. Every command writes
its artifacts plus a ``run.json`` manifest into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import asdict
from importlib import metadata, resources
from pathlib import Path

import numpy as np
import scipy

from . import artifacts
from .friendship import MODES, SamplingError, baseline_common_count, build_pairs, evaluate, feature_rows
from .ingest import (
    EmptyAfterFilteringError, FilterConfig, InputError, build_networks, parse_checkins, parse_follows,
    parse_locations, write_checkins, write_follows, write_locations,
)
from .metrics import (
    InsufficientDataError, category_summary, grid_correlation, grid_heatmap, histogram, location_entropy,
    rating_regression,
)
from .recommend import WEIGHTINGS, RwrConfig, WalkConvergenceError, evaluate_windows
from .solver import NumericError, SocialityScores, SolverConfig, ZeroColumnError, normalize, solve
from .synth import SynthSpec, generate_synthetic

logger = logging.getLogger("locsoc")

FIXTURES = ("toy", "city")

# key -> (type, default); lists use "a,b" in config files
DEFAULTS = {
    "checkins": (str, None),
    "follows": (str, None),
    "locations": (str, None),
    "fixture": (str, None),
    "out": (str, "out"),
    "alpha": (float, 0.5),
    "tolerance": (float, 1e-5),
    "max_iterations": (int, 200),
    "zero_column_policy": (str, "uniform"),
    "min_user_checkins": (int, 20),
    "min_location_checkins": (int, 10),
    "trim_fraction": (float, 0.05),
    "seed": (int, 0),
    "bins": (int, 20),
    "cell_size": (float, 0.01),
    "log_histogram": (bool, True),
    "mode": (str, "sociality"),
    "repetitions": (int, 10),
    "split": (float, 0.7),
    "restart_prob": (float, 0.15),
    "rwr_tolerance": (float, 1e-8),
    "weighting": (list, list(WEIGHTINGS)),
    "window_days": (int, 60),
    "stride_days": (int, None),
    "k": (int, 10),
    "window_min_user_checkins": (int, 5),
    "window_min_location_checkins": (int, 3),
    "precision_denominator": (str, "k"),
    "users": (int, 200),
    "n_locations": (int, 100),
    "hubs": (int, 20),
    "social_venues": (int, 10),
}


class UsageError(Exception):
    pass


def _coerce(key: str, raw: str):
    kind = DEFAULTS[key][0]
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {key!r}: expected a boolean, got {raw!r}")
    if kind is list:
        return [v.strip() for v in raw.split(",") if v.strip()]
    try:
        return kind(raw.strip())
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {raw!r}") from None


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, keys use ``_`` or ``-``."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"cannot read {path}: no such file")
    out = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("inputs and outputs")
    g.add_argument("--config", help="flat key = value config file")
    g.add_argument("--checkins")
    g.add_argument("--follows")
    g.add_argument("--locations")
    g.add_argument("--fixture", choices=FIXTURES, help="use a bundled dataset instead of input paths")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int)
    g.add_argument("-v", "--verbose", action="count", default=0)
    f = common.add_argument_group("filtering")
    f.add_argument("--min-user-checkins", type=int)
    f.add_argument("--min-location-checkins", type=int)
    f.add_argument("--trim-fraction", type=float)
    s = common.add_argument_group("solver")
    s.add_argument("--alpha", type=float)
    s.add_argument("--tolerance", type=float)
    s.add_argument("--max-iterations", type=int)
    s.add_argument("--zero-column-policy", choices=("uniform", "self-loop", "drop-node"))

    parser = argparse.ArgumentParser(prog="locsoc", description="Location sociality toolkit: solve, describe and run the two experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="compute sociality and influence")
    m = sub.add_parser("metrics", parents=[common], help="entropy, categories, regression, histogram, heatmap")
    m.add_argument("--bins", type=int)
    m.add_argument("--cell-size", type=float)
    m.add_argument("--no-log", dest="log_histogram", action="store_const", const=False)
    m.add_argument("--sociality", help="precomputed sociality.csv (skips solving)")
    fr = sub.add_parser("friendship", parents=[common], help="friendship prediction experiment")
    fr.add_argument("--mode", choices=MODES)
    fr.add_argument("--repetitions", type=int)
    fr.add_argument("--split", type=float)
    rc = sub.add_parser("recommend", parents=[common], help="new-location recommendation experiment")
    rc.add_argument("--weighting", action="append", choices=WEIGHTINGS)
    rc.add_argument("--restart-prob", type=float)
    rc.add_argument("--rwr-tolerance", type=float)
    rc.add_argument("--window-days", type=int)
    rc.add_argument("--stride-days", type=int)
    rc.add_argument("--k", type=int)
    rc.add_argument("--window-min-user-checkins", type=int)
    rc.add_argument("--window-min-location-checkins", type=int)
    rc.add_argument("--precision-denominator", choices=("k", "length"))
    sy = sub.add_parser("synth", parents=[common], help="write a planted synthetic city")
    sy.add_argument("--users", type=int)
    sy.add_argument("--n-locations", type=int)
    sy.add_argument("--hubs", type=int)
    sy.add_argument("--social-venues", type=int)
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = {k: v for k, (_, v) in DEFAULTS.items()}
    if args.config:
        settings.update(read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _fixture_dir(name: str) -> Path:
    return Path(str(resources.files("locsoc") / "data" / name))


def _input_paths(settings: dict, need_locations: bool = False) -> dict[str, Path | None]:
    paths = {}
    fixture = settings.get("fixture")
    for key in ("checkins", "follows", "locations"):
        value = settings.get(key)
        if value is None and fixture:
            value = _fixture_dir(fixture) / f"{key}.csv"
        if value is None:
            if key == "locations" and not need_locations:
                paths[key] = None
                continue
            raise UsageError(f"missing --{key} (or --fixture)")
        p = Path(value)
        if not p.is_file():
            raise InputError(f"cannot read {p}: no such file")
        paths[key] = p
    return paths


def _load(paths: dict):
    checkins = parse_checkins(paths["checkins"])
    follows = parse_follows(paths["follows"])
    metas = parse_locations(paths["locations"]) if paths.get("locations") else None
    parse_stats = {"checkins_skipped": checkins.skipped, "follows_skipped": follows.skipped}
    if metas is not None:
        parse_stats["locations_skipped"] = metas.skipped
    return checkins.records, follows.records, (metas.records if metas else []), parse_stats


def _filter_config(settings) -> FilterConfig:
    return FilterConfig(settings["min_user_checkins"], settings["min_location_checkins"], settings["trim_fraction"])


def _solver_config(settings) -> SolverConfig:
    return SolverConfig(settings["alpha"], settings["tolerance"], settings["max_iterations"],
                        settings["zero_column_policy"])


def _solve(settings, checkins, follows):
    social, ul = build_networks(checkins, follows, _filter_config(settings))
    config = _solver_config(settings)
    kappa, eta = solve(normalize(social, ul, config.zero_column_policy), config)
    diagnostics = {
        "users": len(ul.users),
        "locations": len(ul.locations),
        "friendships": social.n_edges,
        "iterations": kappa.iterations_used,
        "converged": kappa.converged,
    }
    return social, ul, kappa, eta, diagnostics


def cmd_solve(settings, out: Path) -> dict:
    paths = _input_paths(settings)
    checkins, follows, _, parse_stats = _load(paths)
    _, _, kappa, eta, diag = _solve(settings, checkins, follows)
    artifacts.write_scores(out / "sociality.csv", "location_id", "sociality", kappa)
    artifacts.write_scores(out / "influence.csv", "user_id", "influence", eta)
    return {"inputs": paths, "diagnostics": {**parse_stats, **diag},
            "outputs": ["sociality.csv", "influence.csv"]}


def cmd_metrics(settings, out: Path, sociality_path: str | None = None) -> dict:
    paths = _input_paths(settings, need_locations=True)
    checkins, follows, metas, parse_stats = _load(paths)
    social, ul, kappa, _, diag = _solve(settings, checkins, follows)
    if sociality_path:
        lookup = artifacts.read_scores(Path(sociality_path))
        missing = [l for l in ul.locations if l not in lookup]
        if missing:
            raise InputError(f"{sociality_path} lacks scores for {len(missing)} surviving locations")
        kappa = SocialityScores(ul.locations, np.array([lookup[l] for l in ul.locations]))
    entropy = location_entropy(ul)
    artifacts.write_scores(out / "entropy.csv", "location_id", "entropy", entropy)
    artifacts.write_csv(out / "categories.csv", ("category", "mean_sociality", "count"),
                        category_summary(kappa, metas))
    try:
        regression = rating_regression(kappa, metas).to_json()
    except InsufficientDataError as exc:
        regression = {"error": "insufficient data", "detail": str(exc)}
    artifacts.write_json(out / "regression.json", regression)
    artifacts.write_csv(out / "histogram.csv", ("bin_low", "bin_high", "count"),
                        histogram(kappa, settings["bins"], settings["log_histogram"]))
    heat_s = grid_heatmap(kappa, metas, settings["cell_size"])
    heat_e = grid_heatmap(entropy, metas, settings["cell_size"])
    artifacts.write_json(out / "heatmap.geojson", heat_s.to_geojson())
    artifacts.write_json(out / "heatmap_entropy.geojson", heat_e.to_geojson())
    rho = grid_correlation(heat_s, heat_e)
    # undefined with fewer than two cells or a constant grid
    diag["heatmap_spearman"] = rho if np.isfinite(rho) else None
    return {"inputs": paths, "diagnostics": {**parse_stats, **diag},
            "outputs": ["entropy.csv", "categories.csv", "regression.json", "histogram.csv",
                        "heatmap.geojson", "heatmap_entropy.geojson"]}


def cmd_friendship(settings, out: Path) -> dict:
    paths = _input_paths(settings)
    checkins, follows, _, parse_stats = _load(paths)
    social, ul, kappa, _, diag = _solve(settings, checkins, follows)
    entropy = location_entropy(ul)
    seed = settings["seed"]
    pairs = build_pairs(social, ul, seed)
    report = evaluate(pairs, kappa, entropy, settings["mode"], settings["split"],
                      settings["repetitions"], seed)
    baseline = baseline_common_count(pairs)
    payload = report.to_json()
    payload["baseline_common_count_auc"] = baseline.auc
    payload["pairs"] = {"positive": sum(p.label for p in pairs), "negative": sum(1 - p.label for p in pairs)}
    payload["config"] = {k: settings[k] for k in ("mode", "split", "repetitions", "seed")}
    artifacts.write_json(out / "eval.json", payload)
    header = ("user_a", "user_b", "label", "common_count", "soc_avg", "soc_max", "soc_min", "soc_std",
              "ent_avg", "ent_max", "ent_min", "ent_std")
    artifacts.write_csv(out / "features.csv", header,
                        ([row[h] for h in header] for row in feature_rows(pairs, kappa, entropy)))
    diag["mean_auc"] = report.mean_auc
    return {"inputs": paths, "diagnostics": {**parse_stats, **diag}, "outputs": ["eval.json", "features.csv"]}


def cmd_recommend(settings, out: Path) -> dict:
    paths = _input_paths(settings)
    checkins, follows, _, parse_stats = _load(paths)
    weightings = list(dict.fromkeys(settings["weighting"]))
    rwr = RwrConfig(settings["restart_prob"], settings["rwr_tolerance"],
                    precision_denominator=settings["precision_denominator"])
    window_filter = FilterConfig(settings["window_min_user_checkins"],
                                 settings["window_min_location_checkins"], settings["trim_fraction"])
    run = evaluate_windows(checkins, follows, window_filter, rwr, _solver_config(settings),
                           settings["window_days"], settings["k"], weightings, settings["stride_days"])
    payload = {
        "k": settings["k"],
        "windows": [r.to_json() for r in run.reports],
        "config": {k: settings[k] for k in ("restart_prob", "rwr_tolerance", "window_days", "stride_days",
                                            "k", "window_min_user_checkins", "window_min_location_checkins",
                                            "precision_denominator", "trim_fraction", "alpha")},
        "weightings": weightings,
    }
    artifacts.write_json(out / "rec_eval.json", payload)
    artifacts.write_csv(out / "recommendations.csv",
                        ("window_start", "weighting", "user_id", "rank", "location_id", "relevance"),
                        run.recommendations)
    evaluated = [r for r in run.reports if not r.skipped]
    return {"inputs": paths, "diagnostics": {**parse_stats, "windows": len(run.reports) // max(len(weightings), 1),
                                             "evaluated_reports": len(evaluated)},
            "outputs": ["rec_eval.json", "recommendations.csv"]}


def cmd_synth(settings, out: Path) -> dict:
    spec = SynthSpec(n_users=settings["users"], n_locations=settings["n_locations"],
                     n_hubs=settings["hubs"], n_social_venues=settings["social_venues"])
    city = generate_synthetic(spec, settings["seed"])
    write_checkins(out / "checkins.csv", city.checkins)
    write_follows(out / "follows.csv", city.follows)
    write_locations(out / "locations.csv", city.locations)
    artifacts.write_csv(out / "planted.csv", ("kind", "token"),
                        [("hub", t) for t in sorted(city.hubs)] +
                        [("social_venue", t) for t in sorted(city.social_venues)])
    return {"inputs": {}, "diagnostics": {"spec": asdict(spec), "checkins": len(city.checkins)},
            "outputs": ["checkins.csv", "follows.csv", "locations.csv", "planted.csv"]}


COMMANDS = {
    "solve": cmd_solve,
    "metrics": cmd_metrics,
    "friendship": cmd_friendship,
    "recommend": cmd_recommend,
    "synth": cmd_synth,
}


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"locsoc": pkg, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _error(kind: str, exc: BaseException, out: Path | None, code: int) -> int:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_status": code}
    threshold = getattr(exc, "threshold", None)
    if threshold:
        payload["threshold"] = threshold
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    if out is not None and out.is_dir():
        artifacts.write_json(out / "error.json", payload)
    return code


INPUT_ERRORS = (InputError, UsageError, EmptyAfterFilteringError, SamplingError, ZeroColumnError, FileNotFoundError)
NUMERIC_ERRORS = (NumericError, WalkConvergenceError, ArithmeticError)


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    out = None
    try:
        settings = resolve_settings(args)
        out = Path(settings["out"])
        out.mkdir(parents=True, exist_ok=True)
        started = time.time()
        if args.command == "metrics":
            result = cmd_metrics(settings, out, args.sociality)
        else:
            result = COMMANDS[args.command](settings, out)
        wall = time.time() - started
        inputs = {k: {"path": str(p), "sha256": artifacts.sha256_file(p)}
                  for k, p in result["inputs"].items() if p is not None}
        config_echo = {k: settings[k] for k in sorted(settings)}
        manifest = {
            "command": args.command,
            "config": config_echo,
            "config_hash": artifacts.sha256_json(config_echo),
            "inputs": inputs,
            "versions": _versions(),
            "diagnostics": result["diagnostics"],
            "outputs": result["outputs"],
            "timing": {"started_at": started, "wall_seconds": wall},
        }
        artifacts.write_json(out / "run.json", manifest)
    except INPUT_ERRORS as exc:
        return _error("input", exc, out, 2)
    except NUMERIC_ERRORS as exc:
        return _error("numeric", exc, out, 1)
    except ValueError as exc:
        return _error("input", exc, out, 2)
    except Exception as exc:  # noqa: BLE001 - surfaced as machine-readable error
        logger.exception("internal error")
        return _error("internal", exc, out, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
