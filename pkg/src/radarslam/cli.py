"""Command line: ``radarslam run | montecarlo | validate``.

Scenario arguments are TOML paths or the names of bundled scenarios
(``low_clutter``, ``high_clutter``, ``clutter_burst``).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import io as rio
from .metrics import evaluate_run, monte_carlo
from .scenario import BUNDLED, ScenarioError, ScenarioFile, bundled_scenario, load_scenario
from .slam import StepError, run

EXIT_OK = 0
EXIT_SCENARIO = 1
EXIT_NUMERICAL = 3


def _load(arg: str) -> ScenarioFile:
    path = Path(arg)
    if not path.exists() and arg in BUNDLED:
        return bundled_scenario(arg)
    if not path.exists():
        raise ScenarioError(f"no such file (bundled: {', '.join(BUNDLED)})", field=arg)
    return load_scenario(path)


def _steps(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated step indices, got {text!r}") from None


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float) and math.isnan(x):
        return "n/a"
    return f"{x:.3f}" if isinstance(x, float) else str(x)


def cmd_run(args) -> int:
    sf = _load(args.scenario)
    seed = sf.seeds[0] if args.seed is None else args.seed
    n = sf.scene.steps
    bad = [k for k in args.snapshots if not 0 <= k < n]
    if bad:
        print(f"error: snapshot steps {bad} outside 0..{n - 1}", file=sys.stderr)
        return EXIT_SCENARIO
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        res = run(sf.scene, sf.slam, seed, keep_frames=bool(args.snapshots))
    except StepError as exc:
        print(f"error: numerical failure at step {exc.k}: {exc.cause}", file=sys.stderr)
        return EXIT_NUMERICAL

    written = [rio.write_log(res.logs, out / "log.csv")]
    if args.snapshots:
        written.append(rio.write_snapshots(res.logs, res.frames, sf.scene, args.snapshots, out / "snapshots.csv"))
        if not args.no_plots:
            from .plotting import snapshot_figure
            written.append(snapshot_figure(sf.scene, res.logs, res.frames, args.snapshots, out / "snapshots.png"))

    m = evaluate_run(res, sf.scene, sf.match_radius)
    last = res.logs[-1]
    err = math.dist(last.posterior_pose[:2], res.truth[-1][:2])
    print(f"scenario {sf.name}  seed {seed}  steps {len(res.logs)}")
    print(f"final position error {err:.6g} m, landmarks {len(last.landmark_ids)}")
    print(f"position RMSE {_fmt(m.platform_position_rmse)} m, heading RMSE {_fmt(m.platform_heading_rmse)} deg, "
          f"landmark MAE {_fmt(m.landmark_mae)} m")
    print(f"false {m.false_landmark_count}, missed {m.missed_landmark_count}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    scenarios = [_load(s) for s in args.scenarios]
    names = [sf.name for sf in scenarios]
    if len(set(names)) != len(names):
        print(f"error: scenario names must be distinct, got {names}", file=sys.stderr)
        return EXIT_SCENARIO
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summaries = {}
    for sf in scenarios:
        runs = len(sf.seeds) if args.runs is None else args.runs
        seeds = list(sf.seeds) if runs <= len(sf.seeds) else list(range(runs))
        try:
            summary = monte_carlo(sf.scene, sf.slam, runs, seeds, sf.match_radius, args.workers)
        except StepError as exc:
            print(f"error: {sf.name}: numerical failure at step {exc.k}: {exc.cause}", file=sys.stderr)
            return EXIT_NUMERICAL
        summaries[sf.name] = summary
        rio.write_run_metrics(summary, out / f"runs_{sf.name}.csv")

    rio.write_summary(summaries, out / "summary.csv")
    if not args.no_plots:
        from .plotting import metrics_figure
        metrics_figure(summaries, out / "metrics.png")

    width = max(len(n) for n in names)
    print(f"{'metric':<32}" + "".join(f"{n:>{max(width, 14) + 2}}" for n in names))
    rows = {n: s.rows() for n, s in summaries.items()}
    for i, (metric, _, _) in enumerate(rows[names[0]]):
        cells = []
        for n in names:
            _, mean, mx = rows[n][i]
            cells.append(_fmt(mean) if mx is None else f"{_fmt(mean)} ({int(mx)})")
        print(f"{metric:<32}" + "".join(f"{c:>{max(width, 14) + 2}}" for c in cells))
    print(f"wrote {out / 'summary.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    status = EXIT_OK
    for s in args.scenarios:
        try:
            sf = _load(s)
        except (ScenarioError, OSError) as exc:
            print(f"{s}: invalid: {exc}", file=sys.stderr)
            status = EXIT_SCENARIO
            continue
        sc = sf.scene
        print(f"{s}: ok ({sf.name}: {sc.steps} steps, {len(sc.vehicles)} vehicles, "
              f"{len(sc.clutter_bursts)} bursts, {len(sf.seeds)} seeds)")
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radarslam", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate and filter one seeded run")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int, default=None, help="defaults to the first seed of the scenario")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--snapshots", type=_steps, default=[], metavar="K1,K2,...",
                   help="steps to export as snapshot tables and figure panels")
    r.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("montecarlo", help="batch of seeded runs with aggregate metrics")
    m.add_argument("scenarios", nargs="+")
    m.add_argument("--runs", type=int, default=None, help="defaults to the scenario's seed count")
    m.add_argument("--out", default="out", help="output directory (default: out)")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    m.set_defaults(func=cmd_montecarlo)

    v = sub.add_parser("validate", help="parse scenarios and report problems")
    v.add_argument("scenarios", nargs="+")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "runs", None) is not None and args.runs < 1:
        print("error: --runs must be at least 1", file=sys.stderr)
        return EXIT_SCENARIO
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
