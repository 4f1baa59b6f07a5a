"""Command-line entry point for scenario runs, claim checks, sweeps, campaigns and plots."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InfeasibleError,
    IntegrationError,
    ScenarioParseError,
)
from .experiments import monte_carlo, run_scenario
from .integrator import Trajectory
from .io import load_scenario, plot_svg, read_trajectory_columns, write_report_json, write_trajectory_csv

logger = logging.getLogger("thermokuramoto")

EXIT_PASS, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_ERROR = 0, 1, 2, 3


@dataclass
class RunConfig:
    scenario_path: Optional[Path]
    out_dir: Optional[Path] = None
    overrides: List[str] = field(default_factory=list)
    plot_channels: List[str] = field(default_factory=list)
    log_scale: bool = False
    verbosity: int = 0

    def prepare_out_dir(self) -> Optional[Path]:
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(self.out_dir, os.W_OK):
            raise OSError(13, "output directory is not writable", str(self.out_dir))
        return self.out_dir


def _csv_list(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _write_outputs(cfg: RunConfig, result, report, stem: str = "") -> None:
    out = cfg.prepare_out_dir()
    if out is None:
        return
    trajs = [result] if isinstance(result, Trajectory) else list(result)
    suffixes = [""] if len(trajs) == 1 else ["_a", "_b"]
    for traj, sfx in zip(trajs, suffixes):
        write_trajectory_csv(traj, out / f"{stem}trajectory{sfx}.csv")
        if cfg.plot_channels and traj.kind != "tcs":
            plot_svg(traj, cfg.plot_channels, out / f"{stem}plot{sfx}.svg", log_scale=cfg.log_scale)
    write_report_json(report, out / f"{stem}report.json")


def _print_report(report) -> None:
    print(f"scenario {report.scenario_name}  hash {report.scenario_hash[:12]}  seed {report.seed}")
    for v in report.verdicts:
        status = "PASS" if v.passed else "FAIL"
        op = "<=" if v.comparison == "le" else ">="
        print(f"  [{status}] {v.claim_id}: measured {v.measured:.6g} {op} {v.bound:.6g} "
              f"(tol {v.tolerance:.1e})  {v.notes}")
    for group, items in report.findings.items():
        for key, value in items.items():
            if isinstance(value, float):
                print(f"  finding {group}.{key} = {value:.6g}")
    if not report.verdicts and not report.findings:
        print("  no claims requested")


def cmd_run(args: argparse.Namespace, claims: Optional[List[str]] = None) -> int:
    overrides = list(args.set or [])
    if claims is not None:
        overrides.append("claims.ids=[" + ", ".join(f'"{c}"' for c in claims) + "]")
    cfg = RunConfig(Path(args.scenario), Path(args.out) if args.out else None, overrides,
                    _csv_list(args.plot) if args.plot else [], args.log, args.verbose)
    scenario = load_scenario(cfg.scenario_path, cfg.overrides)
    result, report = run_scenario(scenario)
    _print_report(report)
    _write_outputs(cfg, result, report)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_verify(args: argparse.Namespace) -> int:
    return cmd_run(args, claims=_csv_list(args.claims))


def cmd_sweep(args: argparse.Namespace) -> int:
    values = _csv_list(args.values)
    out = Path(args.out) if args.out else None
    worst = EXIT_PASS
    rows = []
    for value in values:
        overrides = list(args.set or []) + [f"{args.param}={value}"]
        scenario = load_scenario(args.scenario, overrides)
        try:
            result, report = run_scenario(scenario)
        except InfeasibleError as exc:
            print(f"{args.param}={value}: infeasible ({exc})")
            rows.append({"value": value, "infeasible": str(exc)})
            worst = max(worst, EXIT_INFEASIBLE)
            continue
        status = "PASS" if report.passed else "FAIL"
        print(f"{args.param}={value}: {status}")
        for v in report.verdicts:
            print(f"    {v.claim_id}: {v.measured:.6g} (bound {v.bound:.6g}) {'ok' if v.passed else 'fail'}")
        rows.append({"value": value, "report": report.to_dict()})
        if not report.passed:
            worst = max(worst, EXIT_FAIL)
        if out is not None:
            cfg = RunConfig(None, out)
            safe = value.replace("/", "_")
            _write_outputs(cfg, result, report, stem=f"{args.param}={safe}_")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_report_json({"param": args.param, "runs": rows}, out / "sweep.json")
    return worst


def cmd_montecarlo(args: argparse.Namespace) -> int:
    report = monte_carlo(args.claim, args.trials, args.seed, workers=args.workers)
    d = report.to_dict()
    print(f"claim {report.claim_id} (family {report.family}): {report.n_trials} trials, seed {report.seed}")
    for claim, summ in d["claims"].items():
        print(f"  {claim}: pass rate {summ['pass_rate']}, worst margin {summ['worst_margin']}, "
              f"failures {summ['failures']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_report_json(report, out / f"montecarlo_{report.claim_id}_{report.seed}.json")
    if report.n_trials == 0:
        return EXIT_PASS
    return EXIT_PASS if report.pass_rate == 1.0 else EXIT_FAIL


def cmd_plot(args: argparse.Namespace) -> int:
    cols = read_trajectory_columns(args.trajectory)
    target = Path(args.out) if args.out else Path(args.trajectory).with_suffix(".svg")
    plot_svg(cols, _csv_list(args.channels), target, log_scale=args.log)
    print(f"wrote {target}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermokuramoto", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("scenario", help="scenario TOML file")
        p.add_argument("--out", help="directory for trajectory CSV, report JSON and plots")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario field, e.g. model.kappa1=2.0 (repeatable)")
        p.add_argument("--plot", metavar="CHANNELS", help="comma-separated channels to plot as SVG")
        p.add_argument("--log", action="store_true", help="log-scale y axis for plots")

    p_run = sub.add_parser("run", help="integrate a scenario and check its claims")
    scenario_args(p_run)
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="run a scenario against an explicit claim list")
    scenario_args(p_ver)
    p_ver.add_argument("--claims", required=True, help="comma-separated claim ids")
    p_ver.set_defaults(func=cmd_verify)

    p_sw = sub.add_parser("sweep", help="rerun a scenario over values of one field")
    p_sw.add_argument("scenario")
    p_sw.add_argument("--param", required=True, help="field to vary, e.g. model.kappa2")
    p_sw.add_argument("--values", required=True, help="comma-separated values")
    p_sw.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_sw.add_argument("--out")
    p_sw.set_defaults(func=cmd_sweep)

    p_mc = sub.add_parser("montecarlo", help="random campaign inside a claim's framework")
    p_mc.add_argument("claim", help="claim id or family name")
    p_mc.add_argument("--trials", type=int, required=True)
    p_mc.add_argument("--seed", type=int, required=True)
    p_mc.add_argument("--workers", type=int, default=1)
    p_mc.add_argument("--out")
    p_mc.set_defaults(func=cmd_montecarlo)

    p_pl = sub.add_parser("plot", help="plot channels from a trajectory CSV")
    p_pl.add_argument("trajectory")
    p_pl.add_argument("--channels", required=True, help="comma-separated channels (theta, temp, entropy, ...)")
    p_pl.add_argument("--log", action="store_true")
    p_pl.add_argument("--out", help="SVG path (default: next to the CSV)")
    p_pl.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ConfigError, DomainError, IntegrationError, ConvergenceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
