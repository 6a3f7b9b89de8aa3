"""Command-line entry point: single runs and probe-period sweeps."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import CONTROLLERS, OBSERVERS, ScenarioConfig, load_config, parse_number
from .harness import SimulationAborted, epsilon_sweep, export_csv, scenario_metrics, simulate

log = logging.getLogger("maglev_drem")


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.observer is not None:
        cfg = cfg.with_observer(args.observer)
    if args.controller is not None:
        cfg = cfg.with_controller(args.controller)
    if args.duration is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, duration=args.duration))
    return cfg


def _epsilon_list(text: str) -> list[float]:
    try:
        values = [parse_number(v) for v in text.replace(" ", "").split(",") if v]
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}: {exc}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("epsilon values must be positive")
    return values


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def cmd_sim(args) -> int:
    cfg = _scenario(args)
    try:
        traj = simulate(cfg)
    except SimulationAborted as exc:
        if args.out:
            export_csv(exc.log, args.out)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        export_csv(traj, args.out)
        log.info("wrote %d samples to %s", len(traj), args.out)
    metrics = scenario_metrics(cfg, traj)
    for p in metrics.plateaus:
        print(f"plateau {p.index}  q*={p.q_star:.4g}  |q-q*|={p.tracking:.3e}  "
              f"|qhat-q|={p.position_hat:.3e}  |x1hat-x1|={p.flux:.3e}  "
              f"|x3hat-x3|={p.momentum:.3e}  |Rhat-R|={p.resistance:.3e}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _scenario(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def save(eps, traj):
        export_csv(traj, out_dir / f"run_eps_{eps:.6g}.csv")

    result = epsilon_sweep(cfg, args.epsilon, on_log=save)
    report = {
        "epsilon": result.epsilons,
        "runs": result.table(),
        "slopes": result.slopes,
        "regression_residual": result.regression_residuals,
        "regression_residual_slope": result.regression_slope,
        "degenerate": result.degenerate,
    }
    with open(out_dir / "sweep.json", "w") as fh:
        json.dump(report, fh, indent=2, default=float)
    for row in result.table():
        print(row)
    print("slopes:", {k: round(v, 3) for k, v in result.slopes.items()})
    if result.degenerate:
        print("warning: fewer than two distinct epsilon values; slopes are undefined",
              file=sys.stderr)
    failed = [e for e in result.errors if e is not None]
    for msg in failed:
        print(f"error: {msg}", file=sys.stderr)
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML scenario file (defaults built in)")
    common.add_argument("--seed", type=_u64, help="override the noise seed")
    common.add_argument("--observer", choices=OBSERVERS)
    common.add_argument("--controller", choices=CONTROLLERS)
    common.add_argument("--duration", type=float, help="override the simulated time (s)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="maglev-drem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sim", parents=[common], help="run one scenario")
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_sim)
    p = sub.add_parser("sweep", parents=[common], help="run a probe-period sweep")
    p.add_argument("--epsilon", type=_epsilon_list, required=True,
                   help="comma-separated probe periods, fractions allowed (1/150,1/300)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
