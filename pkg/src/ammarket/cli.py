"""Command-line entry point and output-file writers.

Exit codes: 0 success (a Failed or NotConverged bargain is still a success,
reported by status), 1 domain failure (solver breakdown, non-convergence of
the spot fixed point, infeasible delivery), 2 configuration errors.

Every CSV starts with a `# config_hash=... seed=...` comment line and carries
numbers at six significant digits; report.json embeds the same hash and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .bargaining import BargainOutcome, bargain
from .config import ConfigError, RunConfig, load_config
from .equilibrium import EquilibriumOutcome, NonConvergenceError, solve_spot_equilibrium
from .experiments import StudyKind, run_base, run_nptp, run_sweep
from .lp import SolverFailure
from .market import InfeasibleDeliveryError
from .scenarios import generate_scenarios


def _fmt(value) -> str:
    if isinstance(value, (bool, int, np.integer)):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return f"{value:.6g}"
    return str(value)


def _write_csv(path: str, header_comment: str, columns: list[str], rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {header_comment}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _header(config: RunConfig) -> str:
    return f"config_hash={config.config_hash()} seed={config.scenario.seed}"


def _warn_negative_prices(prices: np.ndarray) -> None:
    if np.any(prices < 0):
        print(
            f"warning: {int((prices < 0).sum())} scenario price(s) below zero; "
            "the demand relation is evaluated unclamped",
            file=sys.stderr,
        )


def _scenarios(config: RunConfig):
    sc = config.scenario
    return generate_scenarios(
        config.wind,
        sc.disturbance_bound,
        sc.n_scenarios,
        window=sc.window,
        hours_per_period=config.market.hours_per_period,
        seed=sc.seed,
    )


def _equilibrium_trace_rows(outcome: EquilibriumOutcome):
    return [(k, resid, f_ra, f_ga) for (k, resid, f_ra, f_ga) in outcome.trace]


def _write_equilibrium(out: str, config: RunConfig, outcome: EquilibriumOutcome) -> None:
    _write_csv(
        os.path.join(out, "trace_equilibrium.csv"),
        _header(config),
        ["iteration", "max_price_change", "f_ra", "f_ga"],
        _equilibrium_trace_rows(outcome),
    )


def _bargain_trace_rows(outcome: BargainOutcome):
    t = outcome.contract.n_periods
    for (k, f_obj, q, rho_f, f_ra, f_ga) in outcome.trace:
        yield (k, f_obj, *q, *rho_f, f_ra, f_ga)


def _write_bargain(out: str, config: RunConfig, outcome: BargainOutcome) -> None:
    t = outcome.contract.n_periods
    columns = (
        ["iteration", "F"]
        + [f"q_{j + 1}" for j in range(t)]
        + [f"rho_f_{j + 1}" for j in range(t)]
        + ["f_ra", "f_ga"]
    )
    _write_csv(
        os.path.join(out, "trace_bargain.csv"), _header(config), columns, _bargain_trace_rows(outcome)
    )
    _write_equilibrium(out, config, outcome.disagreement)


def _cmd_validate(config: RunConfig, args) -> int:
    print("configuration valid")
    print(f"config_hash={config.config_hash()}")
    return 0


def _cmd_scenarios(config: RunConfig, args) -> int:
    scenarios = _scenarios(config)
    rows = [
        (w, t, scenarios.energy[w, t], scenarios.probs[w])
        for w in range(scenarios.n_scenarios)
        for t in range(scenarios.n_periods)
    ]
    _write_csv(
        os.path.join(args.out, "scenarios.csv"),
        _header(config),
        ["scenario", "period", "energy_mwh", "prob"],
        rows,
    )
    print(f"wrote {scenarios.n_scenarios * scenarios.n_periods} rows to {args.out}/scenarios.csv")
    return 0


def _cmd_equilibrium(config: RunConfig, args) -> int:
    scenarios = _scenarios(config)
    outcome = solve_spot_equilibrium(
        config.rep2a(), config.ga(), scenarios, config.market, config.equilibrium, config.anticipation
    )
    _warn_negative_prices(outcome.prices.prices)
    _write_equilibrium(args.out, config, outcome)
    report = {
        "config_hash": config.config_hash(),
        "seed": config.scenario.seed,
        "f_ra_d": outcome.f_ra_d,
        "f_ga_d": outcome.f_ga_d,
        "utility_ra": -outcome.f_ra_d,
        "utility_ga": -outcome.f_ga_d,
        "iterations": outcome.iterations,
        "residual": outcome.residual,
        "price_min": float(outcome.prices.prices.min()),
        "price_max": float(outcome.prices.prices.max()),
    }
    _write_json(os.path.join(args.out, "report.json"), report)
    print(f"equilibrium converged in {outcome.iterations} iterations (residual {outcome.residual:.3g})")
    return 0


def _cmd_bargain(config: RunConfig, args) -> int:
    scenarios = _scenarios(config)
    outcome = bargain(
        config.rep2a(),
        config.ga(),
        scenarios,
        config.market,
        config.mode,
        config.bargain,
        config.anticipation,
    )
    _warn_negative_prices(outcome.prices.prices)
    _write_bargain(args.out, config, outcome)
    report = {
        "config_hash": config.config_hash(),
        "seed": config.scenario.seed,
        "status": outcome.status.value,
        "mode": config.mode.value,
        "f_ra_d": outcome.f_ra_d,
        "f_ga_d": outcome.f_ga_d,
        "f_ra_a": outcome.f_ra_a,
        "f_ga_a": outcome.f_ga_a,
        "gain_ra": outcome.gain_ra,
        "gain_ga": outcome.gain_ga,
        "nash_objective": outcome.nash_objective,
        "iterations": outcome.iterations,
        "residual": outcome.residual,
        "positions": outcome.contract.positions.tolist(),
        "futures_prices": outcome.contract.prices.tolist(),
    }
    _write_json(os.path.join(args.out, "report.json"), report)
    print(f"bargain finished with status {outcome.status.value} after {outcome.iterations} iterations")
    return 0


def _write_distributions(out: str, config: RunConfig, distributions: dict) -> None:
    for name, dist in distributions.items():
        rows = [
            (dist.bin_edges[i], dist.bin_edges[i + 1], dist.densities[i])
            for i in range(len(dist.densities))
        ]
        _write_csv(
            os.path.join(out, f"dist_{name}.csv"),
            _header(config),
            ["bin_left", "bin_right", "density"],
            rows,
        )


def _cmd_study(config: RunConfig, args) -> int:
    if args.name:
        config = replace(config, study=replace(config.study, name=args.name))
    if args.workers:
        config = replace(config, study=replace(config.study, workers=args.workers))
    spec = config.study_spec()
    report = {"config_hash": config.config_hash(), "seed": config.scenario.seed}

    if spec.study is StudyKind.BASE:
        result = run_base(spec)
        _warn_negative_prices(result.mode1.prices.prices)
        report.update(result.to_dict())
        _write_bargain(args.out, config, result.mode1)
        _write_distributions(args.out, config, result.distributions)
    elif spec.study is StudyKind.NPTP:
        result = run_nptp(spec)
        report.update(result.to_dict())
        _write_sweep_csv(args.out, config, result.rows)
    else:
        result = run_sweep(spec)
        report.update(result.to_dict())
        _write_sweep_csv(args.out, config, result.rows)

    _write_json(os.path.join(args.out, "report.json"), report)
    print(f"study '{spec.study.value}' written to {args.out}/report.json")
    return 0


def _write_sweep_csv(out: str, config: RunConfig, rows: list[dict]) -> None:
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    table = [[row.get(c, "") for c in columns] for row in rows]
    _write_csv(os.path.join(out, "sweep.csv"), _header(config), columns, table)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ammarket",
        description="Risk-aware production and futures-trading equilibria for ammonia markets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", default=None, help="YAML config path (defaults if omitted)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        if needs_out:
            p.add_argument("--out", default="out", help="output directory")

    common(sub.add_parser("validate", help="check a config file"), needs_out=False)
    common(sub.add_parser("scenarios", help="dump the scenario set to CSV"))
    common(sub.add_parser("equilibrium", help="solve the spot-only equilibrium"))
    common(sub.add_parser("bargain", help="run the futures-spot bargaining procedure"))
    study = sub.add_parser("study", help="run one of the named studies")
    study.add_argument(
        "name",
        nargs="?",
        default=None,
        choices=[k.value for k in StudyKind],
        help="study name (defaults to the config's study.name)",
    )
    study.add_argument("--workers", type=int, default=None, help="parallel grid workers")
    common(study)
    return parser


_COMMANDS = {
    "validate": _cmd_validate,
    "scenarios": _cmd_scenarios,
    "equilibrium": _cmd_equilibrium,
    "bargain": _cmd_bargain,
    "study": _cmd_study,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, scenario=replace(config.scenario, seed=args.seed))
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](config, args)
    except (SolverFailure, NonConvergenceError, InfeasibleDeliveryError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
