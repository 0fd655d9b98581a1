"""Command-line interface: run, sweep, verify, oracle.

``run`` executes seeded trials and writes a per-round transcript CSV (trial 0)
plus a per-trial summary CSV; ``sweep`` compares the priced, naive, and
baseline policies over a budget grid on paired instances; ``verify`` runs the
Monte-Carlo invariant suite and emits a JSON report; ``oracle`` reports the
best-in-hindsight hypothesis and the instance's difficulty statistics.

The environment variable PROCURE_LEARN_SEED overrides the config seed.
Exit codes: 0 success, 1 verify failures, 2 invalid config or unwritable
output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .core import InvalidConfigError
from .environment import FormatError
from .metrics import offline_best
from .runner import (
    ExperimentConfig,
    build_instance,
    load_config,
    run_sweep,
    run_trial,
    run_trials,
    trial_streams,
    write_summary_csv,
    write_sweep_csv,
    write_transcript_csv,
)
from .verify import run_checks


def _load(path: str, override_seed=None) -> ExperimentConfig:
    config = load_config(path)
    env_seed = os.environ.get("PROCURE_LEARN_SEED")
    if env_seed is not None:
        config = dataclasses.replace(config, seed=int(env_seed))
    if override_seed is not None:  # the flag wins over the environment
        config = dataclasses.replace(config, seed=int(override_seed))
    return config


def _prepare_output(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-probe"
    probe.write_text("")
    probe.unlink()
    return out


def _mean_se_line(name: str, values) -> str:
    values = np.asarray(values, dtype=np.float64)
    values = values[~np.isnan(values)]
    if len(values) == 0:
        return f"{name}: n/a"
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return f"{name}: {mean:.6g} +/- {se:.3g}"


def cmd_run(args) -> int:
    config = _load(args.config, args.seed)
    out = _prepare_output(config)
    jobs = args.jobs or os.cpu_count() or 1

    first, mech = run_trial(config, 0, record_transcript=True)
    rest = run_trials(config, jobs, indices=range(1, config.trials))
    results = [first] + rest

    write_transcript_csv(out / "transcript.csv", mech.transcript)
    write_summary_csv(out / "summary.csv", results)

    print(f"wrote {out / 'transcript.csv'} and {out / 'summary.csv'}")
    print(_mean_se_line("regret", [r.regret for r in results]))
    print(_mean_se_line("risk (zero-one)", [r.risk_zero_one for r in results]))
    print(_mean_se_line("risk (surrogate)", [r.risk_surrogate for r in results]))
    print(_mean_se_line("spend", [r.spend for r in results]))
    return 0


def cmd_sweep(args) -> int:
    config = _load(args.config, args.seed)
    if not config.budget_grid:
        raise InvalidConfigError("sweep needs a budget_grid in the config")
    out = _prepare_output(config)
    jobs = args.jobs or os.cpu_count() or 1
    rows = run_sweep(config, jobs)
    write_sweep_csv(out / "sweep.csv", rows)
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    for row in rows:
        print(
            f"  {row.policy:>8} B={row.budget:<8g} regret {row.regret_mean:.4g}"
            f" risk01 {row.risk_zero_one_mean:.4g} spend {row.spend_mean:.4g}"
        )
    return 0


def cmd_verify(args) -> int:
    report = run_checks(quick=args.quick)
    text = json.dumps(report, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0 if report["all_passed"] else 1


def cmd_oracle(args) -> int:
    config = _load(args.config)
    instance_ss, _, _ = trial_streams(config.seed, 0)
    instance = build_instance(config.instance, instance_ss)
    solution = offline_best(instance, config.oracle_iterations)
    coords = solution.hypothesis.coords
    sqrt_costs = np.sqrt(instance.costs)
    star = instance.grad_norms_at(coords)
    report = {
        "dimension": int(instance.space.dim),
        "hypothesis_head": [float(x) for x in coords[:8]],
        "hypothesis_norm": float(np.linalg.norm(coords)),
        "total_loss": solution.total_loss,
        "converged": solution.converged,
        "iterations": solution.iterations,
        "stats": {
            "opt_value_cost": float(np.mean(star * sqrt_costs)),
            "avg_sqrt_cost": float(np.mean(sqrt_costs)),
            "avg_cost": float(np.mean(instance.costs)),
        },
    }
    print(json.dumps(report, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="procure-learn",
        description="Budgeted data-purchasing learning mechanisms, simulated.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute seeded trials, write transcript + summary CSVs")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--jobs", type=int, default=None, help="worker count (default: cores)")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="policy x budget grid on paired instances")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--jobs", type=int, default=None)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the Monte-Carlo invariant suite")
    p_verify.add_argument("--quick", action="store_true", help="smaller sample sizes")
    p_verify.add_argument("--output", default=None, help="also write the JSON report here")
    p_verify.set_defaults(fn=cmd_verify)

    p_oracle = sub.add_parser("oracle", help="best-in-hindsight hypothesis and stats")
    p_oracle.add_argument("--config", required=True)
    p_oracle.set_defaults(fn=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InvalidConfigError, FormatError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
