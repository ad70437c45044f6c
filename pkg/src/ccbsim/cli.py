"""Command-line interface.

Subcommands:

* ``run``             one seeded run: per-round CSV plus a JSON summary
* ``sweep``           full (horizon, seed) grid: CSV matrix plus JSON summary
* ``check-lemma1``    randomized stress of the one-step IGW bound
* ``check-surrogate`` randomized stress of the per-round surrogate bound
* ``verify-oracle``   standalone oracle error against its budget
* ``solve-benchmark`` print the benchmark policy and its certificate

Exit codes: 0 success, 1 validation/config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import ValidationError
from .harness import (
    ExperimentConfig,
    assess_oracles,
    prepare_run,
    run_single,
    run_sweep,
    write_sweep_csv,
)
from .igw import lemma1_fuzz
from .policy import surrogate_inequality_fuzz

SLACK_FLOOR = -1e-9


def _add_common(parser: argparse.ArgumentParser, config_required: bool) -> None:
    parser.add_argument("--config", type=Path, required=config_required,
                        help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override the first config seed")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: config out_dir, else cwd)")
    parser.add_argument("--threads", type=int, default=1, help="parallel workers for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccbsim",
                                     description="Constrained contextual bandit simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a single seeded run")
    _add_common(p_run, config_required=True)
    p_run.add_argument("--horizon", type=int, default=None,
                       help="round count (default: first config horizon)")

    p_sweep = sub.add_parser("sweep", help="execute the full horizon x seed grid")
    _add_common(p_sweep, config_required=True)

    p_l1 = sub.add_parser("check-lemma1", help="fuzz the one-step IGW bound")
    _add_common(p_l1, config_required=False)
    p_l1.add_argument("--trials", type=int, default=100_000)

    p_sur = sub.add_parser("check-surrogate", help="fuzz the per-round surrogate bound")
    _add_common(p_sur, config_required=False)
    p_sur.add_argument("--trials", type=int, default=10_000)

    p_vo = sub.add_parser("verify-oracle", help="standalone oracle error vs its budget")
    _add_common(p_vo, config_required=True)
    p_vo.add_argument("--horizon", type=int, default=None)

    p_sb = sub.add_parser("solve-benchmark", help="print the benchmark policy and certificate")
    _add_common(p_sb, config_required=True)
    p_sb.add_argument("--horizon", type=int, default=None)

    return parser


def _dump_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_out(args, config) -> Path:
    if args.out is not None:
        return args.out
    return Path(config.out_dir) if config.out_dir else Path(".")


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    horizon = args.horizon if args.horizon is not None else config.horizons[0]
    seed = args.seed if args.seed is not None else config.seeds[0]
    logs, summary = run_single(config, horizon, seed)
    out = _resolve_out(args, config)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"rounds_T{horizon}_seed{seed}.csv"
    logs.write_csv(csv_path)
    _dump_json(summary.to_dict(), out / f"summary_T{horizon}_seed{seed}.json")
    print(f"run: T={horizon} seed={seed} regret={summary.regret:.6g} "
          f"ccv={[float(c) for c in summary.ccv]} -> {csv_path}")
    return 0


def _cmd_sweep(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    rows, summary = run_sweep(config, threads=args.threads)
    out = _resolve_out(args, config)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out / "sweep_runs.csv")
    _dump_json(summary.to_dict(), out / "sweep_summary.json")
    print(f"sweep: regret slope={summary.regret_fit.slope:.4f} (r2={summary.regret_fit.r2:.4f}) "
          f"ccv slope={summary.ccv_fit.slope:.4f} (r2={summary.ccv_fit.r2:.4f})")
    return 0


def _cmd_check_lemma1(args) -> int:
    seed = args.seed if args.seed is not None else 0
    worst = lemma1_fuzz(args.trials, seed=seed)
    print(f"check-lemma1: trials={args.trials} min slack={worst:.3e}")
    return 0 if worst >= SLACK_FLOOR else 2


def _cmd_check_surrogate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    worst = surrogate_inequality_fuzz(args.trials, seed=seed)
    print(f"check-surrogate: trials={args.trials} min slack={worst:.3e}")
    return 0 if worst >= SLACK_FLOOR else 2


def _cmd_verify_oracle(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    horizon = args.horizon if args.horizon is not None else config.horizons[0]
    seed = args.seed if args.seed is not None else config.seeds[0]
    assessment = assess_oracles(config, horizon, seed)
    print(json.dumps(assessment.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_solve_benchmark(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    horizon = args.horizon if args.horizon is not None else config.horizons[0]
    prepared = prepare_run(config, horizon)
    cert = prepared.certificate
    payload = {
        "per_context": prepared.benchmark.per_context.tolist(),
        "value_per_context": prepared.benchmark.value_per_context.tolist(),
        "certificate": {
            "definition": cert.definition.kind.value,
            "verified": cert.verified,
            "worst_slack": cert.worst_slack,
        },
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "check-lemma1": _cmd_check_lemma1,
    "check-surrogate": _cmd_check_surrogate,
    "verify-oracle": _cmd_verify_oracle,
    "solve-benchmark": _cmd_solve_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags; map to 1
        return 1 if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
