"""Command-line harness: generate scenarios, run single simulations, and sweep
client counts across schedulers into comparison tables.

Exit codes: 0 success, 2 invalid input (bad scenario, oracle guard, usage),
3 scheduler contract violation.  Set DASHSIM_THREADS to run comparison cells
in parallel processes; output ordering is deterministic either way.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from dashsim import metrics as metrics_mod
from dashsim.engine import SchedulerContractError, run_simulation
from dashsim.scenario import (
    GenerationParams,
    ScenarioError,
    desk_params,
    generate_scenario,
    load_scenario,
    paper_params,
    save_scenario,
    scenario_hash,
)
from dashsim.schedulers import SCHEDULER_NAMES, OracleGuardError, make_scheduler

COMPARE_CSV_COLUMNS = (
    "clients",
    "scheduler",
    "seed",
    "mean_throughput_kbps",
    "mean_delay_slots",
    "switching_freq",
    "switching_mag_kbps",
    "jain",
    "rmsd",
    "total_utility",
    "scenario_hash",
)


def _profile_params(profile: str, clients: int) -> GenerationParams:
    if profile == "paper":
        return paper_params(clients)
    if profile == "desk":
        return desk_params(clients)
    raise ValueError(f"unknown profile {profile!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dashsim",
        description="Simulator for network-assisted adaptive video streaming.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a scenario file")
    gen.add_argument("--clients", type=int, default=None)
    gen.add_argument("--servers", type=int, default=None)
    gen.add_argument("--horizon", type=int, default=None)
    gen.add_argument("--chunk", type=int, default=None)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--far-near", action="store_true",
                     help="place 30%% of clients in the border band, the rest near stations")
    gen.add_argument("--profile", choices=("paper", "desk"), default="paper")

    run = sub.add_parser("run", help="run one simulation")
    run.add_argument("--scenario", required=True)
    run.add_argument("--scheduler", choices=SCHEDULER_NAMES, required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--trace", action="store_true", help="also write the full per-slot trace")

    cmp_ = sub.add_parser("compare", help="sweep client counts across schedulers")
    cmp_.add_argument("--counts", required=True, help="comma-separated client counts")
    cmp_.add_argument("--schedulers", required=True, help="comma-separated scheduler names")
    cmp_.add_argument("--seeds", required=True, help="comma-separated seeds")
    cmp_.add_argument("--out", required=True, help="output directory")
    cmp_.add_argument("--profile", choices=("desk", "paper"), default="desk")
    return parser


def cmd_generate(args) -> int:
    default_clients = 100 if args.profile == "paper" else 40
    clients = args.clients if args.clients is not None else default_clients
    params = _profile_params(args.profile, clients)
    overrides = {}
    if args.servers is not None:
        overrides["stations"] = args.servers
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.chunk is not None:
        overrides["chunk_size"] = args.chunk
    if args.far_near:
        overrides["placement"] = "far_near"
    if overrides:
        params = replace(params, **overrides)
    cfg = generate_scenario(params, args.seed)
    save_scenario(cfg, args.out)
    print(
        f"wrote {args.out}: {len(cfg.clients)} clients, {len(cfg.stations)} stations, "
        f"horizon {cfg.horizon}, ladder {list(cfg.ladder.rates)} kbps"
    )
    return 0


def cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    scheduler = make_scheduler(args.scheduler, cfg)
    trace = run_simulation(cfg, scheduler, seed=args.seed)
    run = metrics_mod.compute_run_metrics(trace)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sha = scenario_hash(cfg)
    metrics_mod.write_client_metrics_csv(trace, run, out / "metrics.csv")
    metrics_mod.write_summary_csv(trace, run, sha, out / "summary.csv")
    if args.trace:
        trace.write_trace_csv(out / "trace.csv")
    print(
        f"{args.scheduler} on {args.scenario} (seed {args.seed}): "
        f"utility {run.total_utility:.3f}, jain {run.jain_index:.4f}, "
        f"mean throughput {run.mean_throughput_kbps:.1f} kbps"
    )
    return 0


def _compare_cell(job) -> list:
    profile, count, scheduler_name, seed = job
    params = _profile_params(profile, count)
    cfg = generate_scenario(params, seed)
    scheduler = make_scheduler(scheduler_name, cfg)
    trace = run_simulation(cfg, scheduler, seed=seed, record_rows=False)
    run = metrics_mod.compute_run_metrics(trace)
    return [
        count,
        scheduler_name,
        seed,
        repr(run.mean_throughput_kbps),
        repr(run.mean_delay_slots),
        repr(run.switching_freq),
        repr(run.switching_mag_kbps),
        repr(run.jain_index),
        repr(run.rmsd_utilization),
        repr(run.total_utility),
        scenario_hash(cfg),
    ]


def cmd_compare(args) -> int:
    counts = [int(x) for x in args.counts.split(",") if x]
    schedulers = [x.strip() for x in args.schedulers.split(",") if x.strip()]
    seeds = [int(x) for x in args.seeds.split(",") if x]
    if not counts or not schedulers or not seeds:
        raise ValueError("counts, schedulers, and seeds must all be non-empty")
    for name in schedulers:
        if name not in SCHEDULER_NAMES:
            raise ValueError(f"unknown scheduler {name!r}")

    jobs = [
        (args.profile, count, name, seed)
        for count in counts
        for name in schedulers
        for seed in seeds
    ]
    threads = int(os.environ.get("DASHSIM_THREADS", "1"))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_compare_cell, jobs))
    else:
        rows = [_compare_cell(job) for job in jobs]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "compare.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARE_CSV_COLUMNS)
        writer.writerows(rows)
    print(f"wrote {path}: {len(rows)} rows")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
    except (ScenarioError, OracleGuardError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchedulerContractError as exc:
        print(f"scheduler contract violation: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
