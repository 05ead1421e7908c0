"""Batch experiment driver: (policy x load x seed) sweeps written as CSV.

Outputs in ``--out``:

- ``bbp.csv``: ``load_erlang,policy,seed,priority,bbp`` with one row per
  priority class plus an ``all`` row per cell.
- ``series.csv``: ``time_h,policy,throughput_gbps,bbp_window``, each
  policy's windowed series averaged over seeds at one load.
- ``summary.txt``: mean +- standard error per (load, policy). Its first line
  is the only place a timestamp appears.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import math
import multiprocessing
import os
import statistics
import sys
from dataclasses import dataclass

from .engine import E_FIRST, O_FIRST, POLICY_NAMES, EngineConfig, PolicyConfig, run
from .metrics import PRIORITIES
from .netmodel import TopologyError, load_topology, usnet_text
from .optical import SETUP_BEST, SETUP_DEFAULT, ProvisionConfig
from .routing import MIN_PDR, MIN_RH
from .traffic import RNG_NAME, WorkloadConfig, generate, read_trace, write_trace


def parse_loads(text: str) -> list[float]:
    """``26:44:2`` (inclusive range) or a comma list such as ``2,4.5``."""
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) == 2:
                parts.append(1.0)
            lo, hi, step = parts
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            loads = [round(lo + k * step, 10) for k in range(n)]
        else:
            loads = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad load list {text!r}") from None
    if not loads or any(x <= 0 for x in loads):
        raise argparse.ArgumentTypeError(f"loads must be positive: {text!r}")
    return loads


def parse_seeds(text: str) -> list[int]:
    """``1..20``, ``3`` or ``1,5,9``."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            seeds = list(range(lo, hi + 1))
        else:
            seeds = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def parse_policies(text: str) -> list[str]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    for n in names:
        if n not in POLICY_NAMES:
            raise argparse.ArgumentTypeError(f"unknown policy {n!r}; choose from {','.join(POLICY_NAMES)}")
    if not names:
        raise argparse.ArgumentTypeError("no policies given")
    return names


def positive(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if x <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return x


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="degradesim",
        description="Sweep degradation policies over loads and seeds and write BBP tables.",
    )
    p.add_argument("--topology", help="topology file (default: built-in USNet)")
    p.add_argument("--slots", type=int, default=300, help="spectrum slots per fiber")
    p.add_argument("--loads", type=parse_loads, default=parse_loads("26:44:2"),
                   help="Erlang per node, lo:hi:step or a comma list")
    p.add_argument("--policies", type=parse_policies, default=list(POLICY_NAMES))
    p.add_argument("--seeds", type=parse_seeds, default=parse_seeds("1..20"))
    p.add_argument("--lambda", dest="lam", type=positive,
                   help="arrival rate per node (1/h); replaces --loads with lambda/mu")
    p.add_argument("--mu", type=positive, default=10.0, help="1 / mean holding time (1/h)")
    p.add_argument("--threshold", type=positive, default=150.0, help="grooming threshold (Gbps)")
    p.add_argument("--window", type=positive, default=0.05, help="series window (h)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--oe-order", choices=(E_FIRST, O_FIRST), default=E_FIRST)
    p.add_argument("--setup-modulation", choices=(SETUP_DEFAULT, SETUP_BEST), default=SETUP_DEFAULT)
    p.add_argument("--requests", type=int, default=10_000, help="arrivals per cell")
    p.add_argument("--warmup", type=int, default=0, help="arrivals excluded from BBP")
    p.add_argument("--series-load", type=positive, help="load whose series goes to series.csv (default: first)")
    p.add_argument("--no-route-stats", action="store_true", help="skip the MinRH/MinPDR comparison")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--trace-out", help="directory for exported workload traces")
    p.add_argument("--trace-in", help="replay this trace instead of generating one")
    return p


@dataclass(frozen=True)
class Cell:
    load: float
    policy: str
    seed: int


@dataclass(frozen=True)
class Setup:
    topology: str
    slots: int
    mu: float
    requests: int
    engine: EngineConfig
    trace_in: str | None


def _workload(setup: Setup, net, load: float, seed: int):
    if setup.trace_in is not None:
        with open(setup.trace_in, newline="") as fh:
            return read_trace(fh)
    cfg = WorkloadConfig.for_load(load, mu=setup.mu, seed=seed, n_requests=setup.requests)
    return list(generate(cfg, net))


def run_cell(args: tuple[Setup, Cell]) -> dict:
    setup, cell = args
    net = load_topology(setup.topology)
    reqs = _workload(setup, net, cell.load, cell.seed)
    rep = run(net, reqs, PolicyConfig.parse(cell.policy), setup.engine, cell.seed, cell.load)
    st = rep.route_stats
    return {
        "cell": cell,
        "bbp": rep.bbp,
        "bbp_by_priority": rep.bbp_by_priority,
        "series": rep.series,
        "counters": rep.counters,
        "digest": rep.trace_digest,
        "route": (st.calls, st.mean("pdr", MIN_RH), st.mean("pdr", MIN_PDR),
                  st.mean("rh", MIN_RH), st.mean("rh", MIN_PDR), st.violations),
        "overrun": rep.max_deadline_overrun,
    }


def _topology_with_slots(text: str, slots: int) -> str:
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.strip() and not line.lstrip().startswith("#"):
            parts = line.split()
            lines[i] = f"{parts[0]} {parts[1]} slots {slots}"
            break
    return "\n".join(lines) + "\n"


def _mean_stderr(xs: list[float]) -> tuple[float, float]:
    m = statistics.fmean(xs)
    se = statistics.stdev(xs) / math.sqrt(len(xs)) if len(xs) > 1 else 0.0
    return m, se


def write_bbp(path: str, results: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["load_erlang", "policy", "seed", "priority", "bbp"])
        for res in results:
            c = res["cell"]
            w.writerow([c.load, c.policy, c.seed, "all", repr(res["bbp"])])
            for p in PRIORITIES:
                w.writerow([c.load, c.policy, c.seed, p, repr(res["bbp_by_priority"][p])])


def write_series(path: str, results: list[dict], load: float, policies: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_h", "policy", "throughput_gbps", "bbp_window"])
        for policy in policies:
            runs = [r["series"] for r in results if r["cell"].policy == policy and r["cell"].load == load]
            n = min((len(s) for s in runs), default=0)
            for k in range(n):
                t = runs[0][k][0]
                thr = statistics.fmean(s[k][1] for s in runs)
                blk = statistics.fmean(s[k][2] for s in runs)
                w.writerow([repr(round(t, 10)), policy, repr(thr), repr(blk)])


def summary_text(results: list[dict], loads: list[float], policies: list[str]) -> str:
    digest = hashlib.sha256()
    lines = [f"# generated {datetime.datetime.now().isoformat(timespec='seconds')}", f"# rng {RNG_NAME}"]
    for load in loads:
        for policy in policies:
            cell = [r for r in results if r["cell"].load == load and r["cell"].policy == policy]
            if not cell:
                continue
            m, se = _mean_stderr([r["bbp"] for r in cell])
            parts = [f"load={load:g} policy={policy} seeds={len(cell)} bbp={m:.6g}+-{se:.2g}"]
            for p in PRIORITIES:
                pm, pse = _mean_stderr([r["bbp_by_priority"][p] for r in cell])
                parts.append(f"p{p}={pm:.6g}+-{pse:.2g}")
            calls = sum(r["route"][0] for r in cell)
            if calls:
                wpdr_rh = sum(r["route"][0] * r["route"][1] for r in cell) / calls
                wpdr_pdr = sum(r["route"][0] * r["route"][2] for r in cell) / calls
                wrh_rh = sum(r["route"][0] * r["route"][3] for r in cell) / calls
                wrh_pdr = sum(r["route"][0] * r["route"][4] for r in cell) / calls
                parts.append(
                    f"route_calls={calls} pdr[MinRH]={wpdr_rh:.4g} pdr[MinPDR]={wpdr_pdr:.4g} "
                    f"rh[MinRH]={wrh_rh:.4g} rh[MinPDR]={wrh_pdr:.4g} "
                    f"violations={sum(r['route'][5] for r in cell)}"
                )
            for key in ("admitted_electric", "admitted_optical", "requests_degraded", "lightpaths_degraded"):
                parts.append(f"{key}={statistics.fmean(r['counters'][key] for r in cell):.4g}")
            lines.append(" ".join(parts))
            for r in cell:
                digest.update(r["digest"].encode())
    lines.append(f"trace_digest={digest.hexdigest()}")
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.slots < 1:
        parser.error("--slots must be at least 1")
    if args.requests < 0 or args.warmup < 0 or args.jobs < 1:
        parser.error("--requests, --warmup must be >= 0 and --jobs >= 1")
    loads = [args.lam / args.mu] if args.lam is not None else args.loads
    if args.trace_in is not None:
        if not os.path.isfile(args.trace_in):
            parser.error(f"trace file not found: {args.trace_in}")
        if len(loads) != 1 or len(args.seeds) != 1:
            parser.error("--trace-in replays one workload: give a single load and seed")
    if args.topology is not None:
        if not os.path.isfile(args.topology):
            parser.error(f"topology file not found: {args.topology}")
        with open(args.topology) as fh:
            topo = fh.read()
    else:
        topo = usnet_text()
    topo = _topology_with_slots(topo, args.slots)
    try:
        net = load_topology(topo)
    except TopologyError as exc:
        parser.error(f"bad topology: {exc}")
    series_load = args.series_load if args.series_load is not None else loads[0]
    if series_load not in loads:
        parser.error("--series-load must be one of the swept loads")

    try:
        os.makedirs(args.out, exist_ok=True)
        probe = os.path.join(args.out, ".write-test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        print(f"degradesim: cannot write to {args.out}: {exc}", file=sys.stderr)
        return 1

    engine = EngineConfig(
        provision=ProvisionConfig(args.threshold, args.setup_modulation),
        oe_order=args.oe_order,
        window=args.window,
        warmup=args.warmup,
        compare_routes=not args.no_route_stats,
    )
    setup = Setup(topo, args.slots, args.mu, args.requests, engine, args.trace_in)

    try:
        if args.trace_out is not None:
            os.makedirs(args.trace_out, exist_ok=True)
            for load in loads:
                for seed in args.seeds:
                    path = os.path.join(args.trace_out, f"trace_load{load:g}_seed{seed}.csv")
                    with open(path, "w", newline="") as fh:
                        write_trace(_workload(setup, net, load, seed), fh)
    except OSError as exc:
        print(f"degradesim: cannot write traces: {exc}", file=sys.stderr)
        return 1

    cells = [Cell(load, policy, seed) for load in loads for policy in args.policies for seed in args.seeds]
    jobs = [(setup, c) for c in cells]
    if args.jobs > 1:
        with multiprocessing.Pool(args.jobs) as pool:
            results = pool.map(run_cell, jobs)
    else:
        results = [run_cell(j) for j in jobs]

    try:
        write_bbp(os.path.join(args.out, "bbp.csv"), results)
        write_series(os.path.join(args.out, "series.csv"), results, series_load, args.policies)
        with open(os.path.join(args.out, "summary.txt"), "w") as fh:
            fh.write(summary_text(results, loads, args.policies))
    except OSError as exc:
        print(f"degradesim: cannot write results: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
