"""Seeded dynamic workload: Poisson arrivals, exponential holding times.

Each request draws, in order: inter-arrival gap, source, destination,
holding time, bandwidth, tolerance and priority from one numpy PCG64
stream, so a seed fixes the whole trace. The prolongation allowance is
derived from the tolerance, ``eta = tau * (1 / tolerance - 1)``, so a
request slowed to its tolerance floor finishes exactly at its deadline.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np

from .electric import ServiceRequest

RNG_NAME = "numpy.random.PCG64"
TRACE_COLUMNS = (
    "arrival_time", "s", "d", "bw_gbps", "holding_h", "deadline_h", "priority", "tolerance",
)


@dataclass(frozen=True)
class WorkloadConfig:
    arrival_rate: float  # per node, 1/hour
    mu: float  # 1 / mean holding time, 1/hour
    seed: int = 1
    n_requests: int | None = 10_000
    duration: float | None = None
    bw_range: tuple[float, float] = (5.0, 150.0)
    tolerance_range: tuple[float, float] = (0.25, 1.0)
    priorities: int = 5
    bw_step: float | None = None  # e.g. 5.0 for a discrete 5 Gbps grid

    def __post_init__(self):
        if self.arrival_rate <= 0 or self.mu <= 0:
            raise ValueError("arrival rate and mu must be positive")
        if self.n_requests is None and self.duration is None:
            raise ValueError("need n_requests or duration to bound the workload")
        lo, hi = self.tolerance_range
        if not 0 < lo <= hi <= 1:
            raise ValueError("tolerance range must lie in (0, 1]")

    @property
    def load_erlang(self) -> float:
        return self.arrival_rate / self.mu

    @classmethod
    def for_load(cls, erlang_per_node: float, mu: float = 10.0, **kw) -> "WorkloadConfig":
        return cls(arrival_rate=erlang_per_node * mu, mu=mu, **kw)


def generate(config: WorkloadConfig, net) -> Iterator[ServiceRequest]:
    nodes = list(net.nodes)
    n = len(nodes)
    if n < 2:
        return
    rng = np.random.Generator(np.random.PCG64(config.seed))
    total_rate = config.arrival_rate * n
    bw_lo, bw_hi = config.bw_range
    tol_lo, tol_hi = config.tolerance_range
    t = 0.0
    rid = 0
    while config.n_requests is None or rid < config.n_requests:
        t += rng.exponential(1.0 / total_rate)
        if config.duration is not None and t > config.duration:
            return
        si = int(rng.integers(n))
        di = int(rng.integers(n - 1))
        if di >= si:
            di += 1
        tau = float(rng.exponential(1.0 / config.mu))
        bw = float(rng.uniform(bw_lo, bw_hi))
        if config.bw_step:
            steps = int(round((bw_hi - bw_lo) / config.bw_step))
            bw = bw_lo + config.bw_step * min(int((bw - bw_lo) / config.bw_step + 0.5), steps)
        tol = float(rng.uniform(tol_lo, tol_hi))
        rho = int(rng.integers(1, config.priorities + 1))
        yield ServiceRequest(
            id=rid, s=nodes[si], d=nodes[di], bw=bw, t=t, tau=tau,
            eta=tau * (1.0 / tol - 1.0), rho=rho, tolerance=tol,
        )
        rid += 1


def write_trace(requests: Iterable[ServiceRequest], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in requests:
        writer.writerow([repr(r.t), r.s, r.d, repr(r.bw), repr(r.tau), repr(r.eta), r.rho, repr(r.tolerance)])


def read_trace(src: TextIO | str) -> list[ServiceRequest]:
    if isinstance(src, str):
        src = io.StringIO(src)
    reader = csv.DictReader(src)
    missing = set(TRACE_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"trace is missing columns {sorted(missing)}")
    out = []
    for i, row in enumerate(reader):
        out.append(
            ServiceRequest(
                id=i, s=int(row["s"]), d=int(row["d"]), bw=float(row["bw_gbps"]),
                t=float(row["arrival_time"]), tau=float(row["holding_h"]),
                eta=float(row["deadline_h"]), rho=int(row["priority"]),
                tolerance=float(row["tolerance"]),
            )
        )
    return out
