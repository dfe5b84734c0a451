"""Session and run metrics: quality, startup delay, switching, proportional
fairness, load deviation, the combined utility, Jain's index, and utilization
RMSD.  Everything is recomputed from a simulation trace so results never
depend on scheduler-internal bookkeeping.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from dashsim import channel
from dashsim.engine import SimulationTrace, blocks_required
from dashsim.scenario import BitrateLadder, WeightConfig

__all__ = [
    "SwitchingStats",
    "ClientMetrics",
    "RunMetrics",
    "quality_of_rate",
    "average_quality",
    "switching",
    "pf_term",
    "utilization",
    "load_sd",
    "combine_utility",
    "utility",
    "jain_index",
    "rmsd_utilization",
    "compute_client_metrics",
    "compute_run_metrics",
    "write_client_metrics_csv",
    "write_summary_csv",
    "CLIENT_CSV_COLUMNS",
    "SUMMARY_CSV_COLUMNS",
]


@dataclass(frozen=True)
class SwitchingStats:
    """Accumulated quality switching plus the frequency/magnitude view of it."""

    total_quality: float      # sum of |q_p - q_{p-1}| over consecutive chunks
    count: int                # number of chunk transitions that changed rate
    magnitude_kbps: float     # mean |r_p - r_{p-1}| over those transitions


@dataclass(frozen=True)
class ClientMetrics:
    client_id: int
    avg_quality: float
    delay_slots: int
    switching: float
    switch_count: int
    switch_magnitude_kbps: float
    stall_ratio: float
    pf_term: float
    load_sd: float
    utility: float
    avg_bitrate_kbps: float


@dataclass(frozen=True)
class RunMetrics:
    clients: tuple[ClientMetrics, ...]
    total_utility: float
    jain_index: float
    rmsd_utilization: float
    mean_throughput_kbps: float
    mean_delay_slots: float
    switching_freq: float        # rate switches per chunk, pooled over clients
    switching_mag_kbps: float    # kbps of rate change per chunk, pooled over clients


def quality_of_rate(rate_kbps: float, ladder: BitrateLadder) -> float:
    """Map a bitrate to perceived quality: ln(rate / ladder floor).

    Zero at the lowest ladder rate, strictly increasing and concave above it.
    """
    if rate_kbps < ladder.floor:
        raise ValueError(
            f"rate {rate_kbps} kbps is below the ladder floor {ladder.floor}"
        )
    return math.log(rate_kbps / ladder.floor)


def average_quality(bitrates, ladder: BitrateLadder) -> float:
    """Mean quality over a session's downloaded chunks."""
    if not bitrates:
        raise ValueError("average_quality: empty history")
    return sum(quality_of_rate(r, ladder) for r in bitrates) / len(bitrates)


def switching(bitrates, ladder: BitrateLadder) -> SwitchingStats:
    """Accumulated quality switching: sum of absolute quality steps between
    consecutive chunks, with the switch count and mean bitrate magnitude."""
    if not bitrates:
        raise ValueError("switching: empty history")
    total = 0.0
    count = 0
    mag_sum = 0.0
    prev = bitrates[0]
    prev_q = quality_of_rate(prev, ladder)
    for r in bitrates[1:]:
        q = quality_of_rate(r, ladder)
        total += abs(q - prev_q)
        if r != prev:
            count += 1
            mag_sum += abs(r - prev)
        prev, prev_q = r, q
    return SwitchingStats(total, count, mag_sum / count if count else 0.0)


def pf_term(bitrates, chunk_size: int) -> float:
    """Log of the total bitrate allocated over the session's slots."""
    total = chunk_size * sum(bitrates)
    if total <= 0:
        raise ValueError("pf_term: no positive bitrate allocated")
    return math.log(total)


def _theoretical(trace: SimulationTrace, client_id: int, station_id: int) -> float:
    cfg = trace.scenario
    c = next(c for c in cfg.clients if c.id == client_id)
    s = next(s for s in cfg.stations if s.id == station_id)
    return channel.theoretical_throughput(
        s.p_max_mw, channel.distance(c.x_m, c.y_m, s.x_m, s.y_m), cfg.alpha
    )


def utilization(trace: SimulationTrace, client_id: int, station_id: int) -> float:
    """Fraction of a station's blocks one client occupied, averaged over its session.

    Per assigned slot the client occupies blocks_required/capacity of the
    station; the session mean keeps this a percentage-style figure comparable
    across session lengths.
    """
    cfg = trace.scenario
    session = trace.sessions[client_id]
    station = next(s for s in cfg.stations if s.id == station_id)
    thr = _theoretical(trace, client_id, station_id)
    total = 0.0
    for d in session.history:
        if d.station_id != station_id:
            continue
        for s in range(d.start_slot, d.start_slot + cfg.chunk_size):
            cap = station.blocks[s - 1]
            total += blocks_required(d.bitrate_kbps, thr, cap) / cap
    return total / (session.spec.departure - session.spec.arrival)


def load_sd(trace: SimulationTrace, client_id: int) -> float:
    """Population standard deviation of the client's per-station utilization."""
    values = [utilization(trace, client_id, s.id) for s in trace.scenario.stations]
    mean = sum(values) / len(values)
    return math.sqrt(sum((u - mean) ** 2 for u in values) / len(values))


def combine_utility(avg_quality: float, delay_slots: float, switching_q: float,
                    pf: float, sd: float, w: WeightConfig) -> float:
    """The per-client objective: weighted QoE plus fairness minus load deviation."""
    return (
        w.beta * (w.rho * avg_quality - w.omega * delay_slots - w.gamma * switching_q)
        + w.theta * pf
        - w.mu * sd
    )


def utility(cm: ClientMetrics, w: WeightConfig) -> float:
    return combine_utility(
        cm.avg_quality, cm.delay_slots, cm.switching, cm.pf_term, cm.load_sd, w
    )


def jain_index(values) -> float:
    """Jain's fairness index (sum x)^2 / (n * sum x^2); 1 means perfectly even."""
    values = list(values)
    if not values:
        raise ValueError("jain_index: empty input")
    if any(v < 0 for v in values):
        raise ValueError("jain_index: negative input")
    sq = sum(v * v for v in values)
    if sq == 0:
        raise ValueError("jain_index: all-zero input")
    total = sum(values)
    return total * total / (len(values) * sq)


def rmsd_utilization(trace: SimulationTrace) -> float:
    """Root-mean-square deviation of per-station utilization fractions."""
    cfg = trace.scenario
    fractions = []
    for station in cfg.stations:
        used = trace.used_blocks[station.id]
        frac = sum(
            used[t] / station.blocks[t - 1] for t in range(1, cfg.horizon + 1)
        ) / cfg.horizon
        fractions.append(frac)
    mean = sum(fractions) / len(fractions)
    return math.sqrt(sum((f - mean) ** 2 for f in fractions) / len(fractions))


def compute_client_metrics(trace: SimulationTrace, client_id: int) -> ClientMetrics:
    cfg = trace.scenario
    session = trace.sessions[client_id]
    bitrates = [d.bitrate_kbps for d in session.history]
    session_slots = session.spec.departure - session.spec.arrival
    aq = average_quality(bitrates, cfg.ladder)
    sw = switching(bitrates, cfg.ladder)
    pf = pf_term(bitrates, cfg.chunk_size)
    sd = load_sd(trace, client_id)
    delay = session.effective_delay()
    return ClientMetrics(
        client_id=client_id,
        avg_quality=aq,
        delay_slots=delay,
        switching=sw.total_quality,
        switch_count=sw.count,
        switch_magnitude_kbps=sw.magnitude_kbps,
        stall_ratio=session.stall_slots / session_slots,
        pf_term=pf,
        load_sd=sd,
        utility=combine_utility(aq, delay, sw.total_quality, pf, sd, cfg.weights),
        avg_bitrate_kbps=sum(bitrates) / len(bitrates),
    )


def compute_run_metrics(trace: SimulationTrace) -> RunMetrics:
    cms = tuple(
        compute_client_metrics(trace, c.id) for c in trace.scenario.clients
    )
    transitions = sum(
        len(trace.sessions[cm.client_id].history) - 1 for cm in cms
    )
    switches = sum(cm.switch_count for cm in cms)
    mag_total = sum(cm.switch_count * cm.switch_magnitude_kbps for cm in cms)
    return RunMetrics(
        clients=cms,
        total_utility=sum(cm.utility for cm in cms),
        jain_index=jain_index([cm.avg_bitrate_kbps for cm in cms]),
        rmsd_utilization=rmsd_utilization(trace),
        mean_throughput_kbps=trace.eff_total_kbps / trace.active_client_slots,
        mean_delay_slots=sum(cm.delay_slots for cm in cms) / len(cms),
        switching_freq=switches / transitions if transitions else 0.0,
        switching_mag_kbps=mag_total / transitions if transitions else 0.0,
    )


CLIENT_CSV_COLUMNS = (
    "client",
    "group",
    "arrival",
    "departure",
    "avg_quality",
    "delay_slots",
    "switching",
    "switch_count",
    "switch_magnitude_kbps",
    "stall_ratio",
    "pf_term",
    "load_sd",
    "utility",
    "avg_bitrate_kbps",
)

SUMMARY_CSV_COLUMNS = (
    "scenario_hash",
    "scheduler",
    "seed",
    "clients",
    "total_utility",
    "jain_index",
    "rmsd_utilization",
    "mean_throughput_kbps",
    "mean_delay_slots",
    "switching_freq",
    "switching_mag_kbps",
    "total_stall_slots",
)


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_client_metrics_csv(trace: SimulationTrace, run: RunMetrics, path) -> None:
    by_id = {c.id: c for c in trace.scenario.clients}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CLIENT_CSV_COLUMNS)
        for cm in run.clients:
            spec = by_id[cm.client_id]
            writer.writerow(
                [
                    cm.client_id,
                    spec.group,
                    spec.arrival,
                    spec.departure,
                    _fmt(cm.avg_quality),
                    cm.delay_slots,
                    _fmt(cm.switching),
                    cm.switch_count,
                    _fmt(cm.switch_magnitude_kbps),
                    _fmt(cm.stall_ratio),
                    _fmt(cm.pf_term),
                    _fmt(cm.load_sd),
                    _fmt(cm.utility),
                    _fmt(cm.avg_bitrate_kbps),
                ]
            )


def write_summary_csv(trace: SimulationTrace, run: RunMetrics, scenario_hash: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_CSV_COLUMNS)
        writer.writerow(summary_row(trace, run, scenario_hash))


def summary_row(trace: SimulationTrace, run: RunMetrics, scenario_hash: str) -> list:
    return [
        scenario_hash,
        trace.scheduler_name,
        trace.seed,
        len(trace.scenario.clients),
        _fmt(run.total_utility),
        _fmt(run.jain_index),
        _fmt(run.rmsd_utilization),
        _fmt(run.mean_throughput_kbps),
        _fmt(run.mean_delay_slots),
        _fmt(run.switching_freq),
        _fmt(run.switching_mag_kbps),
        trace.total_stall_slots,
    ]
