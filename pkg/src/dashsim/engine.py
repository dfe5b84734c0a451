"""Discrete-time slot loop.

Runs clients through their sessions one slot at a time: invokes the scheduler
at chunk boundaries, keeps mid-chunk decisions fixed, splits station
throughput proportionally among co-assigned clients, applies the buffer /
playback dynamics (startup fill, steady drain, stalls), accounts per-slot
resource blocks against station capacity, and records a full trace.

Slot conventions: slots are 1-based.  A client arriving at slot A downloads
during slots A+1 .. D, so a session of (D - A) slots is a whole number of
chunks and the first chunk boundary falls at A+1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from dashsim import channel
from dashsim.scenario import ClientSpec, ScenarioConfig, validate_scenario

__all__ = [
    "PHASE_STARTUP",
    "PHASE_STEADY",
    "PHASE_FINISHED",
    "SchedulerContractError",
    "ScheduleDecision",
    "ClientSession",
    "StationState",
    "SlotContext",
    "SimulationTrace",
    "blocks_required",
    "update_buffer",
    "run_simulation",
]

PHASE_STARTUP = "startup"
PHASE_STEADY = "steady"
PHASE_FINISHED = "finished"

TRACE_COLUMNS = (
    "slot",
    "client",
    "station",
    "bitrate_kbps",
    "theoretical_kbps",
    "effective_kbps",
    "buffer_kb",
    "phase",
    "stalled",
)


class SchedulerContractError(RuntimeError):
    """A scheduler returned a decision that violates the decide() contract."""


def blocks_required(bitrate_kbps: float, theoretical_kbps: float, capacity_blocks: int) -> int:
    """Resource blocks a client consumes in one slot to sustain a bitrate.

    The station must dedicate the fraction bitrate/theoretical of its blocks,
    rounded up to whole blocks.  A bitrate above the link's theoretical rate
    needs more than the whole station and is infeasible.
    """
    if bitrate_kbps <= 0:
        raise ValueError(f"bitrate must be positive, got {bitrate_kbps}")
    if theoretical_kbps <= 0:
        raise ValueError(f"theoretical throughput must be positive, got {theoretical_kbps}")
    return math.ceil(bitrate_kbps * capacity_blocks / theoretical_kbps)


@dataclass
class ScheduleDecision:
    """One (station, bitrate) assignment covering the chunk's whole slot window."""

    chunk_index: int          # 1-based
    station_id: int
    bitrate_kbps: int
    start_slot: int
    infeasible: bool = False  # set when the decision is not block-feasible (stall risk accepted)
    objective: float | None = None   # scheduler-reported objective value, if any


@dataclass
class ClientSession:
    """Mutable per-client state advanced by the slot loop."""

    spec: ClientSpec
    chunk_size: int
    phase: str = PHASE_STARTUP
    buffer_kb: float = 0.0
    delay_slots: int | None = None    # fixed once the buffer first reaches b_max
    chunk_index: int = 0              # chunks decided so far
    history: list[ScheduleDecision] = field(default_factory=list)
    stall_slots: int = 0
    stalled: bool = False
    play_pos: int = 0                 # slots of video played out
    chunk_rates: list[float] = field(default_factory=list)   # measured kbps per finished chunk
    u_acc: dict[int, float] = field(default_factory=dict)    # per-station utilization sum
    _chunk_eff_sum: float = 0.0

    @property
    def current(self) -> ScheduleDecision | None:
        return self.history[-1] if self.history else None

    def effective_delay(self) -> int:
        """Startup delay in slots; a session that never filled counts in full."""
        if self.delay_slots is not None:
            return self.delay_slots
        return self.spec.departure - self.spec.arrival


@dataclass
class StationState:
    """Per-slot resource-block ledger of one station."""

    station_id: int
    slot: int
    capacity_blocks: int
    used_blocks: int


class SlotContext:
    """Everything a scheduler may read when deciding one client's next chunk.

    Capacity is exposed for the chunk's whole slot window so feasibility can be
    checked against every slot the decision will cover, not just the boundary
    slot.  `assigned_thr_sum` reflects clients already assigned in this slot,
    including boundary decisions made earlier in the same slot.
    """

    __slots__ = (
        "slot",
        "client_id",
        "chunk_index",
        "session",
        "cfg",
        "stations_by_distance",
        "thr",
        "assigned_thr_sum",
        "window",
        "_capacity",
        "_used",
    )

    def __init__(self, slot, client_id, chunk_index, session, cfg,
                 stations_by_distance, thr, assigned_thr_sum, window,
                 capacity, used):
        self.slot = slot
        self.client_id = client_id
        self.chunk_index = chunk_index
        self.session = session
        self.cfg = cfg
        self.stations_by_distance = stations_by_distance
        self.thr = thr
        self.assigned_thr_sum = assigned_thr_sum
        self.window = window
        self._capacity = capacity
        self._used = used

    @property
    def nearest_station(self) -> int:
        return self.stations_by_distance[0][0]

    def remaining_blocks(self, station_id: int) -> int:
        """Unreserved blocks at the boundary slot."""
        return self._capacity[station_id][self.slot] - self._used[station_id][self.slot]

    def fits(self, station_id: int, bitrate_kbps: int) -> bool:
        """Block feasibility of (station, bitrate) over the chunk's whole window."""
        cap = self._capacity[station_id]
        used = self._used[station_id]
        thr = self.thr[station_id]
        for s in self.window:
            if used[s] + math.ceil(bitrate_kbps * cap[s] / thr) > cap[s]:
                return False
        return True

    def fits_and_load(self, station_id: int, bitrate_kbps: int) -> tuple[bool, float]:
        """Feasibility plus the utilization the decision would add at the station.

        The load increment sums blocks_required/capacity over the window, the
        same quantity the per-slot accounting accumulates, so schedulers can
        price a candidate's load-balance impact exactly.
        """
        cap = self._capacity[station_id]
        used = self._used[station_id]
        thr = self.thr[station_id]
        feasible = True
        load = 0.0
        for s in self.window:
            need = math.ceil(bitrate_kbps * cap[s] / thr)
            if used[s] + need > cap[s]:
                feasible = False
            load += need / cap[s]
        return feasible, load


@dataclass
class SimulationTrace:
    """Complete record of one run; every metric is computed from this."""

    scenario: ScenarioConfig
    scheduler_name: str
    seed: int
    sessions: dict[int, ClientSession]
    used_blocks: dict[int, list[int]]       # station id -> per-slot granted blocks (index = slot)
    rows: list[tuple] = field(default_factory=list)
    capacity_shortfalls: int = 0            # decisions granted fewer blocks than required
    infeasible_decisions: int = 0
    eff_total_kbps: float = 0.0
    active_client_slots: int = 0

    @property
    def total_stall_slots(self) -> int:
        return sum(s.stall_slots for s in self.sessions.values())

    def station_capacity(self, station_id: int, slot: int) -> int:
        station = next(s for s in self.scenario.stations if s.id == station_id)
        return station.blocks[slot - 1]

    def iter_station_states(self):
        for station in self.scenario.stations:
            used = self.used_blocks[station.id]
            for t in range(1, self.scenario.horizon + 1):
                yield StationState(station.id, t, station.blocks[t - 1], used[t])

    def write_trace_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows:
                writer.writerow(row)


def update_buffer(session: ClientSession, slot: int, effective_kbps: float) -> bool:
    """Advance one client's buffer/playback state by one slot; True if it stalled.

    Startup: the buffer fills by the effective throughput (capped at b_max);
    the first slot that reaches b_max ends startup and fixes the delay.
    Steady: the buffer gains the effective throughput and drains at the rate of
    the chunk currently playing.  A slot whose net level would drop to or below
    zero is a stall: the level clamps to zero and the playhead freezes.  While
    stalled, downloads continue and playback resumes in the first slot whose
    post-download buffer again covers one full slot of the current chunk.
    """
    spec = session.spec
    if session.phase == PHASE_STARTUP:
        filled = session.buffer_kb + effective_kbps
        if filled >= spec.b_max_kb:
            session.buffer_kb = spec.b_max_kb
            session.delay_slots = slot - spec.arrival
            session.phase = PHASE_STEADY
        else:
            session.buffer_kb = filled
        return False

    rate = session.history[session.play_pos // session.chunk_size].bitrate_kbps
    if session.stalled:
        session.buffer_kb = min(session.buffer_kb + effective_kbps, spec.b_max_kb)
        if session.buffer_kb >= rate:
            session.stalled = False
            session.buffer_kb -= rate
            session.play_pos += 1
            return False
        session.stall_slots += 1
        return True

    pre = session.buffer_kb + effective_kbps - rate
    if pre <= 0:
        session.buffer_kb = 0.0
        session.stall_slots += 1
        session.stalled = True
        return True
    session.buffer_kb = min(pre, spec.b_max_kb)
    session.play_pos += 1
    return False


def _chunk_boundary(t: int, arrival: int, chunk: int) -> bool:
    return (t - arrival - 1) % chunk == 0


def run_simulation(cfg: ScenarioConfig, scheduler, seed: int = 0,
                   record_rows: bool = True, validate: bool = True) -> SimulationTrace:
    """Run one full simulation and return its trace.

    The run is strictly single-threaded and deterministic: clients are
    processed in (arrival, id) order within each slot, the scheduler is invoked
    only at chunk boundaries, and mid-chunk slots carry the previous decision.
    Non-infeasible decisions are re-checked against station capacity over the
    chunk window; a violation is a SchedulerContractError.  Decisions flagged
    infeasible are accepted with their block grant capped at what remains.
    """
    if validate:
        violations = validate_scenario(cfg)
        if violations:
            raise ValueError("invalid scenario: " + "; ".join(violations))

    chunk = cfg.chunk_size
    ladder_set = set(cfg.ladder.rates)
    station_ids = [s.id for s in cfg.stations]

    # Station tables, 1-based by slot (index 0 unused).
    capacity = {s.id: [0] + list(s.blocks) for s in cfg.stations}
    used = {s.id: [0] * (cfg.horizon + 1) for s in cfg.stations}

    # Per-client link constants (clients are stationary).
    thr = {}
    by_distance = {}
    for c in cfg.clients:
        dists = [
            (s.id, channel.distance(c.x_m, c.y_m, s.x_m, s.y_m)) for s in cfg.stations
        ]
        dists.sort(key=lambda kv: (kv[1], kv[0]))
        by_distance[c.id] = dists
        thr[c.id] = {
            s.id: channel.theoretical_throughput(
                s.p_max_mw, channel.distance(c.x_m, c.y_m, s.x_m, s.y_m), cfg.alpha
            )
            for s in cfg.stations
        }

    sessions = {c.id: ClientSession(spec=c, chunk_size=chunk) for c in cfg.clients}
    trace = SimulationTrace(
        scenario=cfg,
        scheduler_name=getattr(scheduler, "name", type(scheduler).__name__),
        seed=seed,
        sessions=sessions,
        used_blocks=used,
    )

    if hasattr(scheduler, "begin_run"):
        scheduler.begin_run(cfg, seed)

    arrivals = sorted(cfg.clients, key=lambda c: (c.arrival, c.id))
    next_arrival = 0
    active: list[ClientSession] = []

    for t in range(1, cfg.horizon + 1):
        # Clients whose first download slot is t (arrival slot A = t - 1).
        while next_arrival < len(arrivals) and arrivals[next_arrival].arrival == t - 1:
            active.append(sessions[arrivals[next_arrival].id])
            next_arrival += 1
        if not active:
            continue

        # Throughput-weighted occupancy before this slot's boundary decisions:
        # mid-chunk clients keep yesterday's assignment.
        assigned_thr_sum = {sid: 0.0 for sid in station_ids}
        deciders = []
        for sess in active:
            if _chunk_boundary(t, sess.spec.arrival, chunk):
                deciders.append(sess)
            else:
                assigned_thr_sum[sess.current.station_id] += thr[sess.spec.id][
                    sess.current.station_id
                ]

        for sess in deciders:
            cid = sess.spec.id
            p = (t - sess.spec.arrival - 1) // chunk + 1
            window = range(t, min(t + chunk, sess.spec.departure + 1))
            ctx = SlotContext(
                slot=t,
                client_id=cid,
                chunk_index=p,
                session=sess,
                cfg=cfg,
                stations_by_distance=by_distance[cid],
                thr=thr[cid],
                assigned_thr_sum=assigned_thr_sum,
                window=window,
                capacity=capacity,
                used=used,
            )
            decision = scheduler.decide(ctx)

            if decision.bitrate_kbps not in ladder_set:
                raise SchedulerContractError(
                    f"client {cid} slot {t}: bitrate {decision.bitrate_kbps} kbps "
                    f"is not on the ladder {cfg.ladder.rates}"
                )
            if decision.station_id not in capacity:
                raise SchedulerContractError(
                    f"client {cid} slot {t}: unknown station {decision.station_id}"
                )
            if decision.chunk_index != p or decision.start_slot != t:
                raise SchedulerContractError(
                    f"client {cid} slot {t}: decision indexed ({decision.chunk_index}, "
                    f"{decision.start_slot}), expected ({p}, {t})"
                )
            if not decision.infeasible and not ctx.fits(
                decision.station_id, decision.bitrate_kbps
            ):
                raise SchedulerContractError(
                    f"client {cid} slot {t}: decision ({decision.station_id}, "
                    f"{decision.bitrate_kbps} kbps) exceeds station capacity"
                )

            # Reserve blocks over the chunk window; an infeasible decision is
            # granted only what remains so station ledgers never exceed supply.
            k = decision.station_id
            link = thr[cid][k]
            shortfall = False
            for s in window:
                need = math.ceil(decision.bitrate_kbps * capacity[k][s] / link)
                grant = min(need, capacity[k][s] - used[k][s])
                used[k][s] += grant
                if grant < need:
                    shortfall = True
            if shortfall:
                trace.capacity_shortfalls += 1
            if decision.infeasible:
                trace.infeasible_decisions += 1

            sess.history.append(decision)
            sess.chunk_index = p
            assigned_thr_sum[k] += link

        # Proportional-fair sharing given the complete slot assignment.
        groups: dict[int, list[tuple[int, float]]] = {}
        for sess in active:
            k = sess.current.station_id
            groups.setdefault(k, []).append((sess.spec.id, thr[sess.spec.id][k]))
        eff_map: dict[int, float] = {}
        for k in sorted(groups):
            for cid, eff in channel.effective_throughputs(groups[k]):
                eff_map[cid] = eff

        departed = False
        for sess in active:
            cid = sess.spec.id
            eff = eff_map[cid]
            decision = sess.current
            k = decision.station_id
            phase_now = sess.phase
            stalled_now = update_buffer(sess, t, eff)

            # Per-slot utilization and per-chunk measured download rate.
            need = math.ceil(decision.bitrate_kbps * capacity[k][t] / thr[cid][k])
            sess.u_acc[k] = sess.u_acc.get(k, 0.0) + need / capacity[k][t]
            sess._chunk_eff_sum += eff
            if (t - sess.spec.arrival) % chunk == 0:
                sess.chunk_rates.append(sess._chunk_eff_sum / chunk)
                sess._chunk_eff_sum = 0.0

            trace.eff_total_kbps += eff
            trace.active_client_slots += 1
            if record_rows:
                trace.rows.append(
                    (t, cid, k, decision.bitrate_kbps, thr[cid][k], eff,
                     sess.buffer_kb, phase_now, stalled_now)
                )
            if t == sess.spec.departure:
                sess.phase = PHASE_FINISHED
                departed = True
        if departed:
            active = [s for s in active if s.phase != PHASE_FINISHED]

    return trace
