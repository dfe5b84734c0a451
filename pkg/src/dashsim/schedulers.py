"""Schedulers implementing the per-chunk decide() contract.

* greedy  -- centralized joint-utility maximizer: scans stations nearest
  first, prices every feasible (station, bitrate) pair with the incremental
  session objective, and keeps the argmax.
* bba     -- client-side buffer-threshold adaptation on the nearest station.
* rba     -- client-side trailing-average rate adaptation on the nearest station.
* oracle  -- exhaustive search over every per-chunk assignment (tiny instances
  only), used as the ground-truth optimum in tests.

Every decide() returns a ladder bitrate.  A decision that is not block-feasible
over its chunk window carries infeasible=True; the engine then caps the block
grant at whatever remains ("stall risk accepted").
"""

from __future__ import annotations

import itertools
import math

from dashsim import metrics
from dashsim.engine import ScheduleDecision, SlotContext, PHASE_STARTUP, run_simulation
from dashsim.scenario import ScenarioConfig, WeightConfig, validate_scenario

__all__ = [
    "Scheduler",
    "GreedyScheduler",
    "BbaScheduler",
    "RbaScheduler",
    "LowestRateScheduler",
    "FixedAssignmentScheduler",
    "OracleScheduler",
    "OracleGuardError",
    "brute_force_schedule",
    "make_scheduler",
    "SCHEDULER_NAMES",
]

SCHEDULER_NAMES = ("greedy", "bba", "rba", "oracle")

# BBA buffer-occupancy thresholds, as fractions of b_max, for a 6-rate ladder.
BBA_THRESHOLDS = (2 / 6, 3 / 6, 4 / 6, 4.5 / 6, 5 / 6)

# Exhaustive-search guard: the assignment space is (stations * rates) ** chunks.
ORACLE_MAX_CLIENTS = 3
ORACLE_MAX_STATIONS = 2
ORACLE_MAX_TOTAL_CHUNKS = 6
ORACLE_MAX_RATES = 3


class OracleGuardError(ValueError):
    """Instance too large for exhaustive search."""


class Scheduler:
    """Base scheduler; subclasses implement decide(ctx)."""

    name = "base"

    def begin_run(self, cfg: ScenarioConfig, seed: int = 0) -> None:
        """Reset any per-run state; called by the engine before slot 1."""

    def decide(self, ctx: SlotContext) -> ScheduleDecision:
        raise NotImplementedError


class LowestRateScheduler(Scheduler):
    """Always the nearest station at the ladder floor (conservative baseline)."""

    name = "lowest"

    def decide(self, ctx):
        station = ctx.nearest_station
        rate = ctx.cfg.ladder.floor
        return ScheduleDecision(
            chunk_index=ctx.chunk_index,
            station_id=station,
            bitrate_kbps=rate,
            start_slot=ctx.slot,
            infeasible=not ctx.fits(station, rate),
        )


class BbaScheduler(Scheduler):
    """Buffer-based adaptation: the client maps its buffer occupancy to a rate.

    The first chunk is fetched at the top rate; afterwards the buffer fraction
    selects one of the six ladder rates through five fixed thresholds.  The
    station is always the nearest one; the heuristic is capacity-blind, so a
    choice that does not fit is simply flagged.
    """

    name = "bba"

    def begin_run(self, cfg, seed=0):
        if len(cfg.ladder) != 6:
            raise ValueError(
                f"bba needs the 6-rate ladder its thresholds are defined for, "
                f"got {len(cfg.ladder)} rates"
            )

    def decide(self, ctx):
        ladder = ctx.cfg.ladder.rates
        if ctx.chunk_index == 1:
            rate = ladder[-1]
        else:
            ratio = ctx.session.buffer_kb / ctx.session.spec.b_max_kb
            idx = 0
            for threshold in BBA_THRESHOLDS:
                if ratio >= threshold:
                    idx += 1
            rate = ladder[idx]
        station = ctx.nearest_station
        return ScheduleDecision(
            chunk_index=ctx.chunk_index,
            station_id=station,
            bitrate_kbps=rate,
            start_slot=ctx.slot,
            infeasible=not ctx.fits(station, rate),
        )


class RbaScheduler(Scheduler):
    """Rate-based adaptation: highest rate sustainable by the trailing average
    of the last `window` measured chunk download rates.

    Chunks 1..window start conservatively at the ladder floor; the station is
    always the nearest one.
    """

    name = "rba"

    def __init__(self, window: int = 3):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window

    def decide(self, ctx):
        ladder = ctx.cfg.ladder.rates
        if ctx.chunk_index <= self.window:
            rate = ladder[0]
        else:
            recent = ctx.session.chunk_rates[-self.window:]
            avg = sum(recent) / len(recent)
            rate = ladder[0]
            for r in ladder:
                if r <= avg:
                    rate = r
        station = ctx.nearest_station
        return ScheduleDecision(
            chunk_index=ctx.chunk_index,
            station_id=station,
            bitrate_kbps=rate,
            start_slot=ctx.slot,
            infeasible=not ctx.fits(station, rate),
        )


class GreedyScheduler(Scheduler):
    """Centralized greedy: pick the feasible (station, bitrate) maximizing the
    incremental session objective.

    Stations are scanned in order of distance; for each, every ladder rate is
    checked for block feasibility over the chunk window.  Steady-state
    candidates additionally need one chunk of buffer headroom
    (0 < buffer - rate <= b_max) and must be sustainable: if conditions
    persisted, the buffer at the candidate station's projected throughput share
    must not run dry before the session ends.  That keeps the selected rate
    tracking the obtainable share and rules out stall-bound choices.

    Candidates are ranked by the chunk's own contribution to the session
    objective: the candidate quality (un-normalized, so rate choice stays
    responsive over long sessions), the startup delay (projected from the
    candidate's share while filling, fixed afterwards), the quality step from
    the previous chunk, the log of total allocated bitrate, and the deviation
    of the client's per-station load.  Ties resolve to the nearer station, then
    the lower rate.  When nothing is feasible the fallback is the nearest
    station at the floor rate, flagged infeasible.  The decision carries the
    full session-form objective so the final chunk's value equals the
    trace-recomputed utility.
    """

    name = "greedy"

    def __init__(self, weights: WeightConfig | None = None):
        self.weights = weights
        self._q = {}
        self._agg = {}

    def begin_run(self, cfg, seed=0):
        if self.weights is None:
            self.weights = cfg.weights
        self._q = {r: metrics.quality_of_rate(r, cfg.ladder) for r in cfg.ladder.rates}
        self._agg = {}

    def decide(self, ctx):
        w = self.weights
        sess = ctx.session
        cfg = ctx.cfg
        chunk = cfg.chunk_size
        spec = sess.spec
        session_slots = spec.departure - spec.arrival
        p = ctx.chunk_index

        q_sum, e_sum, r_sum, last_q = self._agg.get(spec.id, (0.0, 0.0, 0, None))
        in_startup = sess.phase == PHASE_STARTUP
        fixed_delay = sess.delay_slots if sess.delay_slots is not None else 0

        # Running sums over stations for O(1) candidate load deviation.
        # Utilization is the session-mean fraction of a station's blocks.
        inv_slots = 1.0 / session_slots
        n_stations = len(cfg.stations)
        u_sum = 0.0
        u_sq = 0.0
        for sid, _ in ctx.stations_by_distance:
            u = sess.u_acc.get(sid, 0.0) * inv_slots
            u_sum += u
            u_sq += u * u

        best = None   # (objective, station, rate, load_delta)
        remaining = spec.departure - ctx.slot + 1
        for sid, _dist in ctx.stations_by_distance:
            thr = ctx.thr[sid]
            eff_proj = thr * thr / (ctx.assigned_thr_sum[sid] + thr)
            if in_startup:
                delay = (ctx.slot - 1 - spec.arrival) + math.ceil(
                    (spec.b_max_kb - sess.buffer_kb) / eff_proj
                )
            else:
                delay = fixed_delay
            for rate in cfg.ladder.rates:
                if not in_startup:
                    if not (0 < sess.buffer_kb - rate <= spec.b_max_kb):
                        continue
                    if sess.buffer_kb + (eff_proj - rate) * remaining <= 0:
                        continue
                feasible, delta = ctx.fits_and_load(sid, rate)
                if not feasible:
                    continue
                score = self._rank(
                    w, r_sum, last_q, delay, sid, rate, delta * inv_slots,
                    sess, inv_slots, u_sum, u_sq, n_stations, chunk,
                )
                if best is None or score > best[0]:
                    best = (score, sid, rate, delta)

        if best is None:
            sid = ctx.nearest_station
            rate = cfg.ladder.floor
            _, delta = ctx.fits_and_load(sid, rate)
            infeasible = True
        else:
            _, sid, rate, delta = best
            infeasible = False
        if in_startup:
            thr = ctx.thr[sid]
            eff_proj = thr * thr / (ctx.assigned_thr_sum[sid] + thr)
            delay = (ctx.slot - 1 - spec.arrival) + math.ceil(
                (spec.b_max_kb - sess.buffer_kb) / eff_proj
            )
        else:
            delay = fixed_delay

        # Session-form objective for the chosen pair (two-pass deviation), so
        # the final chunk's recorded value matches a from-scratch
        # recomputation of the client's utility.
        objective = self._session_objective(
            w, chunk, session_slots, q_sum, e_sum, r_sum, last_q,
            delay, sid, rate, delta, sess,
            [s for s, _ in ctx.stations_by_distance],
        )

        q = self._q[rate]
        self._agg[spec.id] = (
            q_sum + q,
            e_sum + (abs(q - last_q) if last_q is not None else 0.0),
            r_sum + rate,
            q,
        )
        return ScheduleDecision(
            chunk_index=p,
            station_id=sid,
            bitrate_kbps=rate,
            start_slot=ctx.slot,
            infeasible=infeasible,
            objective=objective,
        )

    def _rank(self, w, r_sum, last_q, delay, sid, rate, delta_u, sess,
              inv_slots, u_sum, u_sq, n_stations, chunk):
        q = self._q[rate]
        step = abs(q - last_q) if last_q is not None else 0.0
        pf = math.log(chunk * (r_sum + rate))
        u_old = sess.u_acc.get(sid, 0.0) * inv_slots
        u_new = u_old + delta_u
        s1 = u_sum - u_old + u_new
        s2 = u_sq - u_old * u_old + u_new * u_new
        sd = math.sqrt(max(s2 / n_stations - (s1 / n_stations) ** 2, 0.0))
        return metrics.combine_utility(q, delay, step, pf, sd, w)

    def _session_objective(self, w, chunk, session_slots, q_sum, e_sum, r_sum,
                           last_q, delay, sid, rate, delta, sess, station_ids):
        q = self._q[rate]
        aq = chunk * (q_sum + q) / session_slots
        e = e_sum + (abs(q - last_q) if last_q is not None else 0.0)
        pf = math.log(chunk * (r_sum + rate))
        values = [
            (sess.u_acc.get(s, 0.0) + (delta if s == sid else 0.0)) / session_slots
            for s in station_ids
        ]
        mean = sum(values) / len(values)
        sd = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
        return metrics.combine_utility(aq, delay, e, pf, sd, w)


class FixedAssignmentScheduler(Scheduler):
    """Replays a fixed per-chunk plan: client id -> [(station, rate), ...]."""

    name = "fixed"

    def __init__(self, plan: dict[int, list[tuple[int, int]]]):
        self.plan = plan

    def decide(self, ctx):
        station, rate = self.plan[ctx.client_id][ctx.chunk_index - 1]
        return ScheduleDecision(
            chunk_index=ctx.chunk_index,
            station_id=station,
            bitrate_kbps=rate,
            start_slot=ctx.slot,
            infeasible=not ctx.fits(station, rate),
        )


def brute_force_schedule(cfg: ScenarioConfig):
    """Exhaustively search every per-chunk (station, rate) assignment.

    Simulates each assignment, discards infeasible ones (any block shortfall or
    any stall), and returns (plan, utility) for the assignment maximizing the
    summed per-client utility.  Guarded to tiny instances; the search space is
    (stations * rates) ** total_chunks.
    """
    if len(cfg.clients) > ORACLE_MAX_CLIENTS:
        raise OracleGuardError(
            f"oracle guard: at most {ORACLE_MAX_CLIENTS} clients, got {len(cfg.clients)}"
        )
    if len(cfg.stations) > ORACLE_MAX_STATIONS:
        raise OracleGuardError(
            f"oracle guard: at most {ORACLE_MAX_STATIONS} stations, got {len(cfg.stations)}"
        )
    if len(cfg.ladder) > ORACLE_MAX_RATES:
        raise OracleGuardError(
            f"oracle guard: at most {ORACLE_MAX_RATES} ladder rates, got {len(cfg.ladder)}"
        )
    chunk_counts = [(c.id, cfg.num_chunks(c)) for c in cfg.clients]
    total_chunks = sum(n for _, n in chunk_counts)
    if total_chunks > ORACLE_MAX_TOTAL_CHUNKS:
        raise OracleGuardError(
            f"oracle guard: at most {ORACLE_MAX_TOTAL_CHUNKS} total chunks, got {total_chunks}"
        )
    violations = validate_scenario(cfg)
    if violations:
        raise ValueError("invalid scenario: " + "; ".join(violations))

    options = [
        (s.id, r) for s in cfg.stations for r in cfg.ladder.rates
    ]
    best_plan = None
    best_utility = -math.inf
    for combo in itertools.product(options, repeat=total_chunks):
        plan = {}
        pos = 0
        for cid, n in chunk_counts:
            plan[cid] = list(combo[pos:pos + n])
            pos += n
        trace = run_simulation(
            cfg, FixedAssignmentScheduler(plan), record_rows=False, validate=False
        )
        if trace.capacity_shortfalls or trace.total_stall_slots:
            continue
        total = sum(
            metrics.compute_client_metrics(trace, c.id).utility for c in cfg.clients
        )
        if total > best_utility:
            best_plan, best_utility = plan, total
    if best_plan is None:
        raise ValueError("no feasible assignment exists for this instance")
    return best_plan, best_utility


class OracleScheduler(Scheduler):
    """Replays the exhaustive-search optimum; only valid on guarded instances."""

    name = "oracle"

    def __init__(self):
        self._replay = None
        self.optimal_utility = None

    def begin_run(self, cfg, seed=0):
        plan, self.optimal_utility = brute_force_schedule(cfg)
        self._replay = FixedAssignmentScheduler(plan)

    def decide(self, ctx):
        return self._replay.decide(ctx)


def make_scheduler(name: str, cfg: ScenarioConfig) -> Scheduler:
    """Build a scheduler by its public name: greedy, bba, rba, or oracle."""
    if name == "greedy":
        return GreedyScheduler(cfg.weights)
    if name == "bba":
        return BbaScheduler()
    if name == "rba":
        return RbaScheduler(cfg.rba_window)
    if name == "oracle":
        return OracleScheduler()
    raise ValueError(f"unknown scheduler {name!r}; expected one of {SCHEDULER_NAMES}")
