"""Wireless link model: deterministic path-loss throughput and the
proportional-fair share each client receives when several clients are served
by the same station in a slot.
"""

from __future__ import annotations

import math

__all__ = ["theoretical_throughput", "effective_throughputs", "distance"]


def distance(ax: float, ay: float, bx: float, by: float) -> float:
    return math.hypot(ax - bx, ay - by)


def theoretical_throughput(
    p_max_mw: float,
    distance_m: float,
    alpha: float,
    kappa: float = 1.0,
    d_min_m: float = 1.0,
) -> float:
    """Link throughput in kbps under power-law path attenuation.

    Returns kappa * p_max / max(distance, d_min)**alpha.  kappa absorbs the
    unit conversion (defaults to 1 kbps per mW*m^-alpha) and d_min guards the
    near-field singularity.
    """
    if p_max_mw <= 0:
        raise ValueError(f"p_max_mw must be positive, got {p_max_mw}")
    if not (2.0 <= alpha <= 5.0):
        raise ValueError(f"alpha must be in [2, 5], got {alpha}")
    return kappa * p_max_mw / max(distance_m, d_min_m) ** alpha


def effective_throughputs(
    assigned: list[tuple[int, float]],
) -> list[tuple[int, float]]:
    """Proportional-fair throughput split among co-assigned clients.

    Each client i with theoretical rate Thr_i receives Thr_i**2 / sum_j Thr_j,
    so a client's share is proportional to its own link quality.  A single
    occupant keeps its full theoretical rate.
    """
    if not assigned:
        raise ValueError("effective_throughputs: no clients assigned")
    total = 0.0
    for cid, thr in assigned:
        if thr <= 0:
            raise ValueError(f"client {cid}: theoretical throughput must be positive")
        total += thr
    return [(cid, thr * thr / total) for cid, thr in assigned]
