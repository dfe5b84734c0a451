"""Experiment scenarios: generation, validation, and (de)serialization.

A scenario pins every input of a run: the slotted horizon, the bitrate ladder
replicated on each edge server, station placement with per-slot resource
blocks, the client population with arrival/departure windows, and the
objective weights.  Scenario files round-trip bit-exactly, so any run is
reproducible from its file without re-seeding.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "ScenarioError",
    "BitrateLadder",
    "WeightConfig",
    "StationSpec",
    "ClientSpec",
    "ScenarioConfig",
    "GenerationParams",
    "paper_params",
    "desk_params",
    "generate_scenario",
    "validate_scenario",
    "save_scenario",
    "load_scenario",
    "scenario_to_json",
    "scenario_hash",
]

# Defaults for the full-scale experiment profile.
DEFAULT_LADDER_KBPS = (60, 90, 110, 130, 170, 220)
DEFAULT_AREA_M = (400.0, 1000.0)
DEFAULT_P_MAX_MW = 3.6e6
# Three chunks of buffered video at the top ladder rate (220 kbps * 5 s * 3).
DEFAULT_B_MAX_KB = 3300.0

NEAR_RADIUS_M = 100.0     # far/near placement: "near" clients sit within this radius of a station
BORDER_BAND_FRACTION = 0.1


class ScenarioError(ValueError):
    """A scenario file or config violates the documented format or an invariant."""


@dataclass(frozen=True)
class BitrateLadder:
    """Discrete set of chunk encodings, in kbps, identical on every server."""

    rates: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(int(r) for r in self.rates))

    @property
    def floor(self) -> int:
        return self.rates[0]

    @property
    def top(self) -> int:
        return self.rates[-1]

    def __len__(self) -> int:
        return len(self.rates)

    def __contains__(self, rate) -> bool:
        return rate in self.rates


@dataclass(frozen=True)
class WeightConfig:
    """Objective weights: beta/theta/mu across terms, rho/omega/gamma within QoE."""

    beta: float = 0.7
    theta: float = 0.25
    mu: float = 0.05
    rho: float = 0.7
    omega: float = 0.05
    gamma: float = 0.25


@dataclass(frozen=True)
class StationSpec:
    """One base station / edge server: position, power, per-slot resource blocks."""

    id: int
    x_m: float
    y_m: float
    p_max_mw: float
    blocks: tuple[int, ...]   # length == horizon, entry t-1 is the supply at slot t


@dataclass(frozen=True)
class ClientSpec:
    """One streaming client: position, session window, buffer target."""

    id: int
    group: int
    x_m: float
    y_m: float
    arrival: int      # slot A; downloads occupy slots A+1 .. D
    departure: int    # slot D; (D - A) is a whole number of chunks
    b_max_kb: float


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete, self-contained description of one experiment."""

    horizon: int
    chunk_size: int
    area: tuple[float, float]   # (width, height) in meters
    alpha: float
    ladder: BitrateLadder
    stations: tuple[StationSpec, ...]
    clients: tuple[ClientSpec, ...]
    weights: WeightConfig
    rba_window: int

    def num_chunks(self, client: ClientSpec) -> int:
        return (client.departure - client.arrival) // self.chunk_size


@dataclass(frozen=True)
class GenerationParams:
    """Knobs for synthetic scenario generation."""

    clients: int
    stations: int
    horizon: int = 3600
    chunk_size: int = 5
    area: tuple[float, float] = DEFAULT_AREA_M
    alpha: float = 2.0
    ladder: tuple[int, ...] = DEFAULT_LADDER_KBPS
    p_max_mw: float = DEFAULT_P_MAX_MW
    arrival_window: int = 1200
    session_min: int = 1000
    session_max: int = 2000
    blocks_min: int = 100
    blocks_max: int = 200
    b_max_kb: float = DEFAULT_B_MAX_KB
    weights: WeightConfig = field(default_factory=WeightConfig)
    rba_window: int = 3
    placement: str = "uniform"   # "uniform" | "far_near"


def paper_params(clients: int = 100, **overrides) -> GenerationParams:
    """Full-scale defaults: 12 stations, one-hour horizon."""
    return replace(GenerationParams(clients=clients, stations=12), **overrides)


def desk_params(clients: int = 40, **overrides) -> GenerationParams:
    """Reduced preset that runs in seconds: 4 stations, 900-slot horizon.

    Arrival window and session lengths are scaled so that per-station
    concurrency stays in the low single digits, which keeps buffer dynamics
    (and therefore scheduler differences) visible at small client counts.
    """
    return replace(
        GenerationParams(
            clients=clients,
            stations=4,
            horizon=900,
            arrival_window=600,
            session_min=100,
            session_max=200,
        ),
        **overrides,
    )


def _grid_dims(k: int, area: tuple[float, float]) -> tuple[int, int]:
    """Pick the (nx, ny) factorization of k whose grid cells are closest to square."""
    width, height = area
    best = None
    for nx in range(1, k + 1):
        if k % nx:
            continue
        ny = k // nx
        gap = abs(width / nx - height / ny)
        if best is None or gap < best[0]:
            best = (gap, nx, ny)
    return best[1], best[2]


def station_positions(k: int, area: tuple[float, float]) -> list[tuple[float, float]]:
    """Equally spaced grid of k stations (cell centers) filling the area."""
    nx, ny = _grid_dims(k, area)
    width, height = area
    return [
        ((ix + 0.5) * width / nx, (iy + 0.5) * height / ny)
        for iy in range(ny)
        for ix in range(nx)
    ]


def _uniform_point(rng, area):
    return float(rng.uniform(0.0, area[0])), float(rng.uniform(0.0, area[1]))


def _border_point(rng, area):
    # Rejection-sample the outer band (10% of each dimension from the edge).
    width, height = area
    bx, by = width * BORDER_BAND_FRACTION, height * BORDER_BAND_FRACTION
    while True:
        x, y = _uniform_point(rng, area)
        if x < bx or x > width - bx or y < by or y > height - by:
            return x, y


def _near_station_point(rng, area, positions):
    # Uniform in a disk of NEAR_RADIUS_M around a random station, kept inside the area.
    width, height = area
    sx, sy = positions[int(rng.integers(0, len(positions)))]
    for _ in range(100):
        radius = NEAR_RADIUS_M * math.sqrt(float(rng.uniform(0.0, 1.0)))
        angle = 2.0 * math.pi * float(rng.uniform(0.0, 1.0))
        x, y = sx + radius * math.cos(angle), sy + radius * math.sin(angle)
        if 0.0 <= x <= width and 0.0 <= y <= height:
            return x, y
    return min(max(sx, 0.0), width), min(max(sy, 0.0), height)


def generate_scenario(params: GenerationParams, seed: int) -> ScenarioConfig:
    """Draw a scenario from the given parameters, deterministically in the seed.

    Stations are placed on an equal-spacing grid; client positions are uniform
    over the area (or split far/near when requested); arrivals are uniform over
    the arrival window; session lengths are uniform over
    [session_min, session_max], truncated down to whole chunks and clamped so
    the session ends within the horizon.
    """
    if params.clients <= 0:
        raise ScenarioError(f"clients: must be positive, got {params.clients}")
    if params.stations <= 0:
        raise ScenarioError(f"stations: must be positive, got {params.stations}")
    if params.horizon < params.session_max:
        raise ScenarioError(
            f"horizon: {params.horizon} is shorter than the maximum possible "
            f"session ({params.session_max})"
        )
    if params.session_min < params.chunk_size:
        raise ScenarioError(
            f"session_min: must cover at least one chunk ({params.chunk_size} slots)"
        )
    if params.arrival_window + params.chunk_size > params.horizon:
        raise ScenarioError(
            "arrival_window: latest arrival leaves no room for a full chunk"
        )

    rng = np.random.default_rng(seed)
    chunk = params.chunk_size
    positions = station_positions(params.stations, params.area)

    stations = tuple(
        StationSpec(
            id=k + 1,
            x_m=positions[k][0],
            y_m=positions[k][1],
            p_max_mw=params.p_max_mw,
            blocks=tuple(
                int(b)
                for b in rng.integers(
                    params.blocks_min, params.blocks_max + 1, size=params.horizon
                )
            ),
        )
        for k in range(params.stations)
    )

    n_far = round(0.3 * params.clients) if params.placement == "far_near" else 0
    clients = []
    for i in range(1, params.clients + 1):
        arrival = int(rng.integers(1, params.arrival_window + 1))
        length = int(rng.integers(params.session_min, params.session_max + 1))
        length -= length % chunk
        departure = arrival + length
        if departure > params.horizon:
            departure = arrival + ((params.horizon - arrival) // chunk) * chunk
        if params.placement == "far_near":
            x, y = (
                _border_point(rng, params.area)
                if i <= n_far
                else _near_station_point(rng, params.area, positions)
            )
        else:
            x, y = _uniform_point(rng, params.area)
        clients.append(
            ClientSpec(
                id=i,
                group=1,
                x_m=x,
                y_m=y,
                arrival=arrival,
                departure=departure,
                b_max_kb=params.b_max_kb,
            )
        )

    return ScenarioConfig(
        horizon=params.horizon,
        chunk_size=chunk,
        area=params.area,
        alpha=params.alpha,
        ladder=BitrateLadder(params.ladder),
        stations=stations,
        clients=tuple(clients),
        weights=params.weights,
        rba_window=params.rba_window,
    )


def validate_scenario(cfg: ScenarioConfig, strict: bool = False) -> list[str]:
    """Return all invariant violations, one message per violation (empty if valid).

    With strict=True, additionally requires rho + omega + gamma == 1.
    """
    v: list[str] = []
    if cfg.chunk_size < 1:
        v.append(f"chunk_size: must be >= 1, got {cfg.chunk_size}")
    if cfg.horizon < cfg.chunk_size:
        v.append(f"horizon: must be >= chunk_size, got {cfg.horizon}")
    if not (2.0 <= cfg.alpha <= 5.0):
        v.append(f"path_loss_alpha: must be in [2, 5], got {cfg.alpha}")
    if cfg.area[0] <= 0 or cfg.area[1] <= 0:
        v.append(f"area: dimensions must be positive, got {cfg.area}")
    if cfg.rba_window < 1:
        v.append(f"rba_window: must be >= 1, got {cfg.rba_window}")

    rates = cfg.ladder.rates
    if not rates:
        v.append("ladder_kbps: must be non-empty")
    else:
        if any(r <= 0 for r in rates):
            v.append(f"ladder_kbps: all rates must be positive, got {rates}")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            v.append(f"ladder_kbps: rates must be strictly ascending, got {rates}")

    w = cfg.weights
    for name in ("beta", "theta", "mu", "rho", "omega", "gamma"):
        value = getattr(w, name)
        if not (0.0 <= value <= 1.0):
            v.append(f"weights.{name}: must be in [0, 1], got {value}")
    if strict and abs(w.rho + w.omega + w.gamma - 1.0) > 1e-9:
        v.append(
            f"weights: rho + omega + gamma must sum to 1 in strict mode, "
            f"got {w.rho + w.omega + w.gamma}"
        )

    seen_station = set()
    for idx, st in enumerate(cfg.stations):
        path = f"stations[{idx}]"
        if st.id in seen_station:
            v.append(f"{path}.id: duplicate station id {st.id}")
        seen_station.add(st.id)
        if st.p_max_mw <= 0:
            v.append(f"{path}.p_max_mw: must be positive, got {st.p_max_mw}")
        if not (0.0 <= st.x_m <= cfg.area[0] and 0.0 <= st.y_m <= cfg.area[1]):
            v.append(f"{path}: position ({st.x_m}, {st.y_m}) outside area {cfg.area}")
        if len(st.blocks) != cfg.horizon:
            v.append(
                f"{path}.blocks: length {len(st.blocks)} != horizon {cfg.horizon}"
            )
        if any(b < 1 for b in st.blocks):
            v.append(f"{path}.blocks: all entries must be >= 1")

    seen_client = set()
    for idx, c in enumerate(cfg.clients):
        path = f"clients[{idx}]"
        if c.id in seen_client:
            v.append(f"{path}.id: duplicate client id {c.id}")
        seen_client.add(c.id)
        if not (1 <= c.arrival < c.departure <= cfg.horizon):
            v.append(
                f"{path}: need 1 <= arrival < departure <= horizon, "
                f"got arrival={c.arrival} departure={c.departure}"
            )
        elif (c.departure - c.arrival) % cfg.chunk_size != 0:
            v.append(
                f"{path}: session length {c.departure - c.arrival} is not a "
                f"multiple of chunk_size {cfg.chunk_size}"
            )
        if c.b_max_kb <= 0:
            v.append(f"{path}.b_max_kb: must be positive, got {c.b_max_kb}")
    return v


def _scenario_dict(cfg: ScenarioConfig) -> dict:
    return {
        "horizon": cfg.horizon,
        "chunk_size": cfg.chunk_size,
        "area": {"width_m": cfg.area[0], "height_m": cfg.area[1]},
        "alpha": cfg.alpha,
        "ladder_kbps": list(cfg.ladder.rates),
        "stations": [
            {
                "id": s.id,
                "x_m": s.x_m,
                "y_m": s.y_m,
                "p_max_mw": s.p_max_mw,
                "blocks": list(s.blocks),
            }
            for s in cfg.stations
        ],
        "clients": [
            {
                "id": c.id,
                "group": c.group,
                "x_m": c.x_m,
                "y_m": c.y_m,
                "arrival": c.arrival,
                "departure": c.departure,
                "b_max_kb": c.b_max_kb,
            }
            for c in cfg.clients
        ],
        "weights": {
            "beta": cfg.weights.beta,
            "theta": cfg.weights.theta,
            "mu": cfg.weights.mu,
            "rho": cfg.weights.rho,
            "omega": cfg.weights.omega,
            "gamma": cfg.weights.gamma,
        },
        "rba_window": cfg.rba_window,
    }


def scenario_to_json(cfg: ScenarioConfig) -> str:
    """Canonical JSON text for the scenario (stable key order, stable floats)."""
    return json.dumps(_scenario_dict(cfg), indent=2) + "\n"


def scenario_hash(cfg: ScenarioConfig) -> str:
    """Short content hash identifying the scenario in result rows."""
    digest = hashlib.sha256(scenario_to_json(cfg).encode("utf-8")).hexdigest()
    return digest[:12]


def save_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(scenario_to_json(cfg))


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}{key}: missing required key")
    return obj[key]


def load_scenario(path) -> ScenarioConfig:
    """Parse and fully validate a scenario file; raises ScenarioError on any problem."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"not valid JSON: {exc}") from exc

    area = _require(raw, "area", "")
    try:
        cfg = ScenarioConfig(
            horizon=int(_require(raw, "horizon", "")),
            chunk_size=int(_require(raw, "chunk_size", "")),
            area=(
                float(_require(area, "width_m", "area.")),
                float(_require(area, "height_m", "area.")),
            ),
            alpha=float(_require(raw, "alpha", "")),
            ladder=BitrateLadder(tuple(_require(raw, "ladder_kbps", ""))),
            stations=tuple(
                StationSpec(
                    id=int(_require(s, "id", f"stations[{i}].")),
                    x_m=float(_require(s, "x_m", f"stations[{i}].")),
                    y_m=float(_require(s, "y_m", f"stations[{i}].")),
                    p_max_mw=float(_require(s, "p_max_mw", f"stations[{i}].")),
                    blocks=tuple(int(b) for b in _require(s, "blocks", f"stations[{i}].")),
                )
                for i, s in enumerate(_require(raw, "stations", ""))
            ),
            clients=tuple(
                ClientSpec(
                    id=int(_require(c, "id", f"clients[{i}].")),
                    group=int(_require(c, "group", f"clients[{i}].")),
                    x_m=float(_require(c, "x_m", f"clients[{i}].")),
                    y_m=float(_require(c, "y_m", f"clients[{i}].")),
                    arrival=int(_require(c, "arrival", f"clients[{i}].")),
                    departure=int(_require(c, "departure", f"clients[{i}].")),
                    b_max_kb=float(_require(c, "b_max_kb", f"clients[{i}].")),
                )
                for i, c in enumerate(_require(raw, "clients", ""))
            ),
            weights=WeightConfig(
                beta=float(_require(raw["weights"], "beta", "weights.")),
                theta=float(_require(raw["weights"], "theta", "weights.")),
                mu=float(_require(raw["weights"], "mu", "weights.")),
                rho=float(_require(raw["weights"], "rho", "weights.")),
                omega=float(_require(raw["weights"], "omega", "weights.")),
                gamma=float(_require(raw["weights"], "gamma", "weights.")),
            )
            if "weights" in raw
            else _require(raw, "weights", ""),
            rba_window=int(_require(raw, "rba_window", "")),
        )
    except (TypeError, KeyError) as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from exc

    violations = validate_scenario(cfg)
    if violations:
        raise ScenarioError("; ".join(violations))
    return cfg
