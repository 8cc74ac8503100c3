"""Scenario files, seeded scenario generation and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from hflopt import association as assoc_mod
from hflopt.accuracy import AccuracyParams, gamma_from_smoothness
from hflopt.optimizer import solve
from hflopt.scenario import (
    EdgeServer,
    Scenario,
    Ue,
    dbm_to_w,
    wavelength_from_ghz,
)

AREA_SIDE_M = 500.0
EDGE_PITCH_M = 150.0

# Deployment defaults. CPU frequency, transmit power and carrier follow the
# reference setup; the rest are artifact choices.
DEFAULTS: dict[str, float] = {
    "cpu_freq_max_hz": 2e9,
    "tx_power_max_dbm": 10.0,
    "carrier_ghz": 28.0,
    "noise_power_w": 1e-13,
    "cycles_per_sample": 2e4,
    "dataset_size": 500,
    "model_size_bits": 1e6,
    "per_ue_bandwidth_hz": 1e6,
    "uplink_rate_to_cloud_bps": 5e5,
    "edge_model_size_bits": 1e6,
    "big_c": 1.0,
    "epsilon": 0.25,
}

_POWER = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {
            "type": "object",
            "properties": {"dbm": {"type": "number"}},
            "required": ["dbm"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"w": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["w"],
            "additionalProperties": False,
        },
    ]
}
_POS = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["ues", "edges"],
    "properties": {
        "ues": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["position"],
                "properties": {
                    "id": {"type": "integer"},
                    "position": _POS,
                    "cpu_freq_max_hz": _POSITIVE,
                    "cycles_per_sample": _POSITIVE,
                    "dataset_size": {"type": "integer", "minimum": 1},
                    "tx_power_max": _POWER,
                    "model_size_bits": _POSITIVE,
                },
            },
        },
        "edges": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "integer"},
                    "position": _POS,
                    "total_bandwidth_hz": _POSITIVE,
                    "per_ue_bandwidth_hz": _POSITIVE,
                    "uplink_rate_to_cloud_bps": _POSITIVE,
                    "edge_model_size_bits": {"type": "number", "minimum": 0},
                },
            },
        },
        "noise_power_w": _POWER,
        "carrier_ghz": _POSITIVE,
        "accuracy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "zeta": _POSITIVE,
                "gamma": _POSITIVE,
                "big_c": _POSITIVE,
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "smoothness_l": _POSITIVE,
                "strong_convexity_beta": _POSITIVE,
                "delta": _POSITIVE,
            },
        },
    },
}


class ScenarioError(ValueError):
    """Scenario document failed validation."""


def _watts(value) -> float:
    if isinstance(value, dict):
        return dbm_to_w(value["dbm"]) if "dbm" in value else float(value["w"])
    return float(value)


def edge_grid_positions(num_edges: int, side: float = AREA_SIDE_M, pitch: float = EDGE_PITCH_M):
    """The ``num_edges`` slots nearest the middle of a centred
    ceil(sqrt(M)) x ceil(sqrt(M)) grid; ties by row, then column."""
    k = math.ceil(math.sqrt(num_edges))
    offsets = (np.arange(k) - (k - 1) / 2.0) * pitch
    slots = sorted(
        ((float(x), float(y)) for y in offsets for x in offsets),
        key=lambda p: (round(math.hypot(*p), 9), p[1], p[0]),
    )
    return [(x + side / 2.0, y + side / 2.0) for x, y in slots[:num_edges]]


def _draw_constants(rng: np.random.Generator) -> tuple[int, int]:
    zeta, gamma = rng.integers(1, 11, size=2)
    return int(zeta), int(gamma)


def scenario_from_dict(doc: dict, seed: int = 0) -> Scenario:
    """Validate a scenario document and build a :class:`Scenario`.

    ``zeta``/``gamma`` missing from ``accuracy`` are drawn as integers in
    [1, 10] from ``seed``; ``gamma`` is derived from L, beta and delta when
    those are given instead.
    """
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}") from None

    ues = []
    for i, u in enumerate(doc["ues"]):
        ues.append(
            Ue(
                id=u.get("id", i),
                position=tuple(float(v) for v in u["position"]),
                cpu_freq_max=u.get("cpu_freq_max_hz", DEFAULTS["cpu_freq_max_hz"]),
                cycles_per_sample=u.get("cycles_per_sample", DEFAULTS["cycles_per_sample"]),
                dataset_size=int(u.get("dataset_size", DEFAULTS["dataset_size"])),
                tx_power_max=_watts(u.get("tx_power_max", {"dbm": DEFAULTS["tx_power_max_dbm"]})),
                model_size=u.get("model_size_bits", DEFAULTS["model_size_bits"]),
            )
        )
    sites = edge_grid_positions(len(doc["edges"]))
    per_ue_default = DEFAULTS["per_ue_bandwidth_hz"]
    default_cap = math.ceil(len(ues) / len(doc["edges"]))
    edges = []
    for j, e in enumerate(doc["edges"]):
        per_ue = e.get("per_ue_bandwidth_hz", per_ue_default)
        edges.append(
            EdgeServer(
                id=e.get("id", j),
                position=tuple(float(v) for v in e.get("position", sites[j])),
                total_bandwidth=e.get("total_bandwidth_hz", per_ue * default_cap),
                per_ue_bandwidth=per_ue,
                uplink_rate_to_cloud=e.get("uplink_rate_to_cloud_bps", DEFAULTS["uplink_rate_to_cloud_bps"]),
                edge_model_size=e.get("edge_model_size_bits", DEFAULTS["edge_model_size_bits"]),
            )
        )

    acc = dict(doc.get("accuracy", {}))
    zeta, gamma = _draw_constants(np.random.default_rng(seed))
    if "gamma" not in acc and all(k in acc for k in ("smoothness_l", "strong_convexity_beta", "delta")):
        acc["gamma"] = gamma_from_smoothness(acc["smoothness_l"], acc["strong_convexity_beta"], acc["delta"])
    acc.setdefault("zeta", zeta)
    acc.setdefault("gamma", gamma)
    acc.setdefault("big_c", DEFAULTS["big_c"])
    acc.setdefault("epsilon", DEFAULTS["epsilon"])

    return Scenario(
        ues=tuple(ues),
        edges=tuple(edges),
        noise_power=_watts(doc.get("noise_power_w", DEFAULTS["noise_power_w"])),
        carrier_wavelength=wavelength_from_ghz(doc.get("carrier_ghz", DEFAULTS["carrier_ghz"])),
        accuracy=AccuracyParams(**acc),
    )


def load_scenario(path, seed: int = 0) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return scenario_from_dict(doc, seed=seed)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Fully explicit document; :func:`scenario_from_dict` inverts it exactly."""
    acc = {k: v for k, v in asdict(scenario.accuracy).items() if v is not None}
    return {
        "ues": [
            {
                "id": u.id,
                "position": list(u.position),
                "cpu_freq_max_hz": u.cpu_freq_max,
                "cycles_per_sample": u.cycles_per_sample,
                "dataset_size": u.dataset_size,
                "tx_power_max": {"w": u.tx_power_max},
                "model_size_bits": u.model_size,
            }
            for u in scenario.ues
        ],
        "edges": [
            {
                "id": e.id,
                "position": list(e.position),
                "total_bandwidth_hz": e.total_bandwidth,
                "per_ue_bandwidth_hz": e.per_ue_bandwidth,
                "uplink_rate_to_cloud_bps": e.uplink_rate_to_cloud,
                "edge_model_size_bits": e.edge_model_size,
            }
            for e in scenario.edges
        ],
        "noise_power_w": {"w": scenario.noise_power},
        "carrier_ghz": 3e8 / scenario.carrier_wavelength / 1e9,
        "accuracy": acc,
    }


def save_scenario(scenario: Scenario, path) -> None:
    _atomic_write(path, json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def generate_scenario(
    seed: int,
    num_ues: int,
    num_edges: int,
    *,
    capacity_slack: float = 1.25,
    capacity: int | None = None,
    epsilon: float = DEFAULTS["epsilon"],
    big_c: float = DEFAULTS["big_c"],
) -> Scenario:
    """Random deployment in the 500 m square.

    UEs are uniform in the square with per-UE cycles/sample in [1e4, 3e4] and
    dataset sizes in [200, 800]; each edge can host ``capacity`` UEs, by
    default ``ceil(capacity_slack * N / M)``. ``zeta`` and ``gamma`` are the first
    two draws of the seed's stream, so they do not change with N or M.
    """
    if num_ues < 1 or num_edges < 1:
        raise ValueError("need at least one UE and one edge")
    rng = np.random.default_rng(seed)
    zeta, gamma = _draw_constants(rng)
    pos = rng.uniform(0.0, AREA_SIDE_M, size=(num_ues, 2))
    cycles = rng.uniform(1e4, 3e4, size=num_ues)
    sizes = rng.integers(200, 801, size=num_ues)

    p_max = dbm_to_w(DEFAULTS["tx_power_max_dbm"])
    ues = tuple(
        Ue(
            id=n,
            position=(float(pos[n, 0]), float(pos[n, 1])),
            cpu_freq_max=DEFAULTS["cpu_freq_max_hz"],
            cycles_per_sample=float(cycles[n]),
            dataset_size=int(sizes[n]),
            tx_power_max=p_max,
            model_size=DEFAULTS["model_size_bits"],
        )
        for n in range(num_ues)
    )
    cap = capacity or max(1, math.ceil(capacity_slack * num_ues / num_edges))
    bw = DEFAULTS["per_ue_bandwidth_hz"]
    edges = tuple(
        EdgeServer(
            id=m,
            position=site,
            total_bandwidth=bw * cap,
            per_ue_bandwidth=bw,
            uplink_rate_to_cloud=DEFAULTS["uplink_rate_to_cloud_bps"],
            edge_model_size=DEFAULTS["edge_model_size_bits"],
        )
        for m, site in enumerate(edge_grid_positions(num_edges))
    )
    return Scenario(
        ues=ues,
        edges=edges,
        noise_power=DEFAULTS["noise_power_w"],
        carrier_wavelength=wavelength_from_ghz(DEFAULTS["carrier_ghz"]),
        accuracy=AccuracyParams(zeta=zeta, gamma=gamma, big_c=big_c, epsilon=epsilon),
    )


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


# --- sweeps -----------------------------------------------------------------

AXES = ("epsilon", "ues_per_edge", "num_edges")

SWEEP_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["axis", "values", "seeds"],
    "properties": {
        "axis": {"enum": list(AXES)},
        "values": {"type": "array", "minItems": 1, "items": _POSITIVE},
        "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "strategies": {
            "type": "array",
            "minItems": 1,
            "items": {"enum": list(assoc_mod.STRATEGIES)},
        },
        "num_ues": {"type": "integer", "minimum": 1},
        "num_edges": {"type": "integer", "minimum": 1},
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "eta": _POSITIVE,
        "tol": _POSITIVE,
        "max_iters": {"type": "integer", "minimum": 1},
        "edge_capacity": {"type": "integer", "minimum": 1},
        "latency_a": _POSITIVE,
    },
}

CSV_HEADER = (
    "scenario_id",
    "seed",
    "axis",
    "axis_value",
    "strategy",
    "a_int",
    "b_int",
    "rounds",
    "big_t_s",
    "objective_s",
    "latency_a",
    "max_latency_s",
    "converged",
    "error",
)


@dataclass(frozen=True)
class SweepSpec:
    """One experiment axis swept over ``values`` for every seed.

    ``ues_per_edge`` keeps ``num_edges`` fixed and sets N = value * M;
    ``num_edges`` keeps ``num_ues`` fixed; ``epsilon`` keeps both. Along
    ``num_edges`` each edge keeps the same capacity, by default enough for the
    smallest M with 25% slack. ``max_latency`` is evaluated at the common
    local-iteration count ``latency_a`` so strategies compare on association
    alone.
    """

    axis: str
    values: tuple[float, ...]
    seeds: tuple[int, ...]
    strategies: tuple[str, ...] = ("proposed",)
    num_ues: int = 100
    num_edges: int = 5
    epsilon: float = DEFAULTS["epsilon"]
    eta: float = 0.01
    tol: float = 1e-6
    max_iters: int = 10_000
    edge_capacity: int | None = None
    latency_a: float = 1.0

    def __post_init__(self):
        doc = {
            k: list(v) if isinstance(v, tuple) else v
            for k, v in asdict(self).items()
            if v is not None
        }
        try:
            jsonschema.validate(doc, SWEEP_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ScenarioError(f"sweep spec {where}: {exc.message}") from None
        if self.axis != "epsilon" and any(v != int(v) for v in self.values):
            raise ScenarioError(f"sweep spec values: {self.axis} needs integer values")
        if self.axis == "epsilon" and any(v >= 1 for v in self.values):
            raise ScenarioError("sweep spec values: epsilon must lie in (0, 1)")
        for name in ("values", "seeds", "strategies"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepSpec":
        try:
            jsonschema.validate(doc, SWEEP_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ScenarioError(f"sweep spec {where}: {exc.message}") from None
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "SweepSpec":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(doc)

    def cell(self, value: float, seed: int) -> Scenario:
        cap = self.edge_capacity
        if self.axis == "epsilon":
            return generate_scenario(seed, self.num_ues, self.num_edges, capacity=cap, epsilon=value)
        if self.axis == "ues_per_edge":
            return generate_scenario(
                seed, int(value) * self.num_edges, self.num_edges, capacity=cap, epsilon=self.epsilon
            )
        if cap is None:
            cap = math.ceil(1.25 * self.num_ues / min(self.values))
        return generate_scenario(seed, self.num_ues, int(value), capacity=cap, epsilon=self.epsilon)


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    seed: int
    axis: str
    axis_value: float
    strategy: str
    a_int: int | None = None
    b_int: int | None = None
    rounds: float | None = None
    big_t: float | None = None
    objective: float | None = None
    latency_a: float | None = None
    max_latency: float | None = None
    converged: bool | None = None
    error: str = ""

    def as_csv(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            return repr(v) if isinstance(v, float) else str(v)

        return [
            fmt(v)
            for v in (
                self.scenario_id,
                self.seed,
                self.axis,
                self.axis_value,
                self.strategy,
                self.a_int,
                self.b_int,
                self.rounds,
                self.big_t,
                self.objective,
                self.latency_a,
                self.max_latency,
                self.converged,
                self.error,
            )
        ]


def run_cell(spec: SweepSpec, value: float, seed: int) -> list[ResultRow]:
    """All strategies on one generated scenario; failures become error rows."""
    sid = f"{spec.axis}={value:g}/seed={seed}"
    base = dict(scenario_id=sid, seed=seed, axis=spec.axis, axis_value=float(value))
    try:
        scenario = spec.cell(value, seed)
    except Exception as exc:  # noqa: BLE001 - recorded, sweep goes on
        return [ResultRow(strategy=s, error=f"{type(exc).__name__}: {exc}", **base) for s in spec.strategies]
    rows = []
    for strategy in spec.strategies:
        try:
            res = assoc_mod.associate(scenario, strategy, a=spec.latency_a, seed=seed)
            plan = solve(scenario, res.association, eta=spec.eta, tol=spec.tol, max_iters=spec.max_iters)
            rows.append(
                ResultRow(
                    strategy=strategy,
                    a_int=plan.a_int,
                    b_int=plan.b_int,
                    rounds=plan.rounds,
                    big_t=plan.big_t,
                    objective=plan.objective,
                    latency_a=float(spec.latency_a),
                    max_latency=res.max_latency,
                    converged=plan.converged,
                    **base,
                )
            )
        except Exception as exc:  # noqa: BLE001
            rows.append(ResultRow(strategy=strategy, error=f"{type(exc).__name__}: {exc}", **base))
    return rows


def run_sweep(spec: SweepSpec, out=None) -> list[ResultRow]:
    """Rows in spec order (value, then seed, then strategy); written to ``out``
    as CSV atomically when given."""
    rows = [row for value in spec.values for seed in spec.seeds for row in run_cell(spec, value, seed)]
    if out is not None:
        _atomic_write(out, rows_to_csv(rows))
    return rows


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())
    return buf.getvalue()
