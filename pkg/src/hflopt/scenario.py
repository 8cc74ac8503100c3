"""Deployment geometry, wireless channel and per-round delay model.

Every latency figure used elsewhere in the package is computed here. Units are
linear SI throughout (metres, Hz, watts, bits, seconds); dBm only appears at
the configuration boundary via :func:`dbm_to_w`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from hflopt.accuracy import AccuracyParams, cloud_rounds

SPEED_OF_LIGHT = 3e8
MIN_DISTANCE_M = 1.0


class ConstraintViolation(ValueError):
    """A resource setting falls outside its feasible box."""


class InfeasibleScenario(ValueError):
    """Edge capacities cannot host every UE."""


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def w_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts * 1000.0)


def wavelength_from_ghz(carrier_ghz: float) -> float:
    return SPEED_OF_LIGHT / (carrier_ghz * 1e9)


@dataclass(frozen=True)
class Ue:
    id: int
    position: tuple[float, float]
    cpu_freq_max: float
    cycles_per_sample: float
    dataset_size: int
    tx_power_max: float
    model_size: float

    def __post_init__(self):
        for name in ("cpu_freq_max", "cycles_per_sample", "tx_power_max", "model_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"UE {self.id}: {name} must be > 0")
        if self.dataset_size < 1:
            raise ValueError(f"UE {self.id}: dataset_size must be >= 1")


@dataclass(frozen=True)
class EdgeServer:
    id: int
    position: tuple[float, float]
    total_bandwidth: float
    per_ue_bandwidth: float
    uplink_rate_to_cloud: float
    edge_model_size: float

    def __post_init__(self):
        if not (self.total_bandwidth > 0 and self.per_ue_bandwidth > 0):
            raise ValueError(f"edge {self.id}: bandwidths must be > 0")
        if self.per_ue_bandwidth > self.total_bandwidth:
            raise ValueError(f"edge {self.id}: per_ue_bandwidth exceeds total_bandwidth")
        if not self.uplink_rate_to_cloud > 0:
            raise ValueError(f"edge {self.id}: uplink_rate_to_cloud must be > 0")
        if self.edge_model_size < 0:
            raise ValueError(f"edge {self.id}: edge_model_size must be >= 0")

    @property
    def capacity(self) -> int:
        # small tolerance so that e.g. 20e6 / 1e6 is not floored to 19
        return int(math.floor(self.total_bandwidth / self.per_ue_bandwidth + 1e-9))


@dataclass(frozen=True)
class Scenario:
    ues: tuple[Ue, ...]
    edges: tuple[EdgeServer, ...]
    noise_power: float
    carrier_wavelength: float
    accuracy: AccuracyParams

    def __post_init__(self):
        object.__setattr__(self, "ues", tuple(self.ues))
        object.__setattr__(self, "edges", tuple(self.edges))
        if not self.ues or not self.edges:
            raise ValueError("scenario needs at least one UE and one edge server")
        if len({u.id for u in self.ues}) != len(self.ues):
            raise ValueError("duplicate UE ids")
        if len({e.id for e in self.edges}) != len(self.edges):
            raise ValueError("duplicate edge ids")
        if not (self.noise_power > 0 and self.carrier_wavelength > 0):
            raise ValueError("noise_power and carrier_wavelength must be > 0")
        cap = sum(e.capacity for e in self.edges)
        if cap < len(self.ues):
            raise InfeasibleScenario(
                f"total edge capacity {cap} is below the number of UEs {len(self.ues)}"
            )

    @property
    def num_ues(self) -> int:
        return len(self.ues)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([e.capacity for e in self.edges], dtype=int)

    def ue_index(self, ue_id: int) -> int:
        for i, u in enumerate(self.ues):
            if u.id == ue_id:
                return i
        raise KeyError(f"unknown UE id {ue_id}")

    def edge_index(self, edge_id: int) -> int:
        for j, e in enumerate(self.edges):
            if e.id == edge_id:
                return j
        raise KeyError(f"unknown edge id {edge_id}")

    def gain_matrix(self) -> np.ndarray:
        """Free-space gains, shape (N, M), with distances clamped to 1 m."""
        ue_pos = np.array([u.position for u in self.ues], dtype=float)
        edge_pos = np.array([e.position for e in self.edges], dtype=float)
        dist = np.linalg.norm(ue_pos[:, None, :] - edge_pos[None, :, :], axis=-1)
        dist = np.maximum(dist, MIN_DISTANCE_M)
        return (self.carrier_wavelength / (4.0 * math.pi * dist)) ** 2

    def snr_matrix(self, resources: Resources | None = None) -> np.ndarray:
        power = (resources or max_resources(self)).power
        return self.gain_matrix() * power[:, None] / self.noise_power


@dataclass(frozen=True)
class Association:
    """UE id -> edge id. Each UE appears exactly once."""

    assignment: Mapping[int, int]

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    @classmethod
    def from_indices(cls, scenario: Scenario, edge_of: Sequence[int]) -> Association:
        return cls({u.id: scenario.edges[int(j)].id for u, j in zip(scenario.ues, edge_of)})

    def edge_indices(self, scenario: Scenario) -> np.ndarray:
        """Edge position (not id) for every UE, in scenario order."""
        pos = {e.id: j for j, e in enumerate(scenario.edges)}
        try:
            return np.array([pos[self.assignment[u.id]] for u in scenario.ues], dtype=int)
        except KeyError as exc:
            raise ValueError(f"association does not cover id {exc.args[0]}") from None

    def loads(self, scenario: Scenario) -> np.ndarray:
        return np.bincount(self.edge_indices(scenario), minlength=scenario.num_edges)

    def validate(self, scenario: Scenario) -> None:
        if set(self.assignment) != {u.id for u in scenario.ues}:
            raise ValueError("association must map every UE exactly once")
        over = self.loads(scenario) > scenario.capacities
        if over.any():
            bad = [scenario.edges[j].id for j in np.flatnonzero(over)]
            raise ValueError(f"edge capacity exceeded at edges {bad}")

    def members(self, scenario: Scenario, edge_id: int) -> list[int]:
        return [u for u, m in self.assignment.items() if m == edge_id]


@dataclass(frozen=True)
class Resources:
    """Per-UE CPU frequency (Hz) and transmit power (W), scenario order."""

    cpu: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cpu", np.asarray(self.cpu, dtype=float))
        object.__setattr__(self, "power", np.asarray(self.power, dtype=float))


def max_resources(scenario: Scenario) -> Resources:
    return Resources(
        cpu=np.array([u.cpu_freq_max for u in scenario.ues]),
        power=np.array([u.tx_power_max for u in scenario.ues]),
    )


# --- scalar channel and delay primitives ------------------------------------


def channel_gain(ue_pos, edge_pos, wavelength: float, min_distance: float | None = None) -> float:
    """Free-space path gain ``(wavelength / (4 pi d))**2``."""
    d = math.dist(ue_pos, edge_pos)
    if min_distance is not None:
        d = max(d, min_distance)
    if d <= 0:
        raise ValueError("coincident UE and edge positions give a singular gain")
    return (wavelength / (4.0 * math.pi * d)) ** 2


def uplink_rate(bandwidth: float, gain: float, tx_power: float, noise_power: float) -> float:
    """Shannon rate in bits/s."""
    if min(bandwidth, gain, tx_power, noise_power) <= 0:
        raise ValueError("bandwidth, gain, power and noise must all be positive")
    return bandwidth * math.log2(1.0 + gain * tx_power / noise_power)


def local_compute_time(ue: Ue, cpu_freq: float) -> float:
    if not 0 < cpu_freq <= ue.cpu_freq_max:
        raise ConstraintViolation(
            f"UE {ue.id}: cpu_freq {cpu_freq} outside (0, {ue.cpu_freq_max}]"
        )
    return ue.cycles_per_sample * ue.dataset_size / cpu_freq


def ue_uplink_time(
    ue: Ue, edge: EdgeServer, tx_power: float, noise_power: float, wavelength: float
) -> float:
    if not 0 < tx_power <= ue.tx_power_max:
        raise ConstraintViolation(
            f"UE {ue.id}: tx_power {tx_power} outside (0, {ue.tx_power_max}]"
        )
    g = channel_gain(ue.position, edge.position, wavelength, MIN_DISTANCE_M)
    rate = edge.per_ue_bandwidth * math.log2(1.0 + g * tx_power / noise_power)
    if rate <= 0:
        raise ValueError(f"zero uplink rate between UE {ue.id} and edge {edge.id}")
    return ue.model_size / rate


def edge_uplink_time(edge: EdgeServer) -> float:
    return edge.edge_model_size / edge.uplink_rate_to_cloud


# --- vectorised delay table ---------------------------------------------------


@dataclass(frozen=True)
class DelayTable:
    """Per-iteration compute times (N,), UE->edge upload times (N, M) and
    edge->cloud upload times (M,)."""

    t_cmp: np.ndarray
    t_up: np.ndarray
    t_edge: np.ndarray

    def scaled(self, c: float) -> DelayTable:
        return DelayTable(self.t_cmp * c, self.t_up * c, self.t_edge * c)

    def assigned_uplink(self, edge_of: np.ndarray) -> np.ndarray:
        up = self.t_up[np.arange(len(edge_of)), edge_of]
        if not np.all(np.isfinite(up)):
            n = int(np.flatnonzero(~np.isfinite(up))[0])
            raise ValueError(f"zero uplink rate for UE index {n} at edge index {edge_of[n]}")
        return up


def delay_table(scenario: Scenario, resources: Resources | None = None) -> DelayTable:
    res = resources or max_resources(scenario)
    fmax = np.array([u.cpu_freq_max for u in scenario.ues])
    pmax = np.array([u.tx_power_max for u in scenario.ues])
    if np.any(res.cpu <= 0) or np.any(res.cpu > fmax):
        raise ConstraintViolation("cpu frequency outside (0, f_max]")
    if np.any(res.power <= 0) or np.any(res.power > pmax):
        raise ConstraintViolation("transmit power outside (0, p_max]")
    cycles = np.array([u.cycles_per_sample * u.dataset_size for u in scenario.ues])
    bw = np.array([e.per_ue_bandwidth for e in scenario.edges])
    d_n = np.array([u.model_size for u in scenario.ues])
    snr = scenario.gain_matrix() * res.power[:, None] / scenario.noise_power
    rate = bw[None, :] * np.log2(1.0 + snr)
    with np.errstate(divide="ignore"):
        t_up = np.where(rate > 0, d_n[:, None] / np.where(rate > 0, rate, 1.0), np.inf)
    t_edge = np.array([edge_uplink_time(e) for e in scenario.edges])
    return DelayTable(cycles / res.cpu, t_up, t_edge)


def edge_taus(table: DelayTable, edge_of: np.ndarray, a: float, num_edges: int) -> np.ndarray:
    """Per-edge round delay; edges without UEs get 0."""
    per_ue = a * table.t_cmp + table.assigned_uplink(edge_of)
    tau = np.zeros(num_edges)
    np.maximum.at(tau, edge_of, per_ue)
    return tau


def edge_round_delay(
    scenario: Scenario,
    association: Association,
    edge_id: int,
    a: float,
    resources: Resources | None = None,
) -> float:
    if a < 0:
        raise ValueError("a must be nonnegative")
    j = scenario.edge_index(edge_id)
    edge_of = association.edge_indices(scenario)
    return float(edge_taus(delay_table(scenario, resources), edge_of, a, scenario.num_edges)[j])


def cloud_round_delay(
    scenario: Scenario,
    association: Association,
    a: float,
    b: float,
    resources: Resources | None = None,
) -> float:
    table = delay_table(scenario, resources)
    edge_of = association.edge_indices(scenario)
    tau = edge_taus(table, edge_of, a, scenario.num_edges)
    return float(np.max(b * tau + table.t_edge))


def total_time(
    scenario: Scenario,
    association: Association,
    a: float,
    b: float,
    resources: Resources | None = None,
) -> float:
    """Cloud rounds to reach the target accuracy times the cloud-round delay."""
    big_t = cloud_round_delay(scenario, association, a, b, resources)
    return cloud_rounds(a, b, scenario.accuracy) * big_t
