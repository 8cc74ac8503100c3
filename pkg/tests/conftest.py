from __future__ import annotations

import pytest

from hflopt.accuracy import AccuracyParams
from hflopt.experiments import generate_scenario
from hflopt.scenario import EdgeServer, Scenario, Ue, dbm_to_w, wavelength_from_ghz

WAVELENGTH = wavelength_from_ghz(28.0)


def make_ue(i, pos, cycles=2e4, size=500, f=2e9, p=dbm_to_w(10.0), bits=1e6):
    return Ue(i, tuple(pos), f, cycles, size, p, bits)


def make_edge(j, pos, cap=4, bw=1e6, r_cloud=5e5, bits=1e6):
    return EdgeServer(j, tuple(pos), bw * cap, bw, r_cloud, bits)


def make_scenario(ue_pos, edge_pos, cap=4, zeta=3.0, gamma=5.0, epsilon=0.25, **ue_kw):
    return Scenario(
        ues=tuple(make_ue(i, p, **ue_kw) for i, p in enumerate(ue_pos)),
        edges=tuple(make_edge(j, p, cap) for j, p in enumerate(edge_pos)),
        noise_power=1e-13,
        carrier_wavelength=WAVELENGTH,
        accuracy=AccuracyParams(zeta=zeta, gamma=gamma, epsilon=epsilon),
    )


@pytest.fixture
def golden():
    """The seeded 2-edge / 8-UE scenario used across modules."""
    return generate_scenario(0, 8, 2)


# criterion number -> list of (ok, detail); filled by test_acceptance
CRITERIA: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    CRITERIA.setdefault(criterion, []).append((bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        parts = CRITERIA[k]
        ok = all(p[0] for p in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}")
