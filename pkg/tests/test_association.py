from __future__ import annotations

import numpy as np
import pytest

from hflopt.association import (
    associate,
    evaluate_max_latency,
    exhaustive_oracle,
    greedy,
    propose,
    random_assoc,
)
from hflopt.experiments import generate_scenario
from hflopt.scenario import Association, delay_table

from conftest import make_scenario

SPREAD_UES = [(30, 10), (-20, 40), (90, 80), (140, 10), (160, -30), (60, -50)]
SPREAD_EDGES = [(0, 0), (150, 0)]


def _per_ue(scenario, edge_of, a):
    table = delay_table(scenario)
    return np.array([a * table.t_cmp[n] + table.t_up[n, m] for n, m in enumerate(edge_of)])


def _check_feasible(scenario, result):
    loads = result.association.loads(scenario)
    assert sorted(result.association.assignment) == sorted(u.id for u in scenario.ues)
    assert np.all(loads <= scenario.capacities)
    assert result.max_latency == evaluate_max_latency(scenario, result.association, 1.0)


def test_evaluate_single_ue():
    sc = make_scenario([(70, 0)], [(0, 0), (300, 0)])
    for m in (0, 1):
        got = evaluate_max_latency(sc, Association({0: m}), 3.0)
        assert got == pytest.approx(_per_ue(sc, [m], 3.0)[0], rel=1e-15)


def test_evaluate_identical_ues_symmetric_edges():
    # every UE equidistant from both edges
    sc = make_scenario([(0, 40)] * 2 + [(0, -40)] * 2, [(-60, 0), (60, 0)], cap=2)
    vals = {
        evaluate_max_latency(sc, Association(dict(enumerate(assign))), 2.0)
        for assign in ([0, 0, 1, 1], [0, 1, 0, 1], [1, 1, 0, 0], [1, 0, 1, 0])
    }
    assert len(vals) == 1


def test_evaluate_golden_matches_script(golden):
    res = propose(golden, a=5.0)
    edge_of = res.association.edge_indices(golden)
    assert res.max_latency == pytest.approx(_per_ue(golden, edge_of, 5.0).max(), rel=1e-14)


@pytest.mark.parametrize("fn", [propose, greedy])
def test_single_edge_takes_everyone(fn):
    sc = make_scenario(SPREAD_UES, [(0, 0)], cap=6)
    res = fn(sc, a=2.0)
    assert set(res.association.assignment.values()) == {0}
    assert res.max_latency == pytest.approx(_per_ue(sc, [0] * 6, 2.0).max(), rel=1e-15)


def test_random_single_edge():
    sc = make_scenario(SPREAD_UES, [(0, 0)], cap=6)
    assert set(random_assoc(sc, seed=3).association.assignment.values()) == {0}


def test_symmetric_pair_tie_break():
    sc = make_scenario([(0, 30), (0, -30)], [(-50, 0), (50, 0)], cap=1)
    res = propose(sc)
    assert res.association.edge_indices(sc).tolist() == [0, 1]
    other = Association({0: 1, 1: 0})
    assert evaluate_max_latency(sc, other, 1.0) == res.max_latency


def test_greedy_big_first_edge():
    sc = make_scenario(SPREAD_UES, SPREAD_EDGES, cap=6)
    res = greedy(sc)
    assert set(res.association.assignment.values()) == {0}


def test_greedy_golden_trace(golden):
    snr = golden.snr_matrix()
    caps = golden.capacities
    taken: dict[int, int] = {}
    for m in range(golden.num_edges):
        order = sorted((n for n in range(golden.num_ues) if n not in taken), key=lambda n: (-snr[n, m], n))
        for n in order[: caps[m]]:
            taken[n] = m
    assert len(taken) == golden.num_ues  # golden capacities leave no leftovers
    got = greedy(golden).association.edge_indices(golden)
    assert got.tolist() == [taken[n] for n in range(golden.num_ues)]


def test_random_is_reproducible(golden):
    r1 = random_assoc(golden, seed=11).association
    r2 = random_assoc(golden, seed=11).association
    assert r1 == r2


def test_random_is_uniform_over_edges():
    sc = make_scenario(SPREAD_UES[:4], SPREAD_EDGES, cap=2)
    hits = np.zeros(4)
    seeds = 10_000
    for s in range(seeds):
        hits += random_assoc(sc, seed=s).association.edge_indices(sc) == 0
    assert np.all(np.abs(hits / seeds - 0.5) <= 0.02)


def test_oracle_single_ue():
    sc = make_scenario([(120, 0)], [(0, 0), (150, 0), (400, 0)], cap=1)
    res = exhaustive_oracle(sc, a=2.0)
    per_edge = [evaluate_max_latency(sc, Association({0: m}), 2.0) for m in range(3)]
    assert res.association.assignment[0] == int(np.argmin(per_edge))
    assert res.max_latency == min(per_edge)


def test_oracle_symmetric_matches_propose():
    sc = make_scenario([(0, 30), (0, -30)], [(-50, 0), (50, 0)], cap=1)
    assert exhaustive_oracle(sc).max_latency == propose(sc).max_latency


def test_oracle_beats_every_assignment_brute_force():
    sc = make_scenario(SPREAD_UES, SPREAD_EDGES, cap=3)
    best = np.inf
    for code in range(2**6):
        edge_of = [(code >> (5 - n)) & 1 for n in range(6)]
        if max(edge_of.count(0), edge_of.count(1)) > 3:
            continue
        best = min(best, _per_ue(sc, edge_of, 1.0).max())
    assert exhaustive_oracle(sc).max_latency == pytest.approx(best, rel=1e-15)


def test_oracle_limit(golden):
    with pytest.raises(ValueError):
        exhaustive_oracle(golden, limit=10)


@pytest.mark.parametrize("seed", range(10))
def test_propose_close_to_oracle(seed):
    sc = generate_scenario(seed, 8, 2)
    assert propose(sc).max_latency <= 1.05 * exhaustive_oracle(sc).max_latency


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("strategy", ["proposed", "greedy", "random"])
def test_every_strategy_feasible(seed, strategy):
    sc = generate_scenario(seed, 40, 5)
    _check_feasible(sc, associate(sc, strategy, seed=seed))


@pytest.mark.parametrize("seed", range(5))
def test_conflict_resolutions_bounded(seed):
    sc = generate_scenario(seed, 100, 5)
    res = propose(sc)
    assert res.resolutions <= sc.num_edges * int(sc.capacities.max())


def test_infeasible_capacity_rejected():
    from hflopt.scenario import InfeasibleScenario

    with pytest.raises(InfeasibleScenario):
        make_scenario(SPREAD_UES[:3], [(0, 0)], cap=2)


def test_over_capacity_association_rejected():
    sc = make_scenario(SPREAD_UES[:3], SPREAD_EDGES, cap=2)
    with pytest.raises(ValueError):
        Association({0: 0, 1: 0, 2: 0}).validate(sc)
