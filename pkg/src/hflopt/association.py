"""UE-to-edge association under per-edge capacity.

The objective is the worst per-UE round delay ``max_n a t_cmp_n + t_up_{n,m(n)}``.
Strategies: the SNR-ranked conflict-resolution heuristic (:func:`propose`), a
sequential greedy baseline, a random baseline and exhaustive enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hflopt.scenario import Association, Resources, Scenario, delay_table

STRATEGIES = ("proposed", "greedy", "random", "oracle")


@dataclass(frozen=True)
class AssociationResult:
    association: Association
    max_latency: float
    strategy: str
    resolutions: int = 0


def _latency_matrix(scenario: Scenario, a: float, resources: Resources | None) -> np.ndarray:
    table = delay_table(scenario, resources)
    return a * table.t_cmp[:, None] + table.t_up


def evaluate_max_latency(
    scenario: Scenario, association: Association, a: float, resources: Resources | None = None
) -> float:
    table = delay_table(scenario, resources)
    edge_of = association.edge_indices(scenario)
    return float(np.max(a * table.t_cmp + table.assigned_uplink(edge_of)))


def _result(scenario, edge_of, a, resources, strategy, resolutions=0) -> AssociationResult:
    assoc = Association.from_indices(scenario, edge_of)
    assoc.validate(scenario)
    return AssociationResult(
        assoc, evaluate_max_latency(scenario, assoc, a, resources), strategy, resolutions
    )


def _fill_leftovers(snr: np.ndarray, edge_of: np.ndarray, caps: np.ndarray) -> None:
    """Attach unassigned UEs (``edge_of == -1``) to their best-SNR edge that
    still has room. Worst-served UEs (lowest best SNR) choose first."""
    left = np.flatnonzero(edge_of < 0)
    if len(left) == 0:
        return
    residual = caps - np.bincount(edge_of[edge_of >= 0], minlength=len(caps))
    for n in sorted(left, key=lambda n: (snr[n].max(), n)):
        open_edges = np.flatnonzero(residual > 0)
        if len(open_edges) == 0:
            raise ValueError("edge capacities cannot host every UE")
        # stable argmax over open edges: highest SNR, then lowest edge index
        m = open_edges[np.argmax(snr[n, open_edges])]
        edge_of[n] = m
        residual[m] -= 1


def propose(
    scenario: Scenario, a: float = 1.0, resources: Resources | None = None
) -> AssociationResult:
    """SNR-ranked association with pairwise conflict resolution.

    Edges in order each claim their ``capacity`` highest-SNR UEs. While UE
    ``n`` is claimed by the current edge ``i`` and an earlier edge ``j``, the
    highest-SNR pair ``(n', m')`` with ``n'`` unclaimed and ``m'`` in
    ``{i, j}`` is found; ``n`` leaves ``m'`` and ``n'`` joins it. With no
    unclaimed UE left, ``n`` stays only with whichever of the two edges it
    hears better. UEs still unclaimed at the end are attached by
    :func:`_fill_leftovers`.
    """
    snr = scenario.snr_matrix(resources)
    caps = scenario.capacities
    n_ues, n_edges = snr.shape
    if caps.sum() < n_ues:
        raise ValueError("edge capacities cannot host every UE")

    claims: list[set[int]] = [set() for _ in range(n_edges)]
    owners: list[set[int]] = [set() for _ in range(n_ues)]
    resolutions = 0

    def move(n, frm, to_ue):
        claims[frm].discard(n)
        owners[n].discard(frm)
        if to_ue is not None:
            claims[frm].add(to_ue)
            owners[to_ue].add(frm)

    for i in range(n_edges):
        ranked = sorted(range(n_ues), key=lambda n: (-snr[n, i], n))
        for n in ranked[: caps[i]]:
            claims[i].add(n)
            owners[n].add(i)
        while True:
            conflicts = [(n, j) for n in sorted(claims[i]) for j in sorted(owners[n]) if j != i]
            if not conflicts:
                break
            n, j = conflicts[0]
            free = [k for k in range(n_ues) if not owners[k]]
            if free:
                # SNR ties: lower UE id, then the current edge, so earlier claims stay put
                _, neg_k, _, m = max((snr[k, m], -k, m == i, m) for k in free for m in (j, i))
                move(n, m, -neg_k)
            else:
                # keep n on the edge it hears better; ties keep the earlier edge
                move(n, i if snr[n, j] >= snr[n, i] else j, None)
            resolutions += 1

    edge_of = np.full(n_ues, -1)
    for m, members in enumerate(claims):
        for n in members:
            edge_of[n] = m
    _fill_leftovers(snr, edge_of, caps)
    return _result(scenario, edge_of, a, resources, "proposed", resolutions)


def greedy(
    scenario: Scenario, a: float = 1.0, resources: Resources | None = None
) -> AssociationResult:
    """Edges in order take the best-SNR still-unassigned UEs up to capacity."""
    snr = scenario.snr_matrix(resources)
    caps = scenario.capacities
    n_ues, n_edges = snr.shape
    if caps.sum() < n_ues:
        raise ValueError("edge capacities cannot host every UE")
    edge_of = np.full(n_ues, -1)
    for m in range(n_edges):
        free = [n for n in range(n_ues) if edge_of[n] < 0]
        free.sort(key=lambda n: (-snr[n, m], n))
        edge_of[free[: caps[m]]] = m
    _fill_leftovers(snr, edge_of, caps)
    return _result(scenario, edge_of, a, resources, "greedy")


def random_assoc(
    scenario: Scenario, seed: int, a: float = 1.0, resources: Resources | None = None
) -> AssociationResult:
    """Shuffle UEs and deal them round-robin over a shuffled edge order,
    skipping full edges."""
    caps = scenario.capacities.copy()
    n_ues, n_edges = scenario.num_ues, scenario.num_edges
    if caps.sum() < n_ues:
        raise ValueError("edge capacities cannot host every UE")
    rng = np.random.default_rng(seed)
    ue_order = rng.permutation(n_ues)
    edge_order = rng.permutation(n_edges)
    edge_of = np.full(n_ues, -1)
    k = 0
    for n in ue_order:
        while caps[edge_order[k % n_edges]] == 0:
            k += 1
        m = edge_order[k % n_edges]
        edge_of[n] = m
        caps[m] -= 1
        k += 1
    return _result(scenario, edge_of, a, resources, "random")


def exhaustive_oracle(
    scenario: Scenario,
    a: float = 1.0,
    resources: Resources | None = None,
    limit: int = 10**6,
    chunk: int = 1 << 16,
) -> AssociationResult:
    """Global minimiser of the worst per-UE delay over every capacity-feasible
    assignment. Ties resolve to the lexicographically smallest edge-index
    vector (UE 0 most significant)."""
    lat = _latency_matrix(scenario, a, resources)
    caps = scenario.capacities
    n_ues, n_edges = lat.shape
    total = n_edges**n_ues
    if total > limit:
        raise ValueError(f"search space {n_edges}^{n_ues} exceeds limit {limit}")
    powers = n_edges ** np.arange(n_ues - 1, -1, -1)
    rows = np.arange(n_ues)
    best_val, best_code = np.inf, -1
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        digits = (codes[:, None] // powers[None, :]) % n_edges
        counts = np.stack([(digits == m).sum(axis=1) for m in range(n_edges)], axis=1)
        ok = np.all(counts <= caps[None, :], axis=1)
        if not ok.any():
            continue
        worst = lat[rows[None, :], digits].max(axis=1)
        worst[~ok] = np.inf
        i = int(np.argmin(worst))
        if worst[i] < best_val:
            best_val, best_code = float(worst[i]), int(codes[i])
    if best_code < 0:
        raise ValueError("no capacity-feasible assignment")
    edge_of = (best_code // powers) % n_edges
    return _result(scenario, edge_of, a, resources, "oracle")


def associate(
    scenario: Scenario,
    strategy: str,
    a: float = 1.0,
    resources: Resources | None = None,
    seed: int = 0,
) -> AssociationResult:
    if strategy == "proposed":
        return propose(scenario, a, resources)
    if strategy == "greedy":
        return greedy(scenario, a, resources)
    if strategy == "random":
        return random_assoc(scenario, seed, a, resources)
    if strategy == "oracle":
        return exhaustive_oracle(scenario, a, resources)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
