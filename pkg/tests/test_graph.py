import random

import mpmath
import pytest
from hypothesis import given

from failpredict.graph import (
    build_dag,
    build_hop_matrix,
    failure_probability,
    has_edge,
    parse_artifact,
    render_artifact,
)
from failpredict.model import EventFailureMatrix, EventId, FailureId, load_model

from test_model import models

# hop counts, events down, failures across
PAPER_HOPS = [
    [3, 0, 0, 0, 3],
    [0, 0, 4, 0, 0],
    [0, 4, 0, 0, 0],
    [0, 3, 0, 0, 0],
    [2, 0, 3, 2, 2],
    [1, 2, 0, 1, 0],
    [0, 1, 2, 0, 0],
    [0, 0, 1, 0, 1],
]

PAPER_EDGES = {
    ("E1", "E5"), ("E2", "E5"), ("E3", "E4"), ("E4", "E6"), ("E5", "E6"),
    ("E5", "E7"), ("E5", "E8"), ("E6", "E7"), ("E6", "F1"), ("E6", "F4"),
    ("E7", "E8"), ("E7", "F2"), ("E8", "F3"), ("E8", "F5"),
}


def edge_names(dag):
    return {(a.name, b.name) for a, b in dag.edges()}


def brute_force_hops(grid):
    """Walk each failure's row cell by cell, counting edges left to its leaf."""
    n, m = len(grid), len(grid[0])
    hops = [[0] * n for _ in range(m)]
    for i in range(n):
        for j in range(m):
            if not grid[i][j]:
                continue
            steps, k = 0, j
            while True:
                nxt = next((c for c in range(k + 1, m) if grid[i][c]), None)
                steps += 1
                if nxt is None:
                    break
                k = nxt
            hops[j][i] = steps
    return hops


def test_paper_dag(paper_dag):
    assert edge_names(paper_dag) == PAPER_EDGES
    assert {e.name for e in paper_dag.start_events} == {"E1", "E2", "E3", "E5"}


def test_single_row_dag():
    dag = build_dag(load_model("events: E1\nfailure F: E1\n"))
    assert edge_names(dag) == {("E1", "F")}
    assert {e.name for e in dag.start_events} == {"E1"}


def test_shared_suffix_stored_once():
    dag = build_dag(load_model("events: E1 E2 E3\nfailure Fa: E1 E3\nfailure Fb: E2 E3\n"))
    assert edge_names(dag) == {("E1", "E3"), ("E2", "E3"), ("E3", "Fa"), ("E3", "Fb")}
    assert len(dag.edges()) == 4


def test_adjacency_sorted(paper_dag):
    succ = [t.name for t in paper_dag.successors(paper_dag.resolve("E6"))]
    assert succ == ["E7", "F1", "F4"]
    assert paper_dag.out_degree(1) == 1


def test_paper_hop_matrix(paper_hops):
    assert [list(r) for r in paper_hops.hops] == PAPER_HOPS
    assert paper_hops.get(1, 1) == 3
    assert paper_hops.get(5, 3) == 3
    assert paper_hops.get(8, 5) == 1
    assert paper_hops.get(2, 1) == 0


def test_single_row_hops():
    assert build_hop_matrix(load_model("events: E1\nfailure F: E1\n")).get(1, 1) == 1


def test_brute_force_oracle_agrees_on_paper(paper_model):
    assert brute_force_hops(paper_model.grid()) == PAPER_HOPS


@pytest.mark.parametrize("seed", range(20))
def test_random_hops_match_oracle(seed):
    rng = random.Random(seed)
    rows = set()
    while len(rows) < 12:
        row = tuple(int(rng.random() < 0.35) for _ in range(6))
        if any(row):
            rows.add(row)
    grid = [list(r) for r in sorted(rows)]
    m = EventFailureMatrix.from_grid(grid)
    assert [list(r) for r in build_hop_matrix(m).hops] == brute_force_hops(grid)


@given(models())
def test_hop_invariants(m):
    h = build_hop_matrix(m)
    for f in m.failures:
        for j in range(1, m.n_events + 1):
            assert (h.get(j, f.index) > 0) == bool(m.cell(f.index, j))
        chain = m.chain(f.index)
        assert [h.get(j, f.index) for j in chain] == list(range(len(chain), 0, -1))


@given(models())
def test_dag_invariants(m):
    dag = build_dag(m)
    for a, b in dag.edges():
        assert isinstance(a, EventId)
        if isinstance(b, EventId):
            assert b.index > a.index
    for f in m.failures:
        assert dag.successors(f) == ()
    assert dag.start_events == {m.events[m.chain(f.index)[0] - 1] for f in m.failures}
    order = dag.topological_order()
    pos = {n: k for k, n in enumerate(order)}
    assert all(pos[a] < pos[b] for a, b in dag.edges())
    # event-index order followed by the leaves is itself topological
    natural = list(m.events) + list(m.failures)
    npos = {n: k for k, n in enumerate(natural)}
    assert all(npos[a] < npos[b] for a, b in dag.edges())
    assert build_dag(m) == dag
    assert build_hop_matrix(m) == build_hop_matrix(m)


@pytest.mark.parametrize(
    "h, expected",
    [(1, 0.9728171817), (2, 0.9261094390), (3, 0.7991446308), (4, 0.4540184997), (5, 0.0), (9, 0.0)],
)
def test_failure_probability(h, expected):
    assert failure_probability(h) == pytest.approx(expected, abs=1e-10)


def test_failure_probability_matches_high_precision():
    mpmath.mp.dps = 30
    for h in range(1, 5):
        exact = (100 - mpmath.e ** h) / 100
        assert failure_probability(h) == pytest.approx(float(exact), abs=1e-15)


def test_failure_probability_strictly_decreasing():
    p = [failure_probability(h) for h in range(1, 6)]
    assert p[0] > p[1] > p[2] > p[3] > p[4] == 0.0


def test_failure_probability_zero_hops():
    with pytest.raises(ValueError):
        failure_probability(0)


def test_has_edge(paper_dag):
    assert has_edge(paper_dag, "E6", "E8") is False
    assert has_edge(paper_dag, "E5", "E6") is True
    assert has_edge(paper_dag, "E6", "F1") is True
    for f in paper_dag.matrix.failures:
        for n in paper_dag.nodes:
            assert not has_edge(paper_dag, f, n)
    assert has_edge(paper_dag, FailureId(1, "F1"), EventId(1, "E1")) is False


def test_artifact_golden(paper_dag, paper_hops, data_dir):
    text = render_artifact(paper_dag, paper_hops)
    assert text == (data_dir / "paper_graph.golden").read_text()
    sections = parse_artifact(text)
    assert sections["hops"] == PAPER_HOPS
    assert set(sections["edges"]) == PAPER_EDGES
    assert sections["start"] == ["E1", "E2", "E3", "E5"]
