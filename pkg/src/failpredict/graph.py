"""DAG and hop matrix derived from an event-failure matrix.

Both structures are static: they are built once from the model and shared
read-only by every prediction session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from graphlib import TopologicalSorter
from typing import Union

from .model import EventFailureMatrix, EventId, FailureId

__all__ = [
    "Dag",
    "HopMatrix",
    "Node",
    "build_dag",
    "build_hop_matrix",
    "failure_probability",
    "has_edge",
    "render_artifact",
    "parse_artifact",
]

Node = Union[EventId, FailureId]


def _node_key(node: Node) -> tuple[int, int]:
    # events before failure leaves, each by index
    return (0 if isinstance(node, EventId) else 1, node.index)


@dataclass(frozen=True)
class Dag:
    """Event nodes plus failure leaves.

    ``adjacency[j - 1]`` is the successor list of event ``j``, sorted with
    event targets first and failure leaves after, each by index.  Failure
    leaves have no entry because they have no outgoing edges.
    """

    matrix: EventFailureMatrix
    adjacency: tuple[tuple[Node, ...], ...]
    start_events: frozenset[EventId]

    @property
    def nodes(self) -> tuple[Node, ...]:
        return self.matrix.events + self.matrix.failures

    def successors(self, node: Node) -> tuple[Node, ...]:
        if isinstance(node, FailureId):
            return ()
        return self.adjacency[node.index - 1]

    def out_degree(self, event: EventId | int) -> int:
        j = event if isinstance(event, int) else event.index
        return len(self.adjacency[j - 1])

    def edges(self) -> list[tuple[Node, Node]]:
        return [(e, t) for e in self.matrix.events for t in self.adjacency[e.index - 1]]

    def resolve(self, node: Node | str) -> Node:
        if not isinstance(node, str):
            return node
        try:
            return self.matrix.event(node)
        except KeyError:
            return self.matrix.failure(node)

    def topological_order(self) -> list[Node]:
        graph = {n: set() for n in self.nodes}
        for src, dst in self.edges():
            graph[dst].add(src)
        return list(TopologicalSorter(graph).static_order())


def build_dag(m: EventFailureMatrix) -> Dag:
    succ: list[set[Node]] = [set() for _ in m.events]
    starts = set()
    for f in m.failures:
        chain = m.chain(f.index)
        if not chain:
            continue
        starts.add(m.events[chain[0] - 1])
        for a, b in zip(chain, chain[1:]):
            succ[a - 1].add(m.events[b - 1])
        succ[chain[-1] - 1].add(f)
    return Dag(
        matrix=m,
        adjacency=tuple(tuple(sorted(s, key=_node_key)) for s in succ),
        start_events=frozenset(starts),
    )


def has_edge(d: Dag, src: Node | str, dst: Node | str) -> bool:
    src, dst = d.resolve(src), d.resolve(dst)
    return dst in d.successors(src)


@dataclass(frozen=True)
class HopMatrix:
    """``hops[j - 1][i - 1]``: edges from event j to failure leaf i along
    failure i's chain, or 0 when event j is not part of that chain."""

    hops: tuple[tuple[int, ...], ...]

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.hops), len(self.hops[0]) if self.hops else 0)

    def get(self, j: int, i: int) -> int:
        return self.hops[j - 1][i - 1]

    def reachable(self, j: int) -> list[int]:
        """Failure indices with a non-zero hop count from event ``j``."""
        return [i for i, h in enumerate(self.hops[j - 1], 1) if h > 0]


def build_hop_matrix(m: EventFailureMatrix) -> HopMatrix:
    hops = [[0] * m.n_failures for _ in range(m.n_events)]
    for f in m.failures:
        chain = m.chain(f.index)
        k = len(chain)
        for p, j in enumerate(chain):
            hops[j - 1][f.index - 1] = k - p
    return HopMatrix(tuple(tuple(r) for r in hops))


def failure_probability(hops: int) -> float:
    """Probability of a failure that is ``hops`` edges away.

    Grows exponentially as the failure gets closer; chains longer than four
    hops would go negative and are clamped to 0.0.
    """
    if hops < 1:
        raise ValueError(f"hop count must be >= 1, got {hops} (event does not reach the failure)")
    if hops > 4:
        return 0.0
    return (100.0 - math.exp(hops)) / 100.0


def render_artifact(d: Dag, h: HopMatrix) -> str:
    """Deterministic text dump of nodes, edges, start events and hops."""
    m = d.matrix
    out = ["[events]"]
    out += [f"{e.index} {e.name}" for e in m.events]
    out.append("[failures]")
    out += [f"{f.index} {f.name}" for f in m.failures]
    out.append("[start]")
    out.append(" ".join(e.name for e in sorted(d.start_events)))
    out.append("[edges]")
    out += [f"{a.name} -> {b.name}" for a, b in d.edges()]
    out.append("[hops]")
    out.append("# rows: events, columns: failures")
    out += [" ".join(str(v) for v in row) for row in h.hops]
    return "\n".join(out) + "\n"


def parse_artifact(text: str) -> dict[str, list]:
    """Read back the sections of :func:`render_artifact` output."""
    sections: dict[str, list] = {}
    current = None
    for line in text.splitlines():
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1], [])
        elif line.startswith("#") or current is None:
            continue
        else:
            current.append(line)
    if "hops" in sections:
        sections["hops"] = [[int(v) for v in row.split()] for row in sections["hops"]]
    if "start" in sections:
        sections["start"] = [n for row in sections["start"] for n in row.split()]
    if "edges" in sections:
        sections["edges"] = [tuple(row.split(" -> ")) for row in sections["edges"]]
    return sections
