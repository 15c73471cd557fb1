"""Consumer communication topology, doubly stochastic mixing weights, and the
asynchronous gossip event stream.

Nodes are 0-based in memory; the edge-list file format is 1-based
(one "n k" pair per line), matching the other on-disk formats.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np


class GossipEvent(NamedTuple):
    """One tick of the virtual gossip clock: `initiator` contacts `contact`."""

    t: int
    initiator: int
    contact: int


def _canonical_edges(edges: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    out = set()
    for n, k in edges:
        if n == k:
            raise ValueError(f"self-loop on node {n} not allowed")
        out.add((min(n, k), max(n, k)))
    return frozenset(out)


def is_connected(n_nodes: int, edges: Iterable[tuple[int, int]]) -> bool:
    """Breadth-first reachability of all nodes from node 0."""
    if n_nodes <= 0:
        return False
    adj: dict[int, list[int]] = {i: [] for i in range(n_nodes)}
    for n, k in edges:
        adj[n].append(k)
        adj[k].append(n)
    seen = {0}
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for other in adj[node]:
            if other not in seen:
                seen.add(other)
                queue.append(other)
    return len(seen) == n_nodes


@dataclass(frozen=True)
class CommGraph:
    """Undirected, connected consumer graph; construction rejects self-loops,
    out-of-range nodes, and disconnected edge sets."""

    n: int
    edges: frozenset[tuple[int, int]]
    _neighbors: tuple[tuple[int, ...], ...] = field(repr=False, compare=False, default=())

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("graph needs at least two nodes")
        edges = _canonical_edges(self.edges)
        for n, k in edges:
            if not (0 <= n < self.n and 0 <= k < self.n):
                raise ValueError(f"edge ({n}, {k}) outside node range 0..{self.n - 1}")
        if not is_connected(self.n, edges):
            raise ValueError("graph is not connected")
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for n, k in edges:
            adj[n].append(k)
            adj[k].append(n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(
            self, "_neighbors", tuple(tuple(sorted(lst)) for lst in adj)
        )

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self._neighbors[node]

    def degree(self, node: int) -> int:
        return len(self._neighbors[node])

    @property
    def max_degree(self) -> int:
        return max(len(lst) for lst in self._neighbors)


def build_weights(graph: CommGraph, tau: float) -> np.ndarray:
    """Doubly stochastic mixing matrix: tau / max-degree on edges, the
    complementary mass on the diagonal."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau={tau:g} must lie strictly in (0, 1)")
    w = np.zeros((graph.n, graph.n))
    off = tau / graph.max_degree
    for n, k in graph.edges:
        w[n, k] = off
        w[k, n] = off
    for n in range(graph.n):
        w[n, n] = 1.0 - graph.degree(n) * off
    return w


def is_doubly_stochastic(w: np.ndarray, tol: float = 1e-12) -> bool:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        return False
    if np.any(w < -tol):
        return False
    ones = np.ones(w.shape[0])
    return (
        np.max(np.abs(w.sum(axis=0) - ones)) <= tol
        and np.max(np.abs(w.sum(axis=1) - ones)) <= tol
    )


def gossip_stream(
    graph: CommGraph, rng: np.random.Generator, count: int
) -> Iterator[GossipEvent]:
    """Yield `count` gossip events under the single-virtual-clock model:
    initiators i.i.d. uniform over nodes, contacts uniform over neighbors."""
    if count < 1:
        raise ValueError("count must be at least 1")
    for t in range(1, count + 1):
        initiator = int(rng.integers(graph.n))
        nbrs = graph.neighbors(initiator)
        contact = int(nbrs[rng.integers(len(nbrs))])
        yield GossipEvent(t, initiator, contact)


def generate_topology(
    n: int, target_degree: float, rng: np.random.Generator
) -> CommGraph:
    """Random connected graph: a uniform random attachment tree for
    connectivity, then extra random edges until the mean degree reaches
    `target_degree` (or the graph completes)."""
    if n < 2:
        raise ValueError("need at least two nodes")
    order = rng.permutation(n)
    edges = set()
    for idx in range(1, n):
        attach = order[int(rng.integers(idx))]
        node = order[idx]
        edges.add((min(node, attach), max(node, attach)))
    non_edges = [
        (a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in edges
    ]
    rng.shuffle(non_edges)
    while non_edges and 2.0 * len(edges) / n < target_degree:
        edges.add(non_edges.pop())
    return CommGraph(n, frozenset(edges))


def save_edge_list(graph: CommGraph, path) -> None:
    """Write the 1-based "n k" edge-list text format."""
    lines = [f"{n + 1} {k + 1}" for n, k in sorted(graph.edges)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_edge_list(path, n_nodes: int | None = None) -> CommGraph:
    """Read a 1-based edge-list file; node count defaults to the largest id."""
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer node id in {line!r}") from exc
            if a < 1 or b < 1:
                raise ValueError(f"{path}:{lineno}: node ids are 1-based, got {line!r}")
            edges.append((a - 1, b - 1))
    if not edges:
        raise ValueError(f"{path}: no edges found")
    n = n_nodes if n_nodes is not None else max(max(e) for e in edges) + 1
    return CommGraph(n, frozenset(edges))
