"""Communication graphs: construction, random generation, spanning trees and
incidence/Laplacian views.

Nodes are labelled ``1..K`` in the public API (edge-list files, ``Graph.edges``);
array views index them ``0..K-1``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Invalid graph: bad labels, duplicates, self-loops or disconnected."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph with an ordered edge list of pairs ``(i, j)``, ``i < j``.

    Row ``l`` of every incidence view corresponds to ``edges[l]``. Construction
    validates the pair invariants and connectivity.
    """

    K: int
    edges: tuple[tuple[int, int], ...]
    _neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.K < 1:
            raise GraphError(f"K must be positive, got {self.K}")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        seen = set()
        for i, j in edges:
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not i < j:
                raise GraphError(f"edge ({i}, {j}) must satisfy i < j")
            if i < 1 or j > self.K:
                raise GraphError(f"edge ({i}, {j}) outside node range 1..{self.K}")
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        object.__setattr__(self, "edges", edges)
        nbrs = [[] for _ in range(self.K)]
        for i, j in edges:
            nbrs[i - 1].append(j)
            nbrs[j - 1].append(i)
        object.__setattr__(self, "_neighbors", tuple(tuple(sorted(n)) for n in nbrs))
        if not is_connected(self.K, edges):
            raise GraphError("graph is not connected")

    @property
    def M(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Sorted neighbour labels of node ``i`` (1-based)."""
        return self._neighbors[i - 1]

    def degree(self, i: int) -> int:
        return len(self._neighbors[i - 1])

    def degrees(self) -> np.ndarray:
        return np.array([len(n) for n in self._neighbors], dtype=int)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self._neighbors[i - 1]

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: l for l, e in enumerate(self.edges)}

    def incident_edges(self, i: int) -> list[tuple[int, int]]:
        """``(edge_index, sign)`` for edges touching node ``i``, ascending by index.

        ``sign`` is +1 when ``i`` is the lower endpoint (row entry of A is +1).
        """
        out = []
        for l, (a, b) in enumerate(self.edges):
            if a == i:
                out.append((l, 1))
            elif b == i:
                out.append((l, -1))
        return out

    def is_tree(self) -> bool:
        return self.M == self.K - 1


def is_connected(K: int, edges) -> bool:
    """Union-find connectivity check on labels ``1..K``."""
    parent = list(range(K + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = K
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            components -= 1
    return components == 1


def complete_graph(K: int) -> Graph:
    return Graph(K, tuple((i, j) for i in range(1, K + 1) for j in range(i + 1, K + 1)))


def gen_erdos_renyi(K: int, p_g: float, seed=None, max_retries: int = 1000) -> Graph:
    """Draw a connected graph from G(K, p_g).

    Each of the K(K-1)/2 potential edges is kept independently with probability
    ``p_g``. Disconnected draws are discarded and redrawn from the next RNG
    substream, up to ``max_retries`` times. ``seed`` is an int, ``None`` or a
    ``numpy.random.SeedSequence``.
    """
    if K < 2:
        raise GraphError(f"K must be at least 2, got {K}")
    if not (0.0 < p_g <= 1.0):
        raise GraphError(f"p_g must lie in (0, 1], got {p_g}")
    pairs = [(i, j) for i in range(1, K + 1) for j in range(i + 1, K + 1)]
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawning mutates the caller's sequence
        root = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        root = np.random.SeedSequence(seed)
    for child in root.spawn(max_retries):
        rng = np.random.default_rng(child)
        keep = rng.random(len(pairs)) < p_g
        edges = tuple(e for e, k in zip(pairs, keep) if k)
        if is_connected(K, edges):
            return Graph(K, edges)
    raise GraphError(
        f"no connected draw from G({K}, {p_g}) in {max_retries} attempts; "
        f"p_g is far below the connectivity threshold log(K)/K = {np.log(K) / K:.3g}"
    )


def spanning_tree(g: Graph) -> Graph:
    """Breadth-first spanning tree from node 1, visiting neighbours in ascending order."""
    seen = {1}
    queue = deque([1])
    tree = []
    while queue:
        u = queue.popleft()
        for w in g.neighbors(u):
            if w not in seen:
                seen.add(w)
                queue.append(w)
                tree.append((min(u, w), max(u, w)))
    if len(seen) != g.K:
        raise GraphError("input graph is not connected")
    return Graph(g.K, tuple(sorted(tree)))


def bfs_parents(g: Graph) -> dict[int, int]:
    """Parent of every non-root node in the BFS tree used by :func:`spanning_tree`."""
    parent = {}
    seen = {1}
    queue = deque([1])
    while queue:
        u = queue.popleft()
        for w in g.neighbors(u):
            if w not in seen:
                seen.add(w)
                parent[w] = u
                queue.append(w)
    return parent


@dataclass(frozen=True)
class IncidenceView:
    """Dense incidence and Laplacian matrices of a graph.

    ``A`` is M x K with row ``l`` equal to ``e_i - e_j`` for edge ``(i, j)``;
    ``A_L`` and ``A_R`` hold the ``e_i`` and ``e_j`` parts so that
    ``A = A_L - A_R``; ``A_LR`` stacks ``A_L`` on top of ``A_R``.
    """

    A: np.ndarray
    A_L: np.ndarray
    A_R: np.ndarray
    L: np.ndarray
    degrees: np.ndarray

    @property
    def A_LR(self) -> np.ndarray:
        return np.vstack([self.A_L, self.A_R])


def incidence(g: Graph) -> IncidenceView:
    M, K = g.M, g.K
    A_L = np.zeros((M, K))
    A_R = np.zeros((M, K))
    for l, (i, j) in enumerate(g.edges):
        A_L[l, i - 1] = 1.0
        A_R[l, j - 1] = 1.0
    A = A_L - A_R
    return IncidenceView(A=A, A_L=A_L, A_R=A_R, L=A.T @ A, degrees=g.degrees())


def laplacian_from_adjacency(g: Graph) -> np.ndarray:
    """Laplacian built entrywise from degrees and adjacency (independent of ``A``)."""
    L = np.zeros((g.K, g.K))
    for i in range(1, g.K + 1):
        L[i - 1, i - 1] = g.degree(i)
        for j in g.neighbors(i):
            L[i - 1, j - 1] = -1.0
    return L


def save_edge_list(g: Graph, path) -> None:
    lines = [f"# K={g.K}"] + [f"{i} {j}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def load_edge_list(path, K: int | None = None) -> Graph:
    """Read an edge-list file (``i j`` per line, 1-based, ``#`` comments).

    Pairs may appear in either orientation; they are normalised to ``i < j`` and
    kept in file order. A ``# K=<n>`` comment fixes the node count, otherwise it
    is the largest label seen.
    """
    edges = []
    declared = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip().replace(" ", "")
            if body.startswith("K="):
                declared = int(body[2:])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"{path}:{lineno}: expected two labels, got {raw!r}")
        i, j = int(parts[0]), int(parts[1])
        edges.append((min(i, j), max(i, j)) if i != j else (i, j))
    if K is None:
        K = declared if declared is not None else max((max(e) for e in edges), default=1)
    return Graph(K, tuple(edges))
