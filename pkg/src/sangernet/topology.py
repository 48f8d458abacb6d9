"""Connected undirected graphs and Metropolis doubly stochastic mixing matrices."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DisconnectedGraphError, GraphGenerationError, InvalidGraphError

Edge = tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Undirected graph on nodes ``0..n_nodes-1`` with no self loops."""

    n_nodes: int
    edges: frozenset[Edge]

    def __post_init__(self):
        if self.n_nodes < 1:
            raise InvalidGraphError("graph needs at least one node")
        canonical = set()
        for i, j in self.edges:
            if i == j:
                raise InvalidGraphError(f"self loop at node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise InvalidGraphError(f"edge ({i},{j}) out of range")
            canonical.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canonical))

    def neighbors(self, i: int) -> list[int]:
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return sorted(out)

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))


def cycle(M: int) -> Graph:
    """Ring on M >= 3 nodes."""
    if M < 3:
        raise InvalidGraphError(f"cycle needs M >= 3, got {M}")
    return Graph(M, frozenset((i, (i + 1) % M) for i in range(M)))


def star(M: int) -> Graph:
    """Hub-and-spoke on M >= 2 nodes; node 0 is the hub."""
    if M < 2:
        raise InvalidGraphError(f"star needs M >= 2, got {M}")
    return Graph(M, frozenset((0, i) for i in range(1, M)))


def complete(M: int) -> Graph:
    if M < 2:
        raise InvalidGraphError(f"complete graph needs M >= 2, got {M}")
    return Graph(M, frozenset((i, j) for i in range(M) for j in range(i + 1, M)))


def erdos_renyi(M: int, p: float, seed: int, max_retries: int = 1000) -> Graph:
    """Erdos-Renyi graph, resampled until connected (at most ``max_retries`` draws).

    Connectivity is required by every consumer of the graph, so rejection happens
    here rather than at use time.
    """
    if M < 2:
        raise InvalidGraphError(f"erdos_renyi needs M >= 2, got {M}")
    if not 0 < p <= 1:
        raise InvalidGraphError(f"p must lie in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(M, k=1)
    for _ in range(max_retries):
        mask = rng.random(iu.size) < p
        g = Graph(M, frozenset(zip(iu[mask].tolist(), ju[mask].tolist())))
        if is_connected(g):
            return g
    raise GraphGenerationError(
        f"no connected graph in {max_retries} draws (M={M}, p={p}, seed={seed})"
    )


def is_connected(g: Graph) -> bool:
    """Breadth-first reachability from node 0."""
    if g.n_nodes == 1:
        return True
    adjacency = {i: g.neighbors(i) for i in range(g.n_nodes)}
    seen = {0}
    queue = deque([0])
    while queue:
        for j in adjacency[queue.popleft()]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == g.n_nodes


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic weights conforming to a graph, with cached beta."""

    weights: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def n_nodes(self) -> int:
        return int(self.weights.shape[0])

    def min_self_weight(self) -> float:
        return float(np.min(np.diag(self.weights)))


def beta(W: np.ndarray | MixingMatrix) -> float:
    """Second-largest eigenvalue magnitude of a symmetric mixing matrix.

    Strictly below 1 exactly when the underlying graph is connected.
    """
    if isinstance(W, MixingMatrix):
        W = W.weights
    W = np.asarray(W, dtype=float)
    if W.shape[0] == 1:
        return 0.0
    mags = np.sort(np.abs(np.linalg.eigvalsh(W)))[::-1]
    return float(mags[1])


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights: ``w_ij = 1 / (1 + max(deg_i, deg_j))`` on edges.

    Self weights absorb the remaining mass, so every row and column sums to 1 and
    all self weights are strictly positive.
    """
    if not is_connected(g):
        raise DisconnectedGraphError("Metropolis weights require a connected graph")
    M = g.n_nodes
    deg = np.array([g.degree(i) for i in range(M)], dtype=float)
    W = np.zeros((M, M))
    for i, j in g.edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return MixingMatrix(W, beta(W))


def save_edge_list(path: str | Path, g: Graph) -> None:
    """Text form: first line the node count, then one ``i j`` pair per edge."""
    lines = [str(g.n_nodes)]
    lines += [f"{i} {j}" for i, j in sorted(g.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_edge_list(path: str | Path) -> Graph:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise InvalidGraphError(f"{path}: empty edge-list file")
    n = int(lines[0])
    edges = set()
    for ln in lines[1:]:
        i, j = ln.split()
        edges.add((int(i), int(j)))
    return Graph(n, frozenset(edges))
