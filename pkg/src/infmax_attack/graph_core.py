"""Sparse undirected graphs, the self-looped random-walk matrix and its L-step columns.

The random-walk matrix follows the GCN aggregation convention: every node is its
own neighbour, so ``M[i, j] = 1 / (deg(i) + 1)`` for ``j`` adjacent to ``i`` or
``j == i``.  Self-loops are never stored in the adjacency itself.
"""
from __future__ import annotations

import threading
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised for malformed graph input."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with optional node features and labels.

    ``adj`` is a symmetric CSR matrix with unit entries and an empty diagonal.
    Internal node ``k`` corresponds to ``node_ids[k]``.
    """

    adj: sp.csr_matrix
    node_ids: tuple
    features: np.ndarray | None = None
    labels: np.ndarray | None = None
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            object.__setattr__(self, "_index", {t: k for k, t in enumerate(self.node_ids)})

    @property
    def n_nodes(self) -> int:
        return self.adj.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adj.nnz // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adj.indptr)

    @property
    def neighborhood_sizes(self) -> np.ndarray:
        # |N_i| counts the node itself
        return self.degrees + 1

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(self.labels.max()) + 1

    def neighbors(self, i: int) -> np.ndarray:
        return self.adj.indices[self.adj.indptr[i]:self.adj.indptr[i + 1]]

    def index_of(self, token) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise GraphError(f"unknown node {token!r}") from None

    def indices_of(self, tokens: Iterable) -> list[int]:
        return [self.index_of(t) for t in tokens]

    def ids_of(self, indices: Iterable[int]) -> list:
        return [self.node_ids[int(i)] for i in indices]

    def edge_list(self) -> list[tuple[int, int]]:
        coo = sp.triu(self.adj, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return list(zip(coo.row[order].tolist(), coo.col[order].tolist()))

    def with_features(self, features: np.ndarray) -> "Graph":
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[0] != self.n_nodes:
            raise GraphError(f"features must be {self.n_nodes} x D, got {features.shape}")
        return Graph(self.adj, self.node_ids, features, self.labels, self._index)

    def permuted(self, perm: Sequence[int]) -> "Graph":
        """Relabel so that new node ``k`` is old node ``perm[k]``; ids follow their nodes."""
        perm = np.asarray(perm)
        adj = self.adj[perm][:, perm].tocsr()
        adj.sort_indices()
        feats = None if self.features is None else self.features[perm]
        labels = None if self.labels is None else self.labels[perm]
        return Graph(adj, tuple(self.node_ids[p] for p in perm), feats, labels)


def _sort_tokens(tokens: set) -> list:
    try:
        return sorted(tokens)
    except TypeError:
        return sorted(tokens, key=lambda t: (type(t).__name__, repr(t)))


def build_graph(
    edge_list: Iterable[tuple[Hashable, Hashable]],
    features: np.ndarray | Mapping | None = None,
    labels: Sequence | Mapping | None = None,
    nodes: Sequence[Hashable] | None = None,
) -> Graph:
    """Build a deduplicated symmetric graph from an edge list.

    Internal indices follow the sorted external ids.  ``features`` and
    ``labels`` are either arrays aligned with that sorted order or mappings
    keyed by node id.  When the node set is fixed up front (``nodes`` given, or
    keyed features), edges naming any other node are rejected; nodes without
    edges stay isolated.
    """
    edges = [(u, v) for u, v in edge_list]
    known = None
    if nodes is not None:
        known = set(nodes)
    elif isinstance(features, Mapping):
        known = set(features)
    if known is not None:
        for u, v in edges:
            for t in (u, v):
                if t not in known:
                    raise GraphError(f"edge ({u!r}, {v!r}) references unknown node {t!r}")
        tokens = known
    else:
        tokens = {t for e in edges for t in e}
        if isinstance(labels, Mapping):
            tokens |= set(labels)

    node_ids = tuple(_sort_tokens(tokens))
    index = {t: k for k, t in enumerate(node_ids)}
    n = len(node_ids)

    pairs = {(min(index[u], index[v]), max(index[u], index[v])) for u, v in edges if u != v}
    if pairs:
        rows, cols = np.array(sorted(pairs)).T
    else:
        rows = cols = np.zeros(0, dtype=int)
    data = np.ones(2 * len(rows))
    adj = sp.csr_matrix(
        (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(n, n)
    )
    adj.sort_indices()

    feats = None
    if features is not None:
        if isinstance(features, Mapping):
            feats = np.array([np.asarray(features[t], dtype=float) for t in node_ids])
        else:
            feats = np.asarray(features, dtype=float)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise GraphError(f"feature rows ({feats.shape[0]}) do not match node count ({n})")

    labs = None
    if labels is not None:
        if isinstance(labels, Mapping):
            missing = [t for t in node_ids if t not in labels]
            if missing:
                raise GraphError(f"{len(missing)} nodes have no label, e.g. {missing[0]!r}")
            labs = np.array([int(labels[t]) for t in node_ids], dtype=np.int64)
        else:
            labs = np.asarray(labels, dtype=np.int64)
        if labs.shape != (n,):
            raise GraphError(f"label count ({labs.shape}) does not match node count ({n})")
        if n and labs.min() < 0:
            raise GraphError("class ids must be non-negative")

    return Graph(adj, node_ids, feats, labs, index)


@dataclass(frozen=True, eq=False)
class RandomWalkMatrix:
    graph: Graph
    matrix: sp.csr_matrix

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def transition_matrix(g: Graph) -> RandomWalkMatrix:
    """Row-stochastic walk matrix on the graph with implicit self-loops."""
    if g.n_nodes < 1:
        raise GraphError("graph has no nodes")
    a = (g.adj + sp.identity(g.n_nodes, format="csr")).tocsr()
    a.sort_indices()
    inv = 1.0 / g.neighborhood_sizes
    m = sp.csr_matrix((a.data * np.repeat(inv, np.diff(a.indptr)), a.indices, a.indptr), shape=a.shape)
    return RandomWalkMatrix(g, m)


class InfluenceMatrix:
    """Lazily computed columns of ``B = M**L``.

    ``column(i)`` is ``M`` applied ``L`` times to the standard basis vector
    ``e_i``; entry ``j`` is the influence of input node ``i`` on target ``j``.
    Columns are cached; insertion is guarded by a lock so concurrent readers
    may request columns.
    """

    def __init__(self, walk: RandomWalkMatrix, power: int):
        if power < 1:
            raise ValueError(f"walk length must be >= 1, got {power}")
        self.walk = walk
        self.power = int(power)
        self.columns: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def n_targets(self) -> int:
        return self.walk.n_nodes

    @property
    def candidates(self) -> list[int]:
        return sorted(self.columns)

    def _compute(self, idx: Sequence[int]) -> np.ndarray:
        block = np.zeros((self.n_targets, len(idx)))
        block[np.asarray(idx, dtype=int), np.arange(len(idx))] = 1.0
        for _ in range(self.power):
            block = self.walk.matrix @ block
        return block

    def ensure(self, nodes: Iterable[int], chunk: int = 512) -> None:
        todo = sorted({int(i) for i in nodes} - self.columns.keys())
        for start in range(0, len(todo), chunk):
            part = todo[start:start + chunk]
            block = self._compute(part)
            with self._lock:
                for k, i in enumerate(part):
                    self.columns.setdefault(i, np.ascontiguousarray(block[:, k]))

    def column(self, i: int) -> np.ndarray:
        col = self.columns.get(int(i))
        if col is None:
            raise KeyError(f"no influence column computed for node {i}")
        return col

    def matrix(self, nodes: Sequence[int]) -> np.ndarray:
        """Dense ``N x len(nodes)`` block of the stored columns."""
        if len(nodes) == 0:
            return np.zeros((self.n_targets, 0))
        return np.column_stack([self.column(i) for i in nodes])

    def influence(self, nodes: Iterable[int]) -> np.ndarray:
        """Total influence ``sum_{i in S} B[:, i]`` received by every target."""
        total = np.zeros(self.n_targets)
        for i in sorted(int(v) for v in nodes):
            total += self.column(i)
        return total


def influence_columns(m: RandomWalkMatrix, candidates: Iterable[int], L: int) -> InfluenceMatrix:
    """Columns of ``M**L`` for the candidate nodes, via repeated sparse products."""
    inf = InfluenceMatrix(m, L)
    nodes = list(candidates)
    for i in nodes:
        if not 0 <= int(i) < m.n_nodes:
            raise GraphError(f"candidate {i} is not a node index")
    inf.ensure(nodes)
    return inf


def full_power(m: RandomWalkMatrix, L: int) -> np.ndarray:
    """Dense ``M**L`` assembled from its columns (small graphs and GC-RWCS only)."""
    inf = influence_columns(m, range(m.n_nodes), L)
    return inf.matrix(list(range(m.n_nodes)))


def k_hop_neighbors(g: Graph, source: int, k: int) -> set[int]:
    """Nodes within ``k`` hops of ``source``, the source included."""
    seen = {int(source)}
    frontier = [int(source)]
    for _ in range(k):
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                v = int(v)
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return seen


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source``; unreachable nodes get -1."""
    dist = np.full(g.n_nodes, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [int(source)]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                if dist[v] < 0:
                    dist[v] = d
                    nxt.append(int(v))
        frontier = nxt
    return dist
