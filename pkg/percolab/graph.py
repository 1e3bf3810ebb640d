"""Graph core: the immutable multigraph every generator returns, plus
connectivity, distances and the edge-list text format.

Edges are stored once each as rows of an (E, 2) int array; a self-loop (x, x)
counts twice in the adjacency of x so the handshake identity holds.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

log = logging.getLogger(__name__)


class _Unreachable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return 'UNREACHABLE'

    def __reduce__(self):
        return (_Unreachable, ())


UNREACHABLE = _Unreachable()


@dataclass(frozen=True, eq=False)
class Graph:
    num_nodes: int
    edges: np.ndarray
    positions: np.ndarray | None = None
    weights: np.ndarray | None = None
    occupied: np.ndarray | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, 'edges', edges)
        if self.num_nodes < 0:
            raise ValueError(f"num_nodes must be >= 0, got {self.num_nodes}")
        if edges.size and (edges.min() < 0 or edges.max() >= self.num_nodes):
            raise IndexError(f"edge endpoint out of range for {self.num_nodes} nodes")
        if self.positions is not None:
            pos = np.asarray(self.positions, dtype=np.float64)
            if pos.ndim == 1:
                pos = pos.reshape(-1, 1)
            if pos.shape[0] != self.num_nodes:
                raise ValueError(f"positions has {pos.shape[0]} rows for {self.num_nodes} nodes")
            object.__setattr__(self, 'positions', pos)
        for name in ('weights', 'occupied'):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=bool if name == 'occupied' else np.float64)
                if arr.shape != (self.num_nodes,):
                    raise ValueError(f"{name} must have one entry per node")
                object.__setattr__(self, name, arr)

    @classmethod
    def from_edges(cls, num_nodes: int, u: Iterable[int], v: Iterable[int], **marks) -> Graph:
        u = np.asarray(list(u) if not isinstance(u, np.ndarray) else u, dtype=np.int64)
        v = np.asarray(list(v) if not isinstance(v, np.ndarray) else v, dtype=np.int64)
        return cls(num_nodes, np.column_stack([u, v]) if u.size else np.empty((0, 2), np.int64), **marks)

    # --- adjacency --------------------------------------------------------
    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def dimension(self) -> int:
        return 0 if self.positions is None else int(self.positions.shape[1])

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.argsort(src, kind='stable')
        indptr = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.num_nodes), out=indptr[1:])
        return indptr, dst[order]

    @cached_property
    def adjacency(self) -> list[list[int]]:
        indptr, indices = self._csr
        flat = indices.tolist()
        bounds = indptr.tolist()
        return [flat[bounds[i]:bounds[i + 1]] for i in range(self.num_nodes)]

    def neighbors(self, x: int) -> np.ndarray:
        if not 0 <= x < self.num_nodes:
            raise IndexError(f"Node id out of range: {x}")
        indptr, indices = self._csr
        return indices[indptr[x]:indptr[x + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self._csr[0])


@dataclass(frozen=True)
class ComponentLabeling:
    label: np.ndarray
    sizes: np.ndarray
    largest: int

    @property
    def num_components(self) -> int:
        return int(self.sizes.size)

    @property
    def largest_size(self) -> int:
        return int(self.sizes[self.largest]) if self.sizes.size else 0

    def members(self, comp: int) -> np.ndarray:
        return np.flatnonzero(self.label == comp)


class UnionFind:
    """Disjoint sets over 0..n-1, path halving and union by size.

    Equal sizes attach the larger root id below the smaller one so results do
    not depend on the order edges arrive in.
    """

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.num_sets = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        """Merge the sets of a and b; return the surviving root."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        sa, sb = self.size[ra], self.size[rb]
        if sa < sb or (sa == sb and rb < ra):
            ra, rb, sa, sb = rb, ra, sb, sa
        self.parent[rb] = ra
        self.size[ra] += sb
        self.num_sets -= 1
        return ra

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def set_size(self, x: int) -> int:
        return self.size[self.find(x)]

    def roots(self) -> np.ndarray:
        return np.fromiter((self.find(i) for i in range(len(self.parent))),
                           dtype=np.int64, count=len(self.parent))


def components(g: Graph) -> ComponentLabeling:
    """Label connected components; component ids follow smallest member node."""
    uf = UnionFind(g.num_nodes)
    for a, b in g.edges.tolist():
        uf.union(a, b)
    return _labeling_from_roots(uf.roots())


def _labeling_from_roots(roots: np.ndarray) -> ComponentLabeling:
    if roots.size == 0:
        return ComponentLabeling(np.empty(0, np.int64), np.empty(0, np.int64), -1)
    # first occurrence of each root, in node order, fixes the component id
    uniq, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(uniq.size, dtype=np.int64)
    rank[np.argsort(first, kind='stable')] = np.arange(uniq.size)
    label = rank[inverse.reshape(-1)]
    sizes = np.bincount(label, minlength=uniq.size)
    return ComponentLabeling(label, sizes, int(np.argmax(sizes)))


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop counts from source to every node, -1 where unreachable."""
    if not 0 <= source < g.num_nodes:
        raise IndexError(f"Node id out of range: {source}")
    adj = g.adjacency
    dist = [-1] * g.num_nodes
    dist[source] = 0
    queue = deque([source])
    while queue:
        x = queue.popleft()
        nd = dist[x] + 1
        for y in adj[x]:
            if dist[y] < 0:
                dist[y] = nd
                queue.append(y)
    return np.asarray(dist, dtype=np.int64)


def graph_distance(g: Graph, source: int, targets: Iterable[int]) -> dict:
    """Breadth-first hop counts from source; UNREACHABLE across components."""
    wanted = set(int(t) for t in targets)
    for t in wanted | {source}:
        if not 0 <= t < g.num_nodes:
            raise IndexError(f"Node id out of range: {t}")
    result = {}
    if source in wanted:
        result[source] = 0
    remaining = wanted - {source}
    adj = g.adjacency
    seen = {source: 0}
    queue = deque([source])
    while queue and remaining:
        x = queue.popleft()
        nd = seen[x] + 1
        for y in adj[x]:
            if y not in seen:
                seen[y] = nd
                queue.append(y)
                if y in remaining:
                    result[y] = nd
                    remaining.discard(y)
    for t in remaining:
        result[t] = UNREACHABLE
    return result


# --- simple-graph views -------------------------------------------------------

@dataclass(frozen=True)
class SimplifyReport:
    self_loops: int
    parallel_edges: int


def simplify(g: Graph) -> tuple[Graph, SimplifyReport]:
    """Drop self-loops and collapse parallel edges."""
    e = np.sort(g.edges, axis=1)
    loops = e[:, 0] == e[:, 1]
    kept = e[~loops]
    uniq = np.unique(kept, axis=0) if kept.size else kept
    report = SimplifyReport(int(loops.sum()), int(kept.shape[0] - uniq.shape[0]))
    if report.self_loops or report.parallel_edges:
        log.debug('simplify removed %d self-loops, %d parallel edges',
                  report.self_loops, report.parallel_edges)
    return Graph(g.num_nodes, uniq, g.positions, g.weights, g.occupied), report


def clustering_coefficient(g: Graph) -> float:
    """Global transitivity 3*triangles / connected triples on the simple graph."""
    nbrs = [set() for _ in range(g.num_nodes)]
    for a, b in g.edges.tolist():
        if a != b:
            nbrs[a].add(b)
            nbrs[b].add(a)
    triples = sum(len(s) * (len(s) - 1) // 2 for s in nbrs)
    if triples == 0:
        return 0.0
    closed = 0
    for a, s in enumerate(nbrs):
        for b in s:
            if a < b:
                closed += len(s & nbrs[b])
    return closed / triples


# --- edge-list text format ----------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), '.17g')


def write_edge_list(g: Graph, dest: str | Path | TextIO) -> None:
    lines = [f"# nodes={g.num_nodes} d={g.dimension}"]
    lines.extend(f"{a} {b}" for a, b in g.edges.tolist())
    if g.positions is not None:
        lines.append('# pos')
        lines.extend(' '.join(_fmt(c) for c in row) for row in g.positions.tolist())
    if g.weights is not None:
        lines.append('# weight')
        lines.extend(_fmt(w) for w in g.weights.tolist())
    if g.occupied is not None:
        lines.append('# occupied')
        lines.extend('1' if o else '0' for o in g.occupied.tolist())
    text = '\n'.join(lines) + '\n'
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding='ascii')
    else:
        dest.write(text)


def read_edge_list(src: str | Path | TextIO) -> Graph:
    if isinstance(src, (str, Path)):
        text = Path(src).read_text(encoding='ascii')
    else:
        text = src.read()
    rows = text.splitlines()
    if not rows or not rows[0].startswith('# nodes='):
        raise ValueError("edge list must start with '# nodes=<n> d=<d>'")
    header = dict(tok.split('=', 1) for tok in rows[0][1:].split())
    n, d = int(header['nodes']), int(header['d'])
    section = 'edges'
    parts: dict[str, list[str]] = {'edges': [], 'pos': [], 'weight': [], 'occupied': []}
    for line in rows[1:]:
        if line.startswith('#'):
            section = line[1:].strip()
            if section not in parts:
                raise ValueError(f"unknown section '# {section}'")
            continue
        if line.strip():
            parts[section].append(line)
    edges = np.array([[int(t) for t in ln.split()] for ln in parts['edges']], dtype=np.int64).reshape(-1, 2)
    pos = np.array([[float(t) for t in ln.split()] for ln in parts['pos']]).reshape(n, d) if parts['pos'] else None
    w = np.array([float(t) for t in parts['weight']]) if parts['weight'] else None
    occ = np.array([t.strip() == '1' for t in parts['occupied']]) if parts['occupied'] else None
    return Graph(n, edges, pos, w, occ)
