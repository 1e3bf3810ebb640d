"""Semi-clusters and the multi-scale goodness recursion for lattice boxes.

Stage-0 boxes have side M; a stage-n box is a block of a_n^d stage-(n-1)
boxes, so its side is M_n = M * a_1 * ... * a_n. Box indices are integer
vectors: the stage-n box v covers v * M_n + [0, M_n)^d. Every box is looked
at together with its K-enlargement, the box padded by K sites on each side
(clipped to the sampled lattice).
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, UnionFind, components
from .params import ParameterError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RenormSchedule:
    M: int
    K: int
    delta: float
    theta_renorm: float
    kappa0: float
    n_max: int

    def __post_init__(self):
        if self.M < 1:
            raise ParameterError('M', f"base box side must be >= 1, got {self.M}")
        if self.K < 0:
            raise ParameterError('K', f"enlargement must be >= 0, got {self.K}")
        if not self.delta > self.theta_renorm > 1.0:
            raise ParameterError('delta', f"need delta > theta_renorm > 1, got {self.delta}, {self.theta_renorm}")
        if not 0.0 < self.kappa0 <= 1.0:
            raise ParameterError('kappa0', f"must lie in (0, 1], got {self.kappa0}")
        if self.n_max < 0:
            raise ParameterError('stages', f"must be >= 0, got {self.n_max}")

    def a(self, n: int) -> int:
        """Stage-n blocking factor, (n+1)^delta rounded to the nearest integer."""
        return 1 if n == 0 else int(round((n + 1) ** self.delta))

    def kappa(self, n: int) -> float:
        return self.kappa0 if n == 0 else (n + 1) ** -self.theta_renorm

    def side(self, n: int) -> int:
        return self.M * math.prod(self.a(i) for i in range(1, n + 1))

    def u(self, n: int) -> float:
        return math.prod(self.kappa(i) for i in range(n + 1))

    def semi_cluster_size(self, n: int, d: int) -> int:
        """Smallest semi-cluster of a stage-n box that counts: M_n^d * u_n."""
        return max(1, math.ceil(self.side(n) ** d * self.u(n) - 1e-9))


@dataclass(frozen=True, eq=False)
class SemiCluster:
    members: np.ndarray
    anchor: tuple[int, ...]

    def __len__(self):
        return int(self.members.size)


def _region(pos: np.ndarray, lo, hi) -> np.ndarray:
    return np.all((pos >= lo) & (pos < hi), axis=1)


def _enlarged_components(g: Graph, lo, hi):
    """Component labels of the subgraph induced on lo <= x < hi (-1 outside)."""
    pos = g.positions
    inside = _region(pos, lo, hi)
    nodes = np.flatnonzero(inside)
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    e = g.edges
    keep = inside[e[:, 0]] & inside[e[:, 1]]
    uf = UnionFind(nodes.size)
    for a, b in local[e[keep]].tolist():
        uf.union(a, b)
    label = np.full(g.num_nodes, -1, dtype=np.int64)
    label[nodes] = uf.roots()
    return label


def _positions(g: Graph) -> np.ndarray:
    if g.positions is None:
        raise ValueError("semi-clusters need lattice positions on the graph")
    return g.positions


def find_semi_clusters(g: Graph, box_origin, M: int, K: int, ell: int) -> list[SemiCluster]:
    """ell-semi-clusters of the box box_origin + [0, M)^d.

    Components of the subgraph induced on the K-enlargement, cut down to the
    box, of at least ell sites. Ordered by smallest member.
    """
    pos = _positions(g)
    origin = np.asarray(box_origin, dtype=np.float64).reshape(-1)
    if origin.size != pos.shape[1]:
        raise ValueError(f"box origin has {origin.size} coordinates for a {pos.shape[1]}-d graph")
    if ell < 1:
        raise ParameterError('ell', f"must be >= 1, got {ell}")
    label = _enlarged_components(g, origin - K, origin + M + K)
    in_box = np.flatnonzero(_region(pos, origin, origin + M))
    if in_box.size == 0:
        return []
    roots, inverse, counts = np.unique(label[in_box], return_inverse=True, return_counts=True)
    anchor = tuple(int(c) for c in origin)
    found = [SemiCluster(in_box[inverse.reshape(-1) == j], anchor)
             for j in np.flatnonzero(counts >= ell)]
    found.sort(key=lambda s: int(s.members[0]))
    return found


@dataclass(frozen=True)
class GoodnessCertificate:
    good: bool
    stage: int
    index: tuple[int, ...]
    semi_clusters: int
    good_children: tuple[tuple[int, ...], ...] = ()
    required_good: int = 0
    connected: bool = True
    children: tuple = field(default=(), repr=False)

    @property
    def reason(self) -> str:
        if self.good:
            return 'good'
        if self.stage == 0:
            return f"{self.semi_clusters} large semi-clusters, need exactly one"
        if len(self.good_children) < self.required_good:
            return f"{len(self.good_children)} good sub-boxes, need {self.required_good}"
        return 'large semi-clusters of good sub-boxes are not connected'


def _check_cover(g: Graph, origin: np.ndarray, side: int):
    pos = _positions(g)
    if (pos.min(axis=0) > origin).any() or (pos.max(axis=0) < origin + side - 1).any():
        raise ValueError(f"graph does not cover the box at {origin.tolist()} of side {side}")


def renorm_goodness(g: Graph, schedule: RenormSchedule, stage: int, v) -> GoodnessCertificate:
    """Goodness of the stage-`stage` box with index v, with the certificate.

    Stage 0: good iff the box has exactly one (kappa0 M^d)-semi-cluster.
    Stage n: good iff at least kappa_n a_n^d of its stage-(n-1) sub-boxes are
    good and the large semi-clusters of the good sub-boxes all lie in one
    component of the subgraph induced on the box's K-enlargement.
    """
    if not 0 <= stage <= schedule.n_max:
        raise ParameterError('stages', f"stage {stage} outside 0..{schedule.n_max}")
    v = tuple(int(c) for c in np.atleast_1d(v))
    d = len(v)
    side = schedule.side(stage)
    origin = np.asarray(v, dtype=np.float64) * side
    _check_cover(g, origin, side)
    if stage == 0:
        semi = find_semi_clusters(g, origin, schedule.M, schedule.K, schedule.semi_cluster_size(0, d))
        return GoodnessCertificate(len(semi) == 1, 0, v, len(semi))

    a = schedule.a(stage)
    children = [renorm_goodness(g, schedule, stage - 1, tuple(c * a + j for c, j in zip(v, off)))
                for off in itertools.product(range(a), repeat=d)]
    good = tuple(c.index for c in children if c.good)
    required = math.ceil(schedule.kappa(stage) * a ** d - 1e-9)
    child_side = schedule.side(stage - 1)
    ell = schedule.semi_cluster_size(stage - 1, d)
    semi = []
    for w in good:
        semi.extend(find_semi_clusters(g, np.asarray(w) * child_side, child_side, schedule.K, ell))
    connected = True
    if len(semi) > 1:
        label = _enlarged_components(g, origin - schedule.K, origin + side + schedule.K)
        connected = len({int(label[s.members[0]]) for s in semi}) == 1
    ok = len(good) >= required and connected
    log.debug('stage %d box %s: %d/%d good sub-boxes, connected=%s', stage, v, len(good), a ** d, connected)
    return GoodnessCertificate(ok, stage, v, len(semi), good, required, connected, tuple(children))


def default_kappa0(g: Graph) -> float:
    """Half the density of the largest component."""
    lab = components(g)
    return 0.5 * lab.largest_size / g.num_nodes if g.num_nodes else 0.0


def stage_boxes(side: int, d: int, schedule: RenormSchedule, stage: int) -> list[tuple[int, ...]]:
    """Indices of the stage boxes that fit in a lattice box of the given side."""
    count = side // schedule.side(stage)
    return list(itertools.product(range(count), repeat=d))
