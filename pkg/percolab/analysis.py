"""Estimators and percolation diagnostics.

Turns sampled graphs into the observables the asymptotic laws talk about:
degree histograms and tail exponents, box-crossing probabilities and
bisected critical values, chemical-distance profiles and box-cluster sizes.

Anything swept over p or lambda runs on coupled pair thresholds, so a
replicate's observable is monotone in the parameter by construction.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .generators import FREE_PARAMETER, PairThresholds, generate, pair_thresholds
from .graph import Graph, UnionFind, bfs_distances, components
from .lattice import face_sites, lattice_distance
from .params import Boundary, HomLrpParams, LatticeBox, ModelSpec, ParameterError
from .rng import RngStream

log = logging.getLogger(__name__)


class DegenerateSampleError(ValueError):
    pass


class MonotonicityError(RuntimeError):
    pass


# --- degrees ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DegreeSummary:
    histogram: np.ndarray
    mean: float

    @property
    def num_nodes(self) -> int:
        return int(self.histogram.sum())

    @property
    def survival(self) -> np.ndarray:
        """P[D > k] for k = 0 .. max degree."""
        n = self.num_nodes
        if n == 0:
            return np.zeros(0)
        return 1.0 - np.cumsum(self.histogram) / n


def degree_summary(g: Graph) -> DegreeSummary:
    deg = g.degrees()
    hist = np.bincount(deg) if deg.size else np.zeros(1, dtype=np.int64)
    return DegreeSummary(hist, float(deg.mean()) if deg.size else 0.0)


def total_variation(histogram: np.ndarray, pmf: np.ndarray) -> float:
    """TV distance between an empirical histogram and a pmf on 0, 1, 2, ...

    Mass of the pmf beyond the histogram's support counts in full.
    """
    emp = np.asarray(histogram, dtype=np.float64)
    emp = emp / emp.sum()
    pmf = np.asarray(pmf, dtype=np.float64)
    size = max(emp.size, pmf.size)
    a = np.zeros(size)
    b = np.zeros(size)
    a[:emp.size] = emp
    b[:pmf.size] = pmf
    tail = max(0.0, 1.0 - b.sum())
    return 0.5 * (np.abs(a - b).sum() + tail)


# --- tail exponents ------------------------------------------------------------

@dataclass(frozen=True)
class TailFit:
    tau_hat: float
    k_count: int
    threshold: float


def hill_tail(samples, fraction: float = 0.05) -> TailFit:
    """Hill estimator on the top ceil(fraction * n) order statistics.

    tau_hat = k / sum_{i<=k} ln(X_(i) / X_(k+1)), X_(1) the largest.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise ValueError(f"Hill estimator needs at least 100 samples, got {x.size}")
    if not 0.0 < fraction <= 0.2:
        raise ValueError(f"fraction must lie in (0, 0.2], got {fraction}")
    if (x <= 0).any():
        raise ValueError("Hill estimator needs positive samples")
    k = math.ceil(fraction * x.size)
    if k < 10:
        raise ValueError(f"only {k} order statistics in the tail; need at least 10")
    k = min(k, x.size - 1)
    top = -np.sort(-x)[:k + 1]
    spacing = np.log(top[:k] / top[k]).sum()
    if spacing <= 0:
        raise DegenerateSampleError(f"zero log-spacings above {top[k]!r}; samples are tied")
    return TailFit(k / spacing, k, float(top[k]))


def degree_tail(g: Graph, rng: RngStream, fraction: float = 0.05) -> TailFit:
    """Hill fit of the degree sequence. Zero degrees are dropped and integer
    ties broken by adding uniform(0,1) jitter from the `jitter` stream."""
    deg = g.degrees()
    deg = deg[deg > 0].astype(np.float64)
    jitter = rng.generator('jitter').random(deg.size)
    return hill_tail(deg + jitter, fraction)


def hill_bootstrap(samples, fraction: float = 0.05, n_boot: int = 200,
                   rng: RngStream | None = None) -> tuple[float, float]:
    """[5%, 95%] percentile bootstrap interval of the Hill estimate."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    gen = (rng or RngStream(0)).generator('bootstrap')
    estimates = []
    for _ in range(n_boot):
        try:
            estimates.append(hill_tail(gen.choice(x, size=x.size, replace=True), fraction).tau_hat)
        except DegenerateSampleError:
            continue
    if not estimates:
        raise DegenerateSampleError("every bootstrap resample was degenerate")
    lo, hi = np.percentile(estimates, [5.0, 95.0])
    return float(lo), float(hi)


# --- crossing -----------------------------------------------------------------

def _crossing_box(box: LatticeBox) -> LatticeBox:
    if box.boundary is not Boundary.FREE:
        log.warning('crossing events are defined on free boxes; using a free boundary')
        return dataclasses.replace(box, boundary=Boundary.FREE)
    return box


def spans(g: Graph, box: LatticeBox) -> bool:
    """True when one component touches both the first-coordinate 0 and N-1 faces."""
    left, right = face_sites(box)
    label = components(g).label
    return bool(np.intersect1d(label[left], label[right]).size)


@dataclass(frozen=True)
class CrossingEstimate:
    probability: float
    lo: float
    hi: float
    crossings: int
    replicates: int


def _binomial_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval."""
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=level)
    return float(ci.low), float(ci.high)


def crossing_probability(spec: ModelSpec, box: LatticeBox, replicates: int, rng: RngStream,
                         **options) -> CrossingEstimate:
    """Fraction of replicates with a left-right crossing cluster, with a 95% interval."""
    if not spec.lattice:
        raise ParameterError('model', f"crossing needs a lattice model, got {spec.model}")
    if replicates < 1:
        raise ParameterError('replicates', f"must be >= 1, got {replicates}")
    box = _crossing_box(box)
    hits = 0
    for i in range(replicates):
        hits += spans(generate(spec, box, rng.child(i), **options), box)
    lo, hi = _binomial_interval(hits, replicates)
    return CrossingEstimate(hits / replicates, lo, hi, hits, replicates)


def crossing_threshold(th: PairThresholds, box: LatticeBox) -> float:
    """Smallest parameter value at which the replicate crosses (inf if never below the cap)."""
    n = th.num_nodes
    uf = UnionFind(n + 2)
    left, right = face_sites(box)
    for x in left.tolist():
        uf.union(n, x)
    for x in right.tolist():
        uf.union(n + 1, x)
    if uf.connected(n, n + 1):
        return 0.0
    for a, b, t in zip(th.src.tolist(), th.dst.tolist(), th.threshold.tolist()):
        uf.union(a, b)
        if uf.connected(n, n + 1):
            return t
    return math.inf


def crossing_thresholds(spec: ModelSpec, box: LatticeBox, replicates: int, rng: RngStream,
                        cap: float = math.inf) -> np.ndarray:
    box = _crossing_box(box)
    out = np.empty(replicates)
    for i in range(replicates):
        out[i] = crossing_threshold(pair_thresholds(spec, box, rng.child(i), cap=cap), box)
        log.debug('replicate %d crosses at %s', i, out[i])
    return out


def crossing_curve(spec: ModelSpec, box: LatticeBox, values: Sequence[float], replicates: int,
                   rng: RngStream) -> np.ndarray:
    """Crossing probability at each free-parameter value, on shared replicates."""
    values = np.asarray(values, dtype=np.float64)
    t = crossing_thresholds(spec, box, replicates, rng, cap=float(values.max()))
    return (t[None, :] <= values[:, None]).mean(axis=1)


@dataclass(frozen=True)
class BisectionResult:
    estimate: float
    lo: float
    hi: float
    steps: int
    free: str
    replicates: int


def bisect_critical(spec: ModelSpec, box: LatticeBox, rng: RngStream, lo: float, hi: float,
                    replicates: int = 200, target: float = 0.5, tol: float = 1e-3) -> BisectionResult:
    """Bisect the free parameter (p or lambda) for crossing probability `target`.

    Every replicate's crossing value is computed once, so the crossing
    probability is an exact step function of the parameter.
    """
    free = FREE_PARAMETER.get(spec.model)
    if free is None:
        raise ParameterError('model', f"model {spec.model} has no free parameter to bisect")
    if not lo < hi:
        raise ParameterError(free, f"need lo < hi, got [{lo}, {hi}]")
    t = crossing_thresholds(spec, box, replicates, rng, cap=hi)

    def prob(v: float) -> float:
        return float(np.mean(t <= v))

    p_lo, p_hi = prob(lo), prob(hi)
    if not p_lo <= target <= p_hi or p_lo >= p_hi:
        raise MonotonicityError(
            f"crossing probability {p_lo:.3f} at {free}={lo} and {p_hi:.3f} at {free}={hi} "
            f"do not bracket {target}")
    steps = 0
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if prob(mid) < target:
            lo = mid
        else:
            hi = mid
        steps += 1
    log.info('bisection on %s: [%g, %g] after %d steps', free, lo, hi, steps)
    return BisectionResult(0.5 * (lo + hi), lo, hi, steps, free, replicates)


# --- chemical distances ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadiusProfile:
    radius: float
    sources: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    hops: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return int(self.hops.size)

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.hops, q)) if self.count else math.nan

    @property
    def median(self) -> float:
        return self.quantile(0.5)

    @property
    def smoothed_median(self) -> float:
        """Median of the hop counts read as unit classes [k - 1/2, k + 1/2)."""
        if not self.count:
            return math.nan
        h = np.sort(self.hops)
        m = h[(h.size - 1) // 2]
        below = np.count_nonzero(h < m)
        at = np.count_nonzero(h == m)
        return float(m - 0.5 + (h.size / 2.0 - below) / at)

    @property
    def q1(self) -> float:
        return self.quantile(0.25)

    @property
    def q3(self) -> float:
        return self.quantile(0.75)

    def fraction_at_most(self, bound: int) -> float:
        return float(np.mean(self.hops <= bound)) if self.count else math.nan


def euclidean_from(g: Graph, source: int, box: LatticeBox | None = None) -> np.ndarray:
    if g.positions is None:
        raise ValueError("graph has no positions")
    if box is not None:
        return lattice_distance(g.positions.astype(np.int64), g.positions[source].astype(np.int64), box)
    return np.sqrt(np.sum((g.positions - g.positions[source]) ** 2, axis=1))


def _sample_profile(g: Graph, box: LatticeBox | None, radii: Sequence[float], quota: int,
                    gen: np.random.Generator, band: float) -> list[list[tuple[int, int, int]]]:
    lab = components(g)
    giant = lab.members(lab.largest)
    found: list[list[tuple[int, int, int]]] = [[] for _ in radii]
    if giant.size < 2:
        return found
    in_giant = np.zeros(g.num_nodes, dtype=bool)
    in_giant[giant] = True
    for _ in range(4 * quota):
        if all(len(f) >= quota for f in found):
            break
        s = int(gen.choice(giant))
        eu = euclidean_from(g, s, box)
        hops = None
        for j, r in enumerate(radii):
            if len(found[j]) >= quota:
                continue
            cand = np.flatnonzero(in_giant & (eu >= r) & (eu <= r * (1.0 + band)))
            if cand.size == 0:
                continue
            if hops is None:
                hops = bfs_distances(g, s)
            t = int(gen.choice(cand))
            found[j].append((s, t, int(hops[t])))
    return found


def chemical_distance_profile(spec: ModelSpec, box: LatticeBox | None, radii: Sequence[float],
                              pairs_per_radius: int, rng: RngStream, replicates: int = 1,
                              band: float = 0.05, **options) -> list[RadiusProfile]:
    """Hop counts of pairs at Euclidean distance in [r, (1 + band) r], both in the largest component.

    Each replicate draws its graph from rng.child(i) and contributes up to
    ceil(pairs_per_radius / replicates) pairs per radius. One BFS per source
    serves every radius.
    """
    if pairs_per_radius < 1:
        raise ParameterError('pairs', f"must be >= 1, got {pairs_per_radius}")
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ParameterError('radii', "radii must be positive")
    if box is not None:
        reach = box.side - 1 if box.boundary is Boundary.FREE else box.side / 2
        too_far = [r for r in radii if r > reach * math.sqrt(box.d)]
        if too_far:
            raise ParameterError('radii', f"radii {too_far} do not fit in the box")
    quota = math.ceil(pairs_per_radius / replicates)
    collected: list[list[tuple[int, int, int]]] = [[] for _ in radii]
    for i in range(replicates):
        child = rng.child(i)
        g = generate(spec, box, child, **options)
        for j, rows in enumerate(_sample_profile(g, box, radii, quota, child.generator('pairs'), band)):
            collected[j].extend(rows)
    out = []
    for r, rows in zip(radii, collected):
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
        if not rows:
            log.warning('no admissible pairs at radius %g', r)
        out.append(RadiusProfile(r, arr[:, 0], arr[:, 1], arr[:, 2]))
    return out


@dataclass(frozen=True)
class TwoHopEstimate:
    radius: float
    pairs: int
    within_two: int

    @property
    def fraction(self) -> float:
        return self.within_two / self.pairs if self.pairs else math.nan


def two_hop_fraction(params: HomLrpParams, box: LatticeBox, radius: float, pairs: int, rng: RngStream,
                     band: float = 0.05) -> TwoHopEstimate:
    """Fraction of site pairs at distance in [r, (1 + band) r] joined by at most two edges.

    Whether d(x, y) <= 2 depends only on the edges at x and at y, so each pair
    draws those two edge rows instead of the whole graph. Pairs are uniform
    over the box and are not conditioned on the largest component.
    """
    coords = box.coords()
    pick, draw = rng.generator('pairs'), rng.generator('edges')

    def row(dist):
        with np.errstate(divide='ignore', invalid='ignore'):
            prob = -np.expm1(-params.lam * dist ** -params.alpha)
        prob[dist == 1.0] = params.nn_prob
        prob[dist == 0.0] = 0.0
        return prob

    done = hits = 0
    for _ in range(4 * pairs):
        if done == pairs:
            break
        x = int(pick.integers(box.num_sites))
        from_x = lattice_distance(coords, coords[x], box)
        cand = np.flatnonzero((from_x >= radius) & (from_x <= radius * (1.0 + band)))
        if cand.size == 0:
            continue
        y = int(pick.choice(cand))
        px, py = row(from_x), row(lattice_distance(coords, coords[y], box))
        direct = draw.random() < px[y]
        at_x = draw.random(px.size) < px
        at_y = draw.random(py.size) < py
        at_x[y] = at_y[x] = False
        hits += bool(direct or np.any(at_x & at_y))
        done += 1
    if done < pairs:
        log.warning('only %d of %d pairs at radius %g', done, pairs, radius)
    return TwoHopEstimate(float(radius), done, hits)


def typical_distance(g: Graph, pairs: int, gen: np.random.Generator) -> float:
    """Median hop count between random pairs of the largest component."""
    lab = components(g)
    giant = lab.members(lab.largest)
    if giant.size < 2:
        return math.nan
    sources = gen.choice(giant, size=pairs)
    targets = gen.choice(giant, size=pairs)
    hops = [bfs_distances(g, int(s))[int(t)] for s, t in zip(sources, targets)]
    return float(np.median(hops))


# --- box clusters ------------------------------------------------------------------

def largest_cluster_curve(th: PairThresholds, values: Sequence[float]) -> np.ndarray:
    """Largest component size of the replicate at each (sorted) parameter value."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind='stable')
    out = np.empty(values.size, dtype=np.int64)
    uf = UnionFind(th.num_nodes)
    largest = 1 if th.num_nodes else 0
    pos = 0
    src, dst, thr = th.src.tolist(), th.dst.tolist(), th.threshold.tolist()
    for j in order:
        v = values[j]
        while pos < len(thr) and thr[pos] <= v:
            root = uf.union(src[pos], dst[pos])
            largest = max(largest, uf.size[root])
            pos += 1
        out[j] = largest
    return out


def box_cluster_frequency(params: HomLrpParams, box: LatticeBox, lambdas: Iterable[float],
                          replicates: int, rng: RngStream) -> np.ndarray:
    """Per-lambda fraction of replicates whose largest component reaches N^(alpha/2)."""
    lambdas = np.asarray(list(lambdas), dtype=np.float64)
    need = box.side ** (params.alpha / 2.0)
    hits = np.zeros(lambdas.size)
    for i in range(replicates):
        th = pair_thresholds(params, box, rng.child(i), cap=float(lambdas.max()), free='lambda')
        hits += largest_cluster_curve(th, lambdas) >= need
    return hits / replicates


@dataclass(frozen=True)
class BoxClusterRow:
    side: int
    threshold_size: float
    frequency: float
    replicates: int
    precondition_ok: bool


def box_cluster_scaling(params: HomLrpParams, d: int, sides: Sequence[int], replicates: int,
                        rng: RngStream, check_replicates: int = 200) -> list[BoxClusterRow]:
    """Frequency of |C_N| >= N^(alpha/2) for the largest in-box component, per side N.

    The crossing probability at the smallest side is checked first; when it is
    below 0.9 the rows are flagged and a warning logged.
    """
    if not d < params.alpha < 2 * d:
        raise ParameterError('alpha', f"box-cluster scaling needs alpha in ({d}, {2 * d}), got {params.alpha}")
    sides = sorted(int(s) for s in sides)
    first = LatticeBox(d, sides[0], Boundary.FREE)
    check = crossing_probability(params, first, min(replicates, check_replicates), rng.child(len(sides)))
    ok = check.probability >= 0.9
    if not ok:
        log.warning('crossing probability %.3f at N=%d: lambda=%g is too small for the box-cluster '
                    'frequencies to mean anything', check.probability, sides[0], params.lam)
    rows = []
    for k, side in enumerate(sides):
        box = LatticeBox(d, side, Boundary.FREE)
        freq = box_cluster_frequency(params, box, [params.lam], replicates, rng.child(k))[0]
        log.debug('N=%d: frequency %.4f', side, freq)
        rows.append(BoxClusterRow(side, side ** (params.alpha / 2.0), float(freq), replicates, ok))
    return rows
