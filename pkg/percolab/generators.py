"""Samplers for the seven model families.

Every sampler is a pure function of (params, RngStream). Randomness is split
by purpose (`weights`, `points`, `sites`, `edges`, ...) so that samplers that
share a stream also share draws.

Pair randomness uses one Exp(1) clock E per pair: the pair carries an edge iff
E < -log(1 - p_xy), which is Bernoulli(p_xy). For long-range models
-log(1 - p_xy) is an intensity (lambda * W_x * W_y * r^-alpha) so a clock also
fixes the parameter value at which its pair switches on; `pair_thresholds`
returns those values for coupled sweeps.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph import Graph, simplify
from .lattice import class_pairs, class_pairs_at, displacement_classes, nn_pairs
from .params import (Boundary, ContinuumParams, ErParams, HetLrpParams, HomLrpParams,
                     LatticeBox, ModelSpec, NnBondParams, NswParams, ParameterError,
                     SiteBondParams)
from .rng import RngStream
from .theory import DegreeLaw

log = logging.getLogger(__name__)


def pareto_weights(n: int, beta: float, gen: np.random.Generator) -> np.ndarray:
    """i.i.d. Pareto(1, beta) by inverse transform W = U^(-1/beta), U in (0,1]."""
    u = 1.0 - gen.random(n)
    if math.isinf(beta):
        return np.ones(n)
    return u ** (-1.0 / beta)


def _nn_intensity(p: float) -> float:
    return math.inf if p >= 1.0 else -math.log1p(-p)


# --- mean-field graphs -----------------------------------------------------

def _upper_pair(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map pair numbers 0..n(n-1)/2-1 to (i, j), i < j, row-major."""
    rows = np.arange(n, dtype=np.int64)
    offset = rows * n - rows * (rows + 1) // 2
    i = np.searchsorted(offset, k, side='right') - 1
    j = k - offset[i] + i + 1
    return i, j


def gen_er(params: ErParams, rng: RngStream) -> Graph:
    """ER(n, p): binomial edge count, then a uniform subset of the pairs.

    Equal in law to one Bernoulli(p) per pair and independent of n^2.
    """
    n, p = params.n, params.edge_prob
    gen = rng.generator('edges')
    total = n * (n - 1) // 2
    k = int(gen.binomial(total, p)) if total else 0
    picks = np.sort(gen.choice(total, size=k, replace=False)) if k else np.empty(0, np.int64)
    i, j = _upper_pair(picks.astype(np.int64), n)
    return Graph.from_edges(n, i, j)


def nsw_degree_law(params: NswParams) -> DegreeLaw:
    """g_0 = 0, g_k = k^-(tau+1) / Z on 1..k_max."""
    if params.k_max < 1:
        raise ParameterError('k_max', f"degree cutoff must be >= 1, got {params.k_max}")
    k = np.arange(1, params.k_max + 1, dtype=np.float64)
    raw = k ** -(params.tau + 1.0)
    weights = np.concatenate([[0.0], raw / math.fsum(raw)])
    return DegreeLaw(weights)


def sample_degrees(law: DegreeLaw, n: int, gen: np.random.Generator) -> np.ndarray:
    return gen.choice(law.k_max + 1, size=n, p=law.weights)


def molloy_reed(degrees, rng: RngStream) -> Graph:
    """Uniform random pairing of edge ends.

    An odd number of ends gets one extra end on a uniformly chosen node.
    Self-loops and parallel edges are kept; `graph.simplify` reports them.
    """
    degrees = np.asarray(degrees, dtype=np.int64).copy()
    n = degrees.size
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if (degrees < 0).any():
        raise ValueError("degrees must be non-negative")
    if not degrees.any():
        raise ValueError("all-zero degree sequence has nothing to pair")
    gen = rng.generator('stubs')
    if degrees.sum() % 2:
        degrees[gen.integers(n)] += 1
    stubs = gen.permutation(np.repeat(np.arange(n, dtype=np.int64), degrees))
    g = Graph(n, stubs.reshape(-1, 2))
    _, report = simplify(g)
    log.debug('molloy-reed: %d edges, %d self-loops, %d parallel',
              g.num_edges, report.self_loops, report.parallel_edges)
    return g


def gen_nsw(params: NswParams, rng: RngStream) -> Graph:
    law = nsw_degree_law(params)
    degrees = sample_degrees(law, params.n, rng.generator('degrees'))
    return molloy_reed(degrees, rng)


# --- lattice models ----------------------------------------------------------

def gen_nn_bond(box: LatticeBox, p: float, rng: RngStream) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise ParameterError('p', f"bond probability must lie in [0,1], got {p}")
    src, dst = nn_pairs(box)
    clocks = rng.generator('edges').standard_exponential(src.size)
    keep = clocks < _nn_intensity(p)
    return Graph.from_edges(box.num_sites, src[keep], dst[keep], positions=box.coords())


IntensityFn = Callable[[np.ndarray, np.ndarray, int], 'np.ndarray | float']


def _walk_classes(box: LatticeBox, gen: np.random.Generator):
    """Yield (src, dst, clock, sqnorm) per displacement class in the fixed order."""
    classes = displacement_classes(box)
    for delta, sq, inv in zip(classes.delta, classes.sqnorm.tolist(), classes.self_inverse.tolist()):
        src, dst = class_pairs(box, delta, inv)
        yield src, dst, gen.standard_exponential(src.size), sq


def _exhaustive(box: LatticeBox, gen: np.random.Generator, intensity: IntensityFn) -> tuple[np.ndarray, np.ndarray]:
    us, vs = [], []
    for src, dst, clock, sq in _walk_classes(box, gen):
        keep = clock < intensity(src, dst, sq)
        us.append(src[keep])
        vs.append(dst[keep])
    if not us:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(us), np.concatenate(vs)


def _hom_intensity(params: HomLrpParams) -> IntensityFn:
    nn_rate = _nn_intensity(params.nn_prob)

    def rate(src, dst, sq):
        if sq == 1:
            return nn_rate
        return params.lam * sq ** (-params.alpha / 2.0)
    return rate


def _binomial_fast_path(box: LatticeBox, params: HomLrpParams, gen: np.random.Generator):
    """Binomial count per displacement class, edges placed uniformly inside it."""
    classes = displacement_classes(box)
    r = classes.norm
    prob = np.where(classes.sqnorm == 1, params.nn_prob,
                    -np.expm1(-params.lam * r ** -params.alpha))
    counts = gen.binomial(classes.count, prob)
    us, vs = [], []
    for c in np.flatnonzero(counts):
        k = int(counts[c])
        picks = np.sort(gen.choice(int(classes.count[c]), size=k, replace=False))
        if box.boundary is Boundary.FREE:
            s, t = class_pairs_at(box, classes.delta[c], picks)
        else:
            s, t = class_pairs(box, classes.delta[c], bool(classes.self_inverse[c]))
            s, t = s[picks], t[picks]
        us.append(s)
        vs.append(t)
    if not us:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(us), np.concatenate(vs)


def gen_hom_lrp(box: LatticeBox, params: HomLrpParams, rng: RngStream,
                method: str = 'exhaustive') -> Graph:
    """p for nearest neighbours, 1 - exp(-lambda r^-alpha) beyond.

    method='binomial' is the displacement-class fast path: same law, but not
    coupled pair-by-pair with the exhaustive sampler.
    """
    gen = rng.generator('edges')
    if method == 'exhaustive':
        u, v = _exhaustive(box, gen, _hom_intensity(params))
    elif method == 'binomial':
        u, v = _binomial_fast_path(box, params, gen)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return Graph.from_edges(box.num_sites, u, v, positions=box.coords())


def _het_shells(box: LatticeBox, lam: float, alpha: float, weights: np.ndarray,
                gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Pairs x < y of a free 1-d box, grouped by weight level and distance shell.

    Level b holds the sites with W in [2^b, 2^(b+1)), shell s the offsets in
    [2^s, 2^(s+1)). Within one (b, s) block the intensity towards y is at most
    lambda W_x 2^(b+1) 2^(-s alpha); blocks where that bound reaches 1 get one
    clock per pair, the rest get Poisson points at the bound, thinned to the
    exact intensity.
    """
    n = box.side
    sites = np.arange(n, dtype=np.int64)
    level = np.floor(np.log2(weights)).astype(np.int64)
    shells = range(int(math.log2(n - 1)) + 1) if n > 1 else range(0)
    us, vs = [], []
    for b in np.unique(level).tolist():
        members = np.flatnonzero(level == b)
        w_top = 2.0 ** (b + 1)
        for s in shells:
            near = 2 ** s
            lo = np.searchsorted(members, sites + near)
            count = np.searchsorted(members, sites + 2 * near) - lo
            bound = lam * weights * w_top * float(near) ** -alpha
            dense = (count > 0) & (bound >= 1.0)
            sparse = (count > 0) & ~dense

            k = count[dense]
            if k.size:
                xs = np.repeat(sites[dense], k)
                first = np.repeat(np.cumsum(k) - k, k)
                ys = members[np.repeat(lo[dense], k) + np.arange(xs.size) - first]
                rate = lam * weights[xs] * weights[ys] * (ys - xs).astype(np.float64) ** -alpha
                keep = gen.standard_exponential(xs.size) < rate
                us.append(xs[keep])
                vs.append(ys[keep])

            hits = gen.poisson(count[sparse] * bound[sparse])
            if hits.sum():
                xs = np.repeat(sites[sparse], hits)
                ys = members[np.repeat(lo[sparse], hits) + gen.integers(0, np.repeat(count[sparse], hits))]
                rate = lam * weights[xs] * weights[ys] * (ys - xs).astype(np.float64) ** -alpha
                keep = gen.random(xs.size) * np.repeat(bound[sparse], hits) < rate
                us.append(xs[keep])
                vs.append(ys[keep])
    if not us:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    # a pair hit by several Poisson points is still one edge
    key = np.unique(np.concatenate(us) * n + np.concatenate(vs))
    return key // n, key % n


def gen_het_lrp(box: LatticeBox, params: HetLrpParams, rng: RngStream,
                weights: np.ndarray | None = None, method: str = 'exhaustive') -> Graph:
    """Pareto weights, then 1 - exp(-lambda W_x W_y r^-alpha) per pair.

    Passing `weights` freezes the weight field (W = 1 everywhere recovers the
    modified homogeneous model on the same clocks). method='shells' is the
    level/shell thinning sampler for free 1-d boxes: same law, cost close to
    the edge count, not coupled with the exhaustive sampler.
    """
    if weights is None:
        weights = pareto_weights(box.num_sites, params.beta, rng.generator('weights'))
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (box.num_sites,):
        raise ValueError(f"need one weight per site, got shape {weights.shape}")
    gen = rng.generator('edges')
    if method == 'exhaustive':
        lam, half_alpha = params.lam, params.alpha / 2.0

        def rate(src, dst, sq):
            return lam * weights[src] * weights[dst] * sq ** -half_alpha

        u, v = _exhaustive(box, gen, rate)
    elif method == 'shells':
        if box.d != 1 or box.boundary is not Boundary.FREE:
            raise ParameterError('method', f"shells sampler needs a free 1-d box, got d={box.d} "
                                           f"{box.boundary.value}")
        if not np.all(weights > 0):
            raise ValueError("shells sampler needs positive weights")
        u, v = _het_shells(box, params.lam, params.alpha, weights, gen)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return Graph.from_edges(box.num_sites, u, v, positions=box.coords(), weights=weights)


def gen_site_bond(box: LatticeBox, params: SiteBondParams, rng: RngStream,
                  method: str = 'exhaustive') -> Graph:
    """Occupied sites i.i.d. r*, bonds 1 - exp(-lambda* r^-alpha) between occupied sites.

    Bonds are drawn on the full box and thinned, so r* = 1 reproduces the
    modified homogeneous model on the same stream.
    """
    occupied = rng.generator('sites').random(box.num_sites) < params.r_star
    full = gen_hom_lrp(box, HomLrpParams(lam=params.lam_star, alpha=params.alpha), rng, method)
    e = full.edges
    keep = occupied[e[:, 0]] & occupied[e[:, 1]]
    return Graph(box.num_sites, e[keep], full.positions, occupied=occupied)


# --- continuum -----------------------------------------------------------------

@dataclass(frozen=True)
class _Cloud:
    points: np.ndarray
    marks: np.ndarray


def _continuum_cloud(params: ContinuumParams, rng: RngStream) -> _Cloud:
    gen = rng.generator('points')
    count = int(gen.poisson(params.nu * params.volume))
    pts = gen.uniform(-params.L / 2.0, params.L / 2.0, size=(count, params.d))
    if params.plant_origin:
        pts = np.vstack([np.zeros((1, params.d)), pts])
    wgen = rng.generator('weights')
    if params.homogeneous_marks:
        marks = np.ones(pts.shape[0])
    else:
        marks = pareto_weights(pts.shape[0], params.beta, wgen)
    return _Cloud(pts, marks)


def _continuum_row(cloud: _Cloud, i: int, params: ContinuumParams, gen: np.random.Generator) -> np.ndarray:
    pts, marks = cloud.points, cloud.marks
    others = pts[i + 1:]
    clock = gen.standard_exponential(others.shape[0])
    dist = np.sqrt(np.sum((others - pts[i]) ** 2, axis=1))
    with np.errstate(divide='ignore'):
        rate = params.lam * marks[i] * marks[i + 1:] * dist ** -params.alpha
    return np.flatnonzero(clock < rate) + i + 1


def gen_continuum(params: ContinuumParams, rng: RngStream) -> Graph:
    """Marked Poisson cloud in [-L/2, L/2]^d with edge law 1 - exp(-lambda W W r^-alpha).

    With plant_origin the extra particle at 0 is node 0.
    """
    cloud = _continuum_cloud(params, rng)
    gen = rng.generator('edges')
    us, vs = [], []
    for i in range(cloud.points.shape[0] - 1):
        nbrs = _continuum_row(cloud, i, params, gen)
        us.append(np.full(nbrs.size, i, dtype=np.int64))
        vs.append(nbrs)
    n = cloud.points.shape[0]
    u = np.concatenate(us) if us else np.empty(0, np.int64)
    v = np.concatenate(vs) if vs else np.empty(0, np.int64)
    return Graph.from_edges(n, u, v, positions=cloud.points, weights=cloud.marks)


def origin_degree(params: ContinuumParams, rng: RngStream) -> int:
    """Degree of the planted origin, from the same draws gen_continuum makes."""
    if not params.plant_origin:
        raise ParameterError('plant_origin', "origin degree needs a planted origin")
    cloud = _continuum_cloud(params, rng)
    if cloud.points.shape[0] < 2:
        return 0
    return int(_continuum_row(cloud, 0, params, rng.generator('edges')).size)


# --- dispatch --------------------------------------------------------------------

SAMPLING_METHODS = {'hom': ('exhaustive', 'binomial'), 'sitebond': ('exhaustive', 'binomial'),
                    'het': ('exhaustive', 'shells')}


def sampler_options(spec: ModelSpec, method: str | None) -> dict:
    """The `method` keyword for `generate`, kept only where the model offers it."""
    if method and method in SAMPLING_METHODS.get(spec.model, ()):
        return {'method': method}
    return {}


def generate(spec: ModelSpec, box: LatticeBox | None, rng: RngStream, **options) -> Graph:
    if isinstance(spec, ErParams):
        return gen_er(spec, rng)
    if isinstance(spec, NswParams):
        return gen_nsw(spec, rng)
    if isinstance(spec, ContinuumParams):
        return gen_continuum(spec, rng)
    if box is None:
        raise ParameterError('side', f"model {spec.model} needs a lattice box")
    if isinstance(spec, NnBondParams):
        return gen_nn_bond(box, spec.p, rng)
    if isinstance(spec, HomLrpParams):
        return gen_hom_lrp(box, spec, rng, **options)
    if isinstance(spec, HetLrpParams):
        return gen_het_lrp(box, spec, rng, **options)
    if isinstance(spec, SiteBondParams):
        return gen_site_bond(box, spec, rng, **options)
    raise TypeError(f"unsupported model spec {type(spec).__name__}")


# --- coupled thresholds ------------------------------------------------------------

FREE_PARAMETER = {'nn': 'p', 'hom': 'lambda', 'het': 'lambda', 'sitebond': 'lambda'}


@dataclass(frozen=True)
class PairThresholds:
    """Pairs of one replicate sorted by the parameter value that switches them on.

    At parameter value t the replicate's graph is exactly the pairs with
    threshold <= t (threshold 0 means present at every value).
    """
    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    threshold: np.ndarray
    free: str

    def __len__(self):
        return int(self.threshold.size)


def _collect(box: LatticeBox, gen: np.random.Generator, switch, cap: float):
    us, vs, ts = [], [], []
    for src, dst, clock, sq in _walk_classes(box, gen):
        th = switch(src, dst, clock, sq)
        keep = th <= cap
        us.append(src[keep])
        vs.append(dst[keep])
        ts.append(th[keep])
    if not us:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    return np.concatenate(us), np.concatenate(vs), np.concatenate(ts)


def pair_thresholds(spec: ModelSpec, box: LatticeBox, rng: RngStream, cap: float = math.inf,
                    free: str | None = None) -> PairThresholds:
    """Switch-on values of the free parameter, read off the generators' own clocks.

    `graph_at(result, t)` equals the matching gen_* output at that parameter
    value on the same stream. Only pairs switching on at or below `cap` are kept.
    """
    free = free or FREE_PARAMETER.get(spec.model, '')
    gen = rng.generator('edges')
    mask = None
    if isinstance(spec, NnBondParams) and free == 'p':
        src, dst = nn_pairs(box)
        thr = -np.expm1(-gen.standard_exponential(src.size))
        keep = thr <= cap
        src, dst, thr = src[keep], dst[keep], thr[keep]
    elif isinstance(spec, HomLrpParams) and free == 'p':
        lam, a2 = spec.lam, spec.alpha / 2.0

        def switch(src, dst, clock, sq):
            if sq == 1:
                return -np.expm1(-clock)
            return np.where(clock < lam * sq ** -a2, 0.0, np.inf)
        src, dst, thr = _collect(box, gen, switch, cap)
    elif free == 'lambda' and isinstance(spec, (HomLrpParams, HetLrpParams, SiteBondParams)):
        if isinstance(spec, HetLrpParams):
            w = pareto_weights(box.num_sites, spec.beta, rng.generator('weights'))
        else:
            w = np.ones(box.num_sites)
        if isinstance(spec, SiteBondParams):
            mask = rng.generator('sites').random(box.num_sites) < spec.r_star
        fixed_nn = _nn_intensity(spec.p) if isinstance(spec, HomLrpParams) and spec.p is not None else None
        a2 = spec.alpha / 2.0

        def switch(src, dst, clock, sq):
            if sq == 1 and fixed_nn is not None:
                return np.where(clock < fixed_nn, 0.0, np.inf)
            return clock / (w[src] * w[dst] * sq ** -a2)
        src, dst, thr = _collect(box, gen, switch, cap)
    else:
        raise ParameterError('model', f"no coupled sweep over {free or '?'} for model {spec.model}")
    if mask is not None:
        ok = mask[src] & mask[dst]
        src, dst, thr = src[ok], dst[ok], thr[ok]
    order = np.argsort(thr, kind='stable')
    return PairThresholds(box.num_sites, src[order], dst[order], thr[order], free)


def graph_at(th: PairThresholds, value: float, positions: np.ndarray | None = None) -> Graph:
    """The replicate's graph at free-parameter value `value`."""
    k = int(np.searchsorted(th.threshold, value, side='right'))
    return Graph.from_edges(th.num_nodes, th.src[:k], th.dst[:k], positions=positions)
