"""Branching theory and closed-form predictions.

Generating functions of truncated degree laws, the giant-component fixed
point, distance exponents and the regime table for heterogeneous long-range
percolation. Simulations are tested against these numbers.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, stats

from .params import ContinuumParams

log = logging.getLogger(__name__)

_EQ_TOL = 1e-12


def _eq(x: float, y: float) -> bool:
    return math.isclose(x, y, abs_tol=_EQ_TOL)


class ConvergenceError(RuntimeError):
    pass


class BoundaryCase(ValueError):
    """Input sits exactly on a regime boundary."""


@dataclass(frozen=True, eq=False)
class DegreeLaw:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("degree law needs a non-empty weight vector")
        if (w < 0).any():
            raise ValueError("degree law weights must be non-negative")
        total = math.fsum(w)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"degree law weights sum to {total!r}, not 1")
        object.__setattr__(self, 'weights', w)

    @property
    def k_max(self) -> int:
        return int(self.weights.size - 1)

    @property
    def mean(self) -> float:
        return math.fsum(np.arange(self.weights.size) * self.weights)


def poisson_law(theta: float, k_max: int) -> DegreeLaw:
    """Poisson(theta) truncated at k_max and renormalised."""
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    w = stats.poisson.pmf(np.arange(k_max + 1), theta)
    return DegreeLaw(w / math.fsum(w))


# --- generating functions ---------------------------------------------------

def pgf_g0(law: DegreeLaw, z):
    """G0(z) = sum g_k z^k."""
    return P.polyval(z, law.weights)


def _g1_coefficients(law: DegreeLaw) -> np.ndarray:
    mu = law.mean
    if mu <= 0:
        raise ValueError("G1 is undefined for a law with zero mean degree")
    k = np.arange(1, law.weights.size)
    return k * law.weights[1:] / mu


def pgf_g1(law: DegreeLaw, z):
    """G1(z) = sum_{k>=1} k g_k z^(k-1) / mu."""
    return P.polyval(z, _g1_coefficients(law))


def second_gen_mean(law: DegreeLaw) -> float:
    """vartheta = sum (k-1) k g_k / mu."""
    mu = law.mean
    if mu <= 0:
        raise ValueError("second generation mean needs mu > 0")
    k = np.arange(law.weights.size)
    return math.fsum((k - 1) * k * law.weights) / mu


class Criticality(str, enum.Enum):
    SUBCRITICAL = 'subcritical'
    CRITICAL = 'critical'
    SUPERCRITICAL = 'supercritical'


@dataclass(frozen=True)
class TheoryReport:
    mu: float
    vartheta: float
    z0: float
    chi: float
    criticality: Criticality
    iterations: int = 0
    mean_cluster_size: float = math.inf
    k_max: int = 0
    vartheta_doubled: float | None = None
    chi_doubled: float | None = None

    def as_dict(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            out[key] = val.value if isinstance(val, enum.Enum) else val
        return out


def giant_fraction(law: DegreeLaw, tol: float = 1e-12, max_iter: int = 10 ** 6) -> TheoryReport:
    """Smallest fixed point of G1 by monotone iteration from 0; chi = 1 - G0(z0)."""
    mu = law.mean
    vartheta = second_gen_mean(law)
    if vartheta <= 1.0:
        crit = Criticality.CRITICAL if _eq(vartheta, 1.0) else Criticality.SUBCRITICAL
        return TheoryReport(mu, vartheta, 1.0, 0.0, crit, 0, mean_cluster_size(law), law.k_max)
    coeffs = _g1_coefficients(law)
    z = 0.0
    for it in range(1, max_iter + 1):
        nxt = float(P.polyval(z, coeffs))
        if abs(nxt - z) < tol:
            z = nxt
            break
        z = nxt
    else:
        raise ConvergenceError(f"G1 fixed point not reached in {max_iter} iterations (last z={z!r})")
    chi = 1.0 - float(pgf_g0(law, z))
    log.debug('fixed point z0=%.12g after %d iterations, chi=%.12g', z, it, chi)
    return TheoryReport(mu, vartheta, z, chi, Criticality.SUPERCRITICAL, it, math.inf, law.k_max)


def mean_cluster_size(law: DegreeLaw) -> float:
    """Subcritical mean size of a fixed particle's cluster, 1 + mu/(1 - vartheta)."""
    vartheta = second_gen_mean(law)
    if vartheta >= 1.0:
        return math.inf
    return 1.0 + law.mean / (1.0 - vartheta)


def truncation_sensitivity(law_for: Callable[[int], DegreeLaw], k_max: int) -> TheoryReport:
    """Report at k_max, with vartheta and chi recomputed at 2*k_max attached."""
    base = giant_fraction(law_for(k_max))
    doubled = giant_fraction(law_for(2 * k_max))
    return replace(base, vartheta_doubled=doubled.vartheta, chi_doubled=doubled.chi)


def typical_distance_order(law: DegreeLaw, n: int, tau: float | None = None) -> float:
    """Leading order of the typical distance in the giant of an n-node graph.

    log n / log vartheta for finite variance; for 1 < tau < 2 the
    2 log log n / |log(tau - 1)| scale.
    """
    if tau is not None and 1.0 < tau < 2.0:
        return 2.0 * math.log(math.log(n)) / abs(math.log(tau - 1.0))
    vartheta = second_gen_mean(law)
    if vartheta <= 1.0:
        return math.inf
    return math.log(n) / math.log(vartheta)


# --- long-range distance laws ------------------------------------------------

def distance_exponent(d: int, alpha: float) -> float:
    """Delta = 1 / log2(2d / alpha) for d < alpha < 2d."""
    if not d < alpha < 2 * d:
        raise ValueError(f"alpha must lie in (d, 2d) = ({d}, {2 * d}), got {alpha}")
    return 1.0 / math.log2(2.0 * d / alpha)


def benjamini_bound(d: int, alpha: float) -> int:
    """Hop bound ceil(d / (d - alpha)) for 0 < alpha < d."""
    if not 0 < alpha < d:
        raise ValueError(f"alpha must lie in (0, d) = (0, {d}), got {alpha}")
    return math.ceil(d / (d - alpha) - 1e-12)


def loglog_upper_coefficient(d: int, alpha: float, beta: float) -> float:
    """Upper slope 2 / |ln(beta*alpha/d - 1)| of d(0,x) against ln ln |x|."""
    ratio = beta * alpha / d
    if _eq(ratio, 1.0) or _eq(ratio, 2.0):
        raise BoundaryCase(f"beta*alpha/d = {ratio} sits on a regime boundary")
    if ratio < 1.0:
        raise ValueError(f"beta*alpha/d must exceed 1, got {ratio}")
    if ratio > 2.0:
        raise ValueError(f"beta*alpha/d = {ratio} is outside the infinite-variance range (1, 2)")
    return 2.0 / abs(math.log(ratio - 1.0))


# --- regime table ------------------------------------------------------------

class DegreeRegime(str, enum.Enum):
    INFINITE_DEGREE = 'infinite_degree'
    HEAVY_TAIL_INF_VAR = 'heavy_tail_inf_var'
    HEAVY_TAIL_FIN_VAR = 'heavy_tail_fin_var'
    BOUNDARY = 'boundary'


class LambdaCRegime(str, enum.Enum):
    ZERO = 'zero'
    POSITIVE_FINITE = 'positive_finite'
    INFINITE = 'infinite'
    BOUNDARY = 'boundary'


class DistanceRegime(str, enum.Enum):
    BOUNDED = 'bounded'
    LOGLOG = 'loglog'
    POLYLOG = 'polylog'
    LINEAR = 'linear'
    CONJECTURED = 'conjectured'
    BOUNDARY = 'boundary'


@dataclass(frozen=True)
class RegimeClass:
    degree_regime: DegreeRegime
    lambda_c_regime: LambdaCRegime
    distance_regime: DistanceRegime
    tau: float | None = None
    delta: float | None = None
    conjecture: str | None = None
    boundary: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            'degree_regime': self.degree_regime.value,
            'lambda_c_regime': self.lambda_c_regime.value,
            'distance_regime': self.distance_regime.value,
            'tau': self.tau,
            'delta': self.delta,
            'conjecture': self.conjecture,
            'boundary': list(self.boundary),
        }


def classify_regime(d: int, alpha: float, beta: float) -> RegimeClass:
    """Degree, lambda_c and chemical-distance regime of heterogeneous long-range percolation.

    A field is BOUNDARY only when one of the equalities alpha = d, alpha = 2d,
    beta*alpha = d, beta*alpha = 2d separates its regimes at this point.
    """
    if d < 1 or alpha <= 0 or beta <= 0:
        raise ValueError(f"need d >= 1, alpha > 0, beta > 0; got d={d}, alpha={alpha}, beta={beta}")
    ba = beta * alpha
    hits = tuple(name for name, hit in (('alpha=d', _eq(alpha, d)), ('alpha=2d', _eq(alpha, 2 * d)),
                                        ('beta*alpha=d', _eq(ba, d)), ('beta*alpha=2d', _eq(ba, 2 * d)))
                 if hit)
    low = _eq(alpha, d) or _eq(ba, d)
    infinite = not low and min(alpha, ba) < d
    tau = None if low or infinite else ba / d

    if low:
        degree = DegreeRegime.BOUNDARY
    elif infinite:
        degree = DegreeRegime.INFINITE_DEGREE
    elif _eq(ba, 2 * d):
        degree = DegreeRegime.BOUNDARY
    else:
        degree = DegreeRegime.HEAVY_TAIL_INF_VAR if tau < 2 else DegreeRegime.HEAVY_TAIL_FIN_VAR

    if low or _eq(ba, 2 * d):
        lam_c = LambdaCRegime.BOUNDARY
    elif infinite or ba < 2 * d:
        # infinitely many neighbours percolate at any lambda > 0
        lam_c = LambdaCRegime.ZERO
    elif d == 1 and alpha > 2:
        lam_c = LambdaCRegime.INFINITE
    else:
        lam_c = LambdaCRegime.POSITIVE_FINITE

    delta, conjecture = None, None
    if low or _eq(ba, 2 * d):
        dist = DistanceRegime.BOUNDARY
    elif alpha < d:
        dist = DistanceRegime.BOUNDED
    elif ba < d:
        dist, conjecture = DistanceRegime.CONJECTURED, 'bounded'
    elif ba < 2 * d:
        dist = DistanceRegime.LOGLOG
    elif _eq(alpha, 2 * d):
        dist = DistanceRegime.BOUNDARY
    elif alpha < 2 * d:
        dist, delta = DistanceRegime.POLYLOG, distance_exponent(d, alpha)
    else:
        dist = DistanceRegime.LINEAR
    return RegimeClass(degree, lam_c, dist, tau, delta, conjecture, hits)


class HomogeneousRegime(str, enum.Enum):
    PERCOLATES = 'percolates'
    PERCOLATES_P_NEAR_1 = 'percolates_p_near_1'
    NO_INFINITE_CLUSTER = 'no_infinite_cluster'


def classify_homogeneous(d: int, alpha: float, lam: float | None = None) -> HomogeneousRegime:
    """Infinite-cluster regime of homogeneous long-range percolation."""
    if alpha <= d:
        return HomogeneousRegime.PERCOLATES
    if d >= 2:
        return HomogeneousRegime.PERCOLATES_P_NEAR_1
    if alpha > 2:
        return HomogeneousRegime.NO_INFINITE_CLUSTER
    if alpha < 2:
        return HomogeneousRegime.PERCOLATES_P_NEAR_1
    if lam is None:
        raise ValueError("alpha = 2 in d = 1 needs lambda to decide")
    return HomogeneousRegime.PERCOLATES_P_NEAR_1 if lam > 1 else HomogeneousRegime.NO_INFINITE_CLUSTER


def homogeneous_distance_regime(d: int, alpha: float) -> DistanceRegime:
    if _eq(alpha, d) or _eq(alpha, 2 * d):
        return DistanceRegime.BOUNDARY
    if alpha < d:
        return DistanceRegime.BOUNDED
    return DistanceRegime.POLYLOG if alpha < 2 * d else DistanceRegime.LINEAR


# --- continuum -----------------------------------------------------------------

def expected_origin_degree(params: ContinuumParams) -> float:
    """Mean degree of a planted origin with unit marks:
    nu * integral over [-L/2, L/2]^d of 1 - exp(-lambda |x|^-alpha)."""
    lam, alpha, d = params.lam, params.alpha, params.d
    half = params.L / 2.0

    def integrand(*x):
        r = math.sqrt(sum(c * c for c in x))
        return 1.0 if r == 0.0 else -math.expm1(-lam * r ** -alpha)

    # the integrand is symmetric in every coordinate: integrate one orthant
    value, _ = integrate.nquad(integrand, [(0.0, half)] * d,
                               opts={'limit': 200, 'epsabs': 1e-9, 'epsrel': 1e-9})
    return params.nu * value * 2 ** d
