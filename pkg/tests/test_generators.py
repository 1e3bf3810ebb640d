import math
from itertools import combinations

import numpy as np
import pytest
from scipy import stats

from percolab.generators import (_upper_pair, gen_continuum, gen_er, gen_het_lrp, gen_hom_lrp, gen_nn_bond,
                                 gen_nsw, gen_site_bond, generate, graph_at, molloy_reed, nsw_degree_law,
                                 origin_degree, pair_thresholds, pareto_weights, sampler_options)
from percolab.graph import simplify
from percolab.params import (Boundary, ContinuumParams, ErParams, HetLrpParams, HomLrpParams,
                             LatticeBox, NnBondParams, NswParams, ParameterError, SiteBondParams)
from percolab.rng import RngStream
from percolab.theory import expected_origin_degree


def _edge_set(g):
    return {tuple(sorted(e)) for e in g.edges.tolist()}


def _lengths(g):
    e = g.edges
    return np.sqrt(np.sum((g.positions[e[:, 0]] - g.positions[e[:, 1]]) ** 2, axis=1))


# --- mean-field graphs -----------------------------------------------------

def test_upper_pair_enumerates_row_major():
    i, j = _upper_pair(np.arange(10), 5)
    assert list(zip(i.tolist(), j.tolist())) == list(combinations(range(5), 2))


def test_er_is_deterministic(rng):
    a = gen_er(ErParams(200, p=0.05), rng)
    b = gen_er(ErParams(200, p=0.05), rng)
    assert np.array_equal(a.edges, b.edges)


def test_er_is_simple(rng):
    g = gen_er(ErParams(60, p=0.3), rng)
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    _, report = simplify(g)
    assert report.parallel_edges == 0


def test_er_tiny_p_is_edgeless(rng):
    assert gen_er(ErParams(100, p=1e-12), rng).num_edges == 0


def test_er_mean_edge_count(rng):
    counts = [gen_er(ErParams(30, p=0.2), rng.child(i)).num_edges for i in range(200)]
    expected = 435 * 0.2
    sd = math.sqrt(435 * 0.2 * 0.8 / 200)
    assert abs(np.mean(counts) - expected) < 4 * sd


@pytest.mark.parametrize('spec', [ErParams(24, p=0.15), NswParams(24, 2.5, k_max=12)])
def test_mean_field_graphs_are_exchangeable(spec, rng):
    # a fixed relabelling must not change the law of label-dependent statistics
    perm = np.random.default_rng(11).permutation(spec.n)
    inside = np.zeros(spec.n, dtype=bool)
    inside[:8] = True
    moved = np.zeros(spec.n, dtype=bool)
    moved[perm[:8]] = True
    first, second, deg_first, deg_last = [], [], [], []
    for i in range(1500):
        e = generate(spec, None, rng.child(i)).edges
        f = generate(spec, None, rng.child(10 ** 6 + i))
        first.append(int(np.sum(inside[e[:, 0]] & inside[e[:, 1]])))
        second.append(int(np.sum(moved[f.edges[:, 0]] & moved[f.edges[:, 1]])))
        deg_first.append(int(np.sum(e == 0)))
        deg_last.append(int(np.sum(f.edges == spec.n - 1)))
    assert stats.ks_2samp(first, second).pvalue > 1e-3
    assert stats.ks_2samp(deg_first, deg_last).pvalue > 1e-3


def test_nsw_law_cutoff_one():
    law = nsw_degree_law(NswParams(10, 2.0, k_max=1))
    assert law.weights.tolist() == [0.0, 1.0]


def test_nsw_law_mean_matches_direct_sum():
    tau, k_max = 2.5, 10 ** 4
    law = nsw_degree_law(NswParams(10, tau, k_max))
    num = math.fsum(k ** -tau for k in range(1, k_max + 1))
    den = math.fsum(k ** -(tau + 1) for k in range(1, k_max + 1))
    assert law.mean == pytest.approx(num / den, rel=1e-10)


def test_nsw_degrees_follow_law(rng):
    g = gen_nsw(NswParams(2000, 2.5, k_max=50), rng)
    assert g.num_nodes == 2000
    # every node has degree >= 1 since g_0 = 0
    assert g.degrees().min() >= 1


def test_molloy_reed_single_edge(rng):
    g = molloy_reed([1, 1], rng)
    assert sorted(g.edges[0].tolist()) == [0, 1]


def test_molloy_reed_keeps_degrees(rng):
    degrees = np.array([3, 1, 2, 2, 4, 1, 1])
    for i in range(20):
        g = molloy_reed(degrees, rng.child(i))
        got = g.degrees()
        if degrees.sum() % 2 == 0:
            assert got.tolist() == degrees.tolist()
        else:
            assert (got - degrees).sum() == 1
            assert set((got - degrees).tolist()) <= {0, 1}
        assert got.sum() == 2 * g.num_edges


def test_molloy_reed_odd_total_gets_one_extra_end(rng):
    degrees = np.array([1, 1, 1])
    g = molloy_reed(degrees, rng)
    assert g.num_edges == 2
    assert g.degrees().sum() == 4


@pytest.mark.parametrize('degrees', [[0, 0, 0], [1, -1], [4]])
def test_molloy_reed_rejects(degrees, rng):
    with pytest.raises(ValueError):
        molloy_reed(degrees, rng)


def test_molloy_reed_pairing_is_uniform(rng):
    # ends {0, 0, 1, 2}: one of three matchings closes a loop at 0
    draws = 30000
    loops = 0
    for i in range(draws):
        _, report = simplify(molloy_reed([2, 1, 1], rng.child(i)))
        loops += report.self_loops
    observed = [loops, draws - loops]
    assert stats.chisquare(observed, [draws / 3, 2 * draws / 3]).pvalue > 1e-3


# --- lattice models ------------------------------------------------------------

def test_nn_bond_full_path(rng):
    g = gen_nn_bond(LatticeBox(1, 4), 1.0, rng)
    assert _edge_set(g) == {(0, 1), (1, 2), (2, 3)}


def test_nn_bond_empty(rng):
    assert gen_nn_bond(LatticeBox(2, 6), 0.0, rng).num_edges == 0


def test_nn_bond_rejects_bad_p(rng):
    with pytest.raises(ParameterError):
        gen_nn_bond(LatticeBox(2, 6), 1.5, rng)


def test_nn_bond_degree_and_mean(rng):
    box = LatticeBox(2, 10)
    counts = []
    for i in range(100):
        g = gen_nn_bond(box, 0.3, rng.child(i))
        assert g.degrees().max() <= 2 * box.d
        counts.append(g.num_edges)
    sd = math.sqrt(180 * 0.3 * 0.7 / 100)
    assert abs(np.mean(counts) - 54.0) < 4 * sd


@pytest.mark.parametrize('method', ['exhaustive', 'binomial'])
def test_hom_lambda_zero_is_nearest_neighbour_only(rng, method):
    g = gen_hom_lrp(LatticeBox(2, 8), HomLrpParams(lam=0.0, alpha=3.0, p=0.5), rng, method)
    assert g.num_edges > 0
    assert np.all(_lengths(g) == 1.0)


@pytest.mark.parametrize('method', ['exhaustive', 'binomial'])
def test_hom_full_nearest_neighbours(rng, method):
    g = gen_hom_lrp(LatticeBox(1, 10), HomLrpParams(lam=0.0, alpha=3.0, p=1.0), rng, method)
    assert _edge_set(g) == {(i, i + 1) for i in range(9)}


@pytest.mark.parametrize('method', ['exhaustive', 'binomial'])
def test_hom_edge_frequency_at_distance_ten(rng, method):
    box = LatticeBox(1, 2048)
    params = HomLrpParams(lam=1.0, alpha=1.5)
    hits = 0
    for i in range(20):
        e = gen_hom_lrp(box, params, rng.child(i), method).edges
        hits += int(np.sum(np.abs(e[:, 0] - e[:, 1]) == 10))
    trials = 20 * (2048 - 10)
    p = 1.0 - math.exp(-10 ** -1.5)
    assert abs(hits - trials * p) < 4 * math.sqrt(trials * p * (1 - p))


def test_hom_unknown_method(rng):
    with pytest.raises(ValueError):
        gen_hom_lrp(LatticeBox(1, 8), HomLrpParams(1.0, 2.0), rng, 'magic')


def test_hom_torus_has_no_loops(rng):
    g = gen_hom_lrp(LatticeBox(2, 4, Boundary.TORUS), HomLrpParams(lam=2.0, alpha=1.0), rng)
    assert np.all(g.edges[:, 0] != g.edges[:, 1])


def test_pareto_weights_at_least_one(rng):
    w = pareto_weights(10000, 1.5, rng.generator('weights'))
    assert w.min() >= 1.0
    assert np.all(pareto_weights(5, math.inf, rng.generator('weights')) == 1.0)


def test_het_with_unit_weights_is_modified_hom(rng):
    box = LatticeBox(2, 10)
    het = gen_het_lrp(box, HetLrpParams(lam=0.4, alpha=3.0, beta=1.0), rng, weights=np.ones(box.num_sites))
    hom = gen_hom_lrp(box, HomLrpParams(lam=0.4, alpha=3.0), rng)
    assert _edge_set(het) == _edge_set(hom)


def test_het_dominates_hom_on_shared_stream(rng):
    box = LatticeBox(2, 10)
    het = gen_het_lrp(box, HetLrpParams(lam=0.4, alpha=3.0, beta=1.5), rng)
    hom = gen_het_lrp(box, HetLrpParams(lam=0.4, alpha=3.0, beta=1.5), rng, weights=np.ones(box.num_sites))
    assert _edge_set(hom) <= _edge_set(het)
    assert het.weights.min() >= 1.0


def test_het_rejects_wrong_weight_shape(rng):
    with pytest.raises(ValueError):
        gen_het_lrp(LatticeBox(1, 8), HetLrpParams(1.0, 2.0, 1.0), rng, weights=np.ones(3))


@pytest.mark.parametrize('model, method', [('het', 'exhaustive'), ('het', 'shells'),
                                           ('hom', 'exhaustive'), ('hom', 'binomial')])
def test_lattice_edges_follow_conditional_law(rng, model, method):
    # frozen weights: pairs bucketed by intensity must match a binomial count
    box = LatticeBox(1, 48)
    n, lam, alpha, reps = box.num_sites, 0.3, 2.0, 300
    if model == 'het':
        weights = pareto_weights(n, 1.2, np.random.default_rng(5))
    else:
        weights = np.ones(n)
    hits = np.zeros((n, n))
    for i in range(reps):
        if model == 'het':
            g = gen_het_lrp(box, HetLrpParams(lam, alpha, 1.2), rng.child(i), weights=weights, method=method)
        else:
            g = gen_hom_lrp(box, HomLrpParams(lam=lam, alpha=alpha), rng.child(i), method)
        e = np.sort(g.edges, axis=1)
        np.add.at(hits, (e[:, 0], e[:, 1]), 1)
    x, y = np.triu_indices(n, 1)
    intensity = lam * weights[x] * weights[y] * (y - x).astype(float) ** -alpha
    prob = -np.expm1(-intensity)
    for bucket in np.array_split(np.argsort(intensity), 10):
        lo, hi = stats.binom.interval(1 - 1e-5, reps * bucket.size, prob[bucket].mean())
        assert lo <= hits[x[bucket], y[bucket]].sum() <= hi


def test_shells_sampler_edge_count_matches_exhaustive(rng):
    box = LatticeBox(1, 300)
    params = HetLrpParams(lam=0.5, alpha=2.0, beta=0.9)
    shells = [gen_het_lrp(box, params, rng.child(i), method='shells') for i in range(200)]
    full = [gen_het_lrp(box, params, rng.child(10 ** 6 + i)) for i in range(200)]
    # same weights on a shared stream, different edge draws
    assert np.array_equal(shells[0].weights, gen_het_lrp(box, params, rng.child(0)).weights)
    assert stats.mannwhitneyu([g.num_edges for g in shells], [g.num_edges for g in full]).pvalue > 1e-3


def test_shells_sampler_is_simple_and_ordered(rng):
    g = gen_het_lrp(LatticeBox(1, 500), HetLrpParams(lam=2.0, alpha=1.5, beta=0.8), rng, method='shells')
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    _, report = simplify(g)
    assert report.parallel_edges == 0


def test_shells_sampler_saturates_to_complete_graph(rng):
    box = LatticeBox(1, 20)
    g = gen_het_lrp(box, HetLrpParams(lam=1e9, alpha=2.0, beta=1.0), rng, weights=np.ones(20), method='shells')
    assert _edge_set(g) == set(combinations(range(20), 2))


@pytest.mark.parametrize('box', [LatticeBox(2, 8), LatticeBox(1, 16, Boundary.TORUS)])
def test_shells_sampler_needs_free_line(rng, box):
    with pytest.raises(ParameterError):
        gen_het_lrp(box, HetLrpParams(1.0, 3.0, 1.0), rng, method='shells')


def test_het_unknown_method(rng):
    with pytest.raises(ValueError):
        gen_het_lrp(LatticeBox(1, 8), HetLrpParams(1.0, 2.0, 1.0), rng, method='binomial')


def test_site_bond_all_occupied_is_modified_hom(rng):
    box = LatticeBox(2, 8)
    sb = gen_site_bond(box, SiteBondParams(r_star=1.0, lam_star=0.5, alpha=2.5), rng)
    hom = gen_hom_lrp(box, HomLrpParams(lam=0.5, alpha=2.5), rng)
    assert np.array_equal(sb.edges, hom.edges)
    assert sb.occupied.all()


def test_site_bond_no_sites_no_edges(rng):
    g = gen_site_bond(LatticeBox(2, 8), SiteBondParams(r_star=0.0, lam_star=5.0, alpha=2.5), rng)
    assert g.num_edges == 0
    assert not g.occupied.any()


def test_site_bond_edges_join_occupied_sites(rng):
    box = LatticeBox(2, 64)
    g = gen_site_bond(box, SiteBondParams(r_star=0.6, lam_star=0.2, alpha=3.0), rng, method='binomial')
    assert abs(g.occupied.mean() - 0.6) < 4 * math.sqrt(0.24 / box.num_sites)
    assert g.occupied[g.edges].all()


# --- continuum -------------------------------------------------------------------

def test_continuum_point_count(rng):
    params = ContinuumParams(d=2, nu=2.0, L=50.0, lam=0.0, alpha=3.0)
    for i in range(3):
        g = gen_continuum(params, rng.child(i))
        assert abs(g.num_nodes - 5000) < 4 * math.sqrt(5000)
        assert g.num_edges == 0
        assert np.all(np.abs(g.positions) <= 25.0)


def test_continuum_planted_origin(rng):
    params = ContinuumParams(d=2, nu=0.5, L=10.0, lam=1.0, alpha=3.0, plant_origin=True)
    g = gen_continuum(params, rng)
    assert g.positions[0].tolist() == [0.0, 0.0]
    assert np.all(g.weights == 1.0)


def test_origin_degree_matches_full_sample(rng):
    params = ContinuumParams(d=2, nu=1.0, L=12.0, lam=1.0, alpha=2.5, beta=2.0, plant_origin=True)
    for i in range(5):
        child = rng.child(i)
        assert origin_degree(params, child) == gen_continuum(params, child).degrees()[0]


def test_origin_degree_needs_planted_origin(rng):
    with pytest.raises(ParameterError):
        origin_degree(ContinuumParams(d=1, nu=1.0, L=4.0, lam=1.0, alpha=2.0), rng)


def test_origin_degree_mean_matches_integral(rng):
    params = ContinuumParams(d=2, nu=2.0, L=20.0, lam=1.0, alpha=3.0, plant_origin=True)
    m = expected_origin_degree(params)
    draws = [origin_degree(params, rng.child(i)) for i in range(300)]
    assert abs(np.mean(draws) - m) < 4 * math.sqrt(m / 300)


@pytest.mark.parametrize('alpha', [1.5, 2.0])
def test_origin_degree_grows_with_box_when_alpha_at_most_d(rng, alpha):
    means = []
    for L in (25.0, 50.0, 100.0, 200.0):
        params = ContinuumParams(d=2, nu=1.0, L=L, lam=1.0, alpha=alpha, plant_origin=True)
        means.append(np.mean([origin_degree(params, rng.child(i)) for i in range(200)]))
    assert np.all(np.diff(means) > 0)


def test_origin_degree_gains_a_constant_per_doubling_at_alpha_equal_d():
    # |x|^-2 is scale free in the plane: each doubling of L adds about 2 pi ln 2
    means = [expected_origin_degree(ContinuumParams(d=2, nu=1.0, L=L, lam=1.0, alpha=2.0, plant_origin=True))
             for L in (25.0, 50.0, 100.0, 200.0)]
    assert list(np.diff(means)) == pytest.approx([2 * math.pi * math.log(2)] * 3, rel=0.02)


# --- dispatch and coupling ---------------------------------------------------------

@pytest.mark.parametrize('spec, box', [
    (ErParams(50, p=0.1), None),
    (NswParams(50, 2.5, k_max=20), None),
    (NnBondParams(0.5), LatticeBox(2, 6)),
    (HomLrpParams(0.5, 3.0), LatticeBox(2, 6)),
    (HetLrpParams(0.5, 3.0, 2.0), LatticeBox(2, 6)),
    (SiteBondParams(0.7, 0.5, 3.0), LatticeBox(2, 6)),
    (ContinuumParams(d=1, nu=1.0, L=30.0, lam=1.0, alpha=2.0), None),
])
def test_generate_is_reproducible(spec, box, rng):
    a = generate(spec, box, rng)
    b = generate(spec, box, rng)
    assert np.array_equal(a.edges, b.edges)
    assert a.num_nodes == b.num_nodes


def test_generate_lattice_model_needs_box(rng):
    with pytest.raises(ParameterError):
        generate(NnBondParams(0.5), None, rng)


def test_sampler_options_follow_the_model():
    assert sampler_options(HetLrpParams(1.0, 2.0, 1.0), 'shells') == {'method': 'shells'}
    assert sampler_options(SiteBondParams(0.5, 1.0, 3.0), 'binomial') == {'method': 'binomial'}
    assert sampler_options(HomLrpParams(1.0, 2.0), 'shells') == {}
    assert sampler_options(ErParams(10, p=0.1), 'binomial') == {}
    assert sampler_options(HomLrpParams(1.0, 2.0), None) == {}


def test_thresholds_reproduce_nn_bond(rng):
    box = LatticeBox(2, 8)
    th = pair_thresholds(NnBondParams(0.5), box, rng)
    for p in (0.1, 0.4, 0.7):
        assert _edge_set(graph_at(th, p)) == _edge_set(gen_nn_bond(box, p, rng))


def test_thresholds_reproduce_het_over_lambda(rng):
    box = LatticeBox(1, 64)
    th = pair_thresholds(HetLrpParams(1.0, 1.5, 1.2), box, rng)
    for lam in (0.05, 0.2, 0.6):
        assert _edge_set(graph_at(th, lam)) == _edge_set(gen_het_lrp(box, HetLrpParams(lam, 1.5, 1.2), rng))


def test_thresholds_reproduce_hom_over_p(rng):
    box = LatticeBox(2, 8)
    th = pair_thresholds(HomLrpParams(0.3, 3.0, p=0.5), box, rng, free='p')
    for p in (0.2, 0.6):
        expected = gen_hom_lrp(box, HomLrpParams(0.3, 3.0, p=p), rng)
        assert _edge_set(graph_at(th, p)) == _edge_set(expected)


def test_thresholds_reproduce_site_bond(rng):
    box = LatticeBox(2, 8)
    th = pair_thresholds(SiteBondParams(0.7, 1.0, 2.5), box, rng)
    for lam in (0.1, 0.8):
        expected = gen_site_bond(box, SiteBondParams(0.7, lam, 2.5), rng)
        assert _edge_set(graph_at(th, lam)) == _edge_set(expected)


def test_thresholds_are_sorted_and_capped(rng):
    th = pair_thresholds(HetLrpParams(1.0, 1.5, 1.2), LatticeBox(1, 32), rng, cap=0.3)
    assert np.all(np.diff(th.threshold) >= 0)
    assert th.threshold.max() <= 0.3


def test_thresholds_need_a_free_parameter(rng):
    with pytest.raises(ParameterError):
        pair_thresholds(ErParams(10, p=0.1), LatticeBox(1, 4), rng)
