import math

import pytest

from percolab.params import (Boundary, ContinuumParams, ErParams, HetLrpParams, HomLrpParams,
                             LatticeBox, NnBondParams, NswParams, ParameterError, SiteBondParams,
                             spec_from_mapping, spec_to_mapping)


def test_er_needs_exactly_one_of_p_and_vartheta():
    with pytest.raises(ParameterError):
        ErParams(10)
    with pytest.raises(ParameterError):
        ErParams(10, p=0.1, vartheta=1.0)
    assert ErParams(10, vartheta=2.0).edge_prob == pytest.approx(0.2)


@pytest.mark.parametrize('bad', [0.0, 1.0, 1.5, -0.1])
def test_er_p_open_interval(bad):
    with pytest.raises(ParameterError) as err:
        ErParams(10, p=bad)
    assert err.value.key == 'p'


def test_er_vartheta_below_n():
    with pytest.raises(ParameterError) as err:
        ErParams(10, vartheta=10.0)
    assert err.value.key == 'vartheta'


def test_nsw_validation():
    with pytest.raises(ParameterError):
        NswParams(1, 2.0)
    with pytest.raises(ParameterError):
        NswParams(10, 0.0)
    with pytest.raises(ParameterError):
        NswParams(10, 2.0, k_max=0)


def test_lattice_box_limits():
    with pytest.raises(ParameterError):
        LatticeBox(0, 4)
    with pytest.raises(ParameterError):
        LatticeBox(2, 1)
    assert LatticeBox(2, 3, 'torus').boundary is Boundary.TORUS


@pytest.mark.parametrize('d, side, boundary, expected', [
    (1, 5, Boundary.FREE, 4),
    (2, 4, Boundary.FREE, 24),
    (2, 4, Boundary.TORUS, 32),
    (2, 2, Boundary.TORUS, 4),
    (3, 3, Boundary.TORUS, 81),
])
def test_nn_pair_count(d, side, boundary, expected):
    assert LatticeBox(d, side, boundary).nn_pair_count() == expected


def test_lattice_coords_are_row_major():
    coords = LatticeBox(2, 3).coords()
    assert coords[:4].tolist() == [[0, 0], [0, 1], [0, 2], [1, 0]]


def test_long_range_validation():
    with pytest.raises(ParameterError):
        HomLrpParams(lam=-1.0, alpha=2.0)
    with pytest.raises(ParameterError):
        HomLrpParams(lam=1.0, alpha=2.0, p=1.5)
    with pytest.raises(ParameterError):
        HetLrpParams(lam=1.0, alpha=2.0, beta=0.0)
    with pytest.raises(ParameterError):
        NnBondParams(1.2)
    with pytest.raises(ParameterError):
        SiteBondParams(r_star=0.5, lam_star=0.0, alpha=2.0)


def test_modified_model_nearest_neighbour_law():
    assert HomLrpParams(lam=0.7, alpha=3.0).nn_prob == pytest.approx(1.0 - math.exp(-0.7))
    assert HomLrpParams(lam=0.7, alpha=3.0, p=0.25).nn_prob == 0.25


def test_continuum_infinite_beta_forces_unit_marks():
    params = ContinuumParams(d=2, nu=1.0, L=10.0, lam=1.0, alpha=3.0)
    assert params.homogeneous_marks
    assert params.volume == 100.0


def test_spec_from_mapping_lattice_model():
    spec, box = spec_from_mapping({'model': 'het', 'd': '1', 'side': '64', 'boundary': 'TORUS',
                                   'lambda': '0.5', 'alpha': '1.5', 'beta': '1'})
    assert spec == HetLrpParams(lam=0.5, alpha=1.5, beta=1.0)
    assert box == LatticeBox(1, 64, Boundary.TORUS)


def test_spec_from_mapping_case_sensitive_L():
    spec, box = spec_from_mapping({'model': 'continuum', 'd': 2, 'nu': 1, 'L': 20, 'lambda': 1,
                                   'alpha': 3, 'plant_origin': 'yes'})
    assert box is None
    assert spec.L == 20.0
    assert spec.plant_origin


def test_spec_from_mapping_missing_key():
    with pytest.raises(ParameterError) as err:
        spec_from_mapping({'model': 'hom', 'd': 2, 'side': 8, 'alpha': 3})
    assert err.value.key == 'lambda'
    with pytest.raises(ParameterError) as err:
        spec_from_mapping({'model': 'nn', 'p': 0.5, 'd': 2})
    assert err.value.key == 'side'


def test_spec_from_mapping_bad_values():
    with pytest.raises(ParameterError) as err:
        spec_from_mapping({'model': 'er', 'n': 'ten', 'p': 0.1})
    assert err.value.key == 'n'
    with pytest.raises(ParameterError) as err:
        spec_from_mapping({'model': 'graphene'})
    assert err.value.key == 'model'
    with pytest.raises(ParameterError) as err:
        spec_from_mapping({'model': 'nn', 'p': 0.5, 'd': 2, 'side': 4, 'boundary': 'mobius'})
    assert err.value.key == 'boundary'


def test_spec_mapping_round_trip():
    spec = SiteBondParams(r_star=0.6, lam_star=0.3, alpha=2.5)
    box = LatticeBox(2, 16)
    assert spec_from_mapping(spec_to_mapping(spec, box)) == (spec, box)
