import numpy as np
import pytest

from percolab.rng import RngStream, derive_stream, fresh_seed


def test_same_stream_same_draws():
    a = RngStream(11, 3).generator('edges').random(5)
    b = RngStream(11, 3).generator('edges').random(5)
    assert np.array_equal(a, b)


def test_purposes_are_independent_streams():
    rng = RngStream(11, 3)
    assert not np.array_equal(rng.generator('edges').random(5), rng.generator('weights').random(5))


def test_stream_index_changes_draws():
    assert not np.array_equal(RngStream(11, 0).generator().random(5), RngStream(11, 1).generator().random(5))


def test_unknown_purpose():
    with pytest.raises(KeyError):
        RngStream(1).generator('nope')


def test_seed_must_fit_64_bits():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(1 << 64)


def test_derive_stream_is_stable_and_spread():
    assert derive_stream(5, 1, 2) == derive_stream(5, 1, 2)
    ids = {derive_stream(5, i, j) for i in range(20) for j in range(20)}
    assert len(ids) == 400
    assert all(0 <= s < 1 << 64 for s in ids)


def test_child_streams_differ_by_index():
    rng = RngStream(9, 4)
    assert rng.child(0) != rng.child(1)
    assert rng.child(2) == RngStream(9, derive_stream(9, 4, 2))


def test_fresh_seed_is_valid():
    RngStream(fresh_seed())
