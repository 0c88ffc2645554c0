import math

import numpy as np
import pytest
from scipy import stats

from invariant_pvalue.core import MonteCarloConfig, ValidationError
from invariant_pvalue.sampler import draw_directions, map_directions, standardize


def test_standardize_hand_example():
    d = standardize([1.0, 2.0, 3.0])
    s = 1 / math.sqrt(2)
    assert d == pytest.approx([-s, 0.0, s], abs=1e-15)


def test_standardize_rejects_constant_sample():
    with pytest.raises(ValidationError, match="degenerate"):
        standardize([5.0, 5.0, 5.0])


def test_standardize_rejects_short_sample():
    with pytest.raises(ValidationError):
        standardize([1.0, 2.0])


def test_standardize_affine_bit_identity(rng):
    x = rng.normal(size=17)
    assert np.array_equal(standardize(x), standardize(3 + 2 * x))


def test_standardize_unit_residual_invariants(rng):
    d = standardize(rng.exponential(size=40))
    assert abs(d.sum()) < 1e-12
    assert abs(np.linalg.norm(d) - 1) < 1e-12


def test_coordinate_means_near_zero():
    d = draw_directions(3, MonteCarloConfig(n_sim=10_000, seed=1))
    assert np.all(np.abs(d.mean(axis=0)) < 4 / math.sqrt(10_000))


def test_every_draw_is_a_unit_residual():
    d = draw_directions(5, MonteCarloConfig(n_sim=10_000, seed=2))
    assert np.max(np.abs(d.sum(axis=1))) < 1e-12
    assert np.max(np.abs(np.sum(d * d, axis=1) - 1)) < 1e-12


def test_draws_independent_of_worker_count():
    a = draw_directions(10, MonteCarloConfig(n_sim=25_000, seed=3, workers=1))
    b = draw_directions(10, MonteCarloConfig(n_sim=25_000, seed=3, workers=8))
    assert np.array_equal(a, b)


def test_chunk_size_is_part_of_the_stream_definition():
    a = draw_directions(4, MonteCarloConfig(n_sim=3000, seed=3, chunk_size=1000))
    b = draw_directions(4, MonteCarloConfig(n_sim=3000, seed=3, chunk_size=1500))
    assert not np.array_equal(a, b)


def test_sign_symmetry_of_first_coordinate():
    d1 = draw_directions(4, MonteCarloConfig(n_sim=100_000, seed=4))[:, 0]
    assert stats.ks_2samp(d1, -d1).statistic < 0.02
    assert abs(d1.mean()) < 4 * d1.std() / math.sqrt(d1.size)


def test_map_directions_uses_the_same_streams():
    cfg = MonteCarloConfig(n_sim=5000, seed=9, chunk_size=1200)
    parts = map_directions(6, cfg, lambda d: d[:, 0])
    assert np.array_equal(np.concatenate(parts), draw_directions(6, cfg)[:, 0])


def test_draws_are_immutable():
    d = draw_directions(3, MonteCarloConfig(n_sim=1000))
    with pytest.raises(ValueError):
        d[0, 0] = 1.0
