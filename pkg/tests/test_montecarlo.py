import math

import numpy as np
import pytest

from gaussretro.errors import InvalidArgumentError
from gaussretro.gaussian import Kind, QuadratureDirection, make_diagonal
from gaussretro.joint import Scenario, predicted_meter_stats, retrodict_meter_stats
from gaussretro.oracle.montecarlo import (
    CHUNK,
    compare,
    regress,
    sample_chain,
    sample_gaussian,
    simulate_chain,
    simulate_single_mode,
)
from gaussretro.retrodiction import PqsPair, pqs_distribution_single
from gaussretro.verify import stream_seed

Z = 3.0


def within(analytic, empirical, stderr):
    return abs(compare(analytic, empirical, stderr)["z_score"]) <= Z


def test_sample_gaussian_shape_and_moments():
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    x = sample_gaussian([1.0, -1.0], cov, 200_000, seed=1)
    assert x.shape == (200_000, 2)
    np.testing.assert_allclose(x.mean(axis=0), [1.0, -1.0], atol=0.02)
    np.testing.assert_allclose(np.cov(x.T), cov, atol=0.02)


def test_sample_gaussian_chunk_prefix_stable():
    a = sample_gaussian([0.0], [[1.0]], CHUNK + 10, seed=4)
    b = sample_gaussian([0.0], [[1.0]], 2 * CHUNK, seed=4)
    np.testing.assert_array_equal(a, b[:CHUNK + 10])


def test_streams_are_distinct():
    a = sample_gaussian([0.0], [[1.0]], 1000, seed=4, stream=0)
    b = sample_gaussian([0.0], [[1.0]], 1000, seed=4, stream=1)
    assert not np.array_equal(a, b)


def test_regression_recovers_linear_model():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50_000, 2))
    y = 0.5 + x @ np.array([[2.0], [-1.0]]) + 0.3 * rng.normal(size=(50_000, 1))
    fit = regress(y, x)
    np.testing.assert_allclose(fit.slope[:, 0], [2.0, -1.0], atol=0.01)
    assert fit.resid_cov[0, 0] == pytest.approx(0.09, rel=0.03)


def test_too_few_trials():
    with pytest.raises(InvalidArgumentError):
        simulate_chain(Scenario(2, 1.0), 10, seed=0)


def test_chain_deterministic():
    sc = Scenario(2, 1.0)
    a = simulate_chain(sc, 50_000, seed=9)
    b = simulate_chain(sc, 50_000, seed=9)
    np.testing.assert_array_equal(a.pi_cov, b.pi_cov)
    np.testing.assert_array_equal(a.pi_mean, b.pi_mean)
    c = simulate_chain(sc, 50_000, seed=10)
    assert not np.array_equal(a.pi_cov, c.pi_cov)


def test_chain_sample_columns():
    s = sample_chain(Scenario(3, 1.0), 2000, seed=0)
    assert s.first.shape == (2000, 3) and s.final.shape == (2000, 4)
    assert s.trials == 2000


@pytest.mark.slow
def test_chain_zero_squeezing_million():
    sc = Scenario(2, 1.0)
    est = simulate_chain(sc, 1_000_000, seed=stream_seed(0, "monte_carlo_chain"))
    ref = retrodict_meter_stats(sc)
    for i in range(2):
        for j in range(2):
            assert within(ref.pi_cov[i, j], est.pi_cov[i, j], est.stderr_cov[i, j])
    assert est.pi_cov[0, 0] == pytest.approx(0.75, abs=0.002)


def test_chain_squeezed_with_displacements():
    sc = Scenario(3, 10.0, 2.0, -2.0, rho_means=[0.3, -0.2, 0.5, 0.1],
                  effect_means=[1.0, 0.4, -0.7, 0.2], meter_means=[0, 0.1, 0, -0.3, 0, 0.2])
    est = simulate_chain(sc, 400_000, seed=3)
    ref = retrodict_meter_stats(sc)
    for i in range(3):
        assert within(ref.pi_mean[i], est.pi_mean[i], est.stderr_mean[i])
        for j in range(3):
            assert within(ref.pi_cov[i, j], est.pi_cov[i, j], est.stderr_cov[i, j])


def test_chain_uninformative_effect_gives_unconditioned_statistics():
    sc = Scenario(3, 1.0, 1.0, -1.0)
    est = simulate_chain(sc, 300_000, seed=5, effect_cov=1e12 * np.eye(4))
    prior = predicted_meter_stats(sc)
    post = retrodict_meter_stats(sc)
    for i in range(3):
        assert within(prior.pi_cov[i, i], est.pi_cov[i, i], est.stderr_cov[i, i])
        assert not within(post.pi_cov[i, i], est.pi_cov[i, i], est.stderr_cov[i, i])


@pytest.mark.parametrize("phi", [0.0, math.pi / 4, 1.2])
def test_single_mode_chain(phi):
    rho = make_diagonal(2.5, 0.1, mean=(0.2, -0.1))
    eff = make_diagonal(0.1, 2.5, mean=(0.5, 0.3), kind=Kind.EFFECT)
    d = QuadratureDirection(0, phi)
    ref = pqs_distribution_single(PqsPair(rho, eff), d).distribution
    est = simulate_single_mode(rho, eff, d, 200_000, seed=11)
    assert within(ref.variance, est.variance, est.stderr_variance)
    assert within(ref.mean, est.mean, est.stderr_mean)


def test_single_mode_chain_deterministic():
    rho = make_diagonal(1.5, 1 / 6)
    eff = make_diagonal(1 / 6, 1.5, kind=Kind.EFFECT)
    d = QuadratureDirection(0, 0.3)
    a = simulate_single_mode(rho, eff, d, 10_000, seed=2)
    b = simulate_single_mode(rho, eff, d, 10_000, seed=2)
    assert a == b


def test_compare_report():
    rec = compare(1.0, 1.03, 0.01)
    assert set(rec) == {"analytic", "empirical", "stderr", "z_score"}
    assert rec["z_score"] == pytest.approx(3.0)
