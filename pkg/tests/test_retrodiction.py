import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from gaussretro.errors import InvalidArgumentError
from gaussretro.gaussian import (
    GaussianOperator,
    Kind,
    QuadratureDirection,
    make_coherent,
    make_diagonal,
    make_epr_effect,
    make_two_mode_squeezed,
    rotated_variance,
)
from gaussretro.retrodiction import (
    PqsPair,
    Provenance,
    butterfly_curve,
    combined_gaussian_mean,
    epr_mean,
    epr_variance,
    heterodyne_retrodiction,
    pqs_distribution,
    pqs_distribution_single,
    pqs_two_mode,
    pqs_variance_single,
    uniform_phi_grid,
    violates_hur,
)


def squeezed_pair(big, small):
    return PqsPair(make_diagonal(big, small), make_diagonal(small, big, kind=Kind.EFFECT))


def single_direction(phi):
    return QuadratureDirection(0, phi)


def random_cov(rng, scale=1.0):
    G = rng.normal(size=(2, 2))
    return scale * (G @ G.T) + 0.5 * np.eye(2)


# -- single-mode projective retrodiction -----------------------------------------------


def test_coherent_pair_quarter_everywhere():
    pair = PqsPair(make_coherent([0, 0]), make_coherent([0, 0], Kind.EFFECT))
    for phi in uniform_phi_grid(64):
        assert abs(pqs_variance_single(pair, single_direction(phi)) - 0.25) <= 1e-14


@pytest.mark.parametrize("phi,expected", [
    (0.0, 5 / 52),
    (math.pi / 2, 5 / 52),
    (math.pi / 4, 0.65),
    (3 * math.pi / 4, 0.65),
])
def test_squeezed_pair_extrema(phi, expected):
    assert pqs_variance_single(squeezed_pair(2.5, 0.1), single_direction(phi)) == pytest.approx(
        expected, abs=1e-12)


def test_gray_pair_maximum():
    v = pqs_variance_single(squeezed_pair(1.5, 1 / 6), single_direction(math.pi / 4))
    assert v == pytest.approx(5 / 12, abs=1e-12)


def test_squeezed_pair_beats_uncertainty_relation():
    pair = squeezed_pair(2.5, 0.1)
    vx = pqs_variance_single(pair, single_direction(0.0))
    vp = pqs_variance_single(pair, single_direction(math.pi / 2))
    assert vx * vp == pytest.approx((5 / 52) ** 2, rel=1e-12)
    assert violates_hur(vx, vp)


def test_identical_coherent_pair_mean():
    pair = PqsPair(make_coherent([2, 0]), make_coherent([2, 0], Kind.EFFECT))
    d = pqs_distribution_single(pair, single_direction(0.0))
    assert d.distribution.mean == pytest.approx(2.0)
    assert d.distribution.variance == pytest.approx(0.25)
    assert d.provenance is Provenance.SINGLE_MODE


def test_symmetric_midpoint_mean():
    pair = PqsPair(make_coherent([0, 0]), make_coherent([4, 0], Kind.EFFECT))
    assert pqs_distribution_single(pair, single_direction(0.0)).distribution.mean == pytest.approx(2.0)


def test_precision_weighted_mean_against_density_product():
    pair = PqsPair(make_diagonal(2.5, 0.5), make_diagonal(0.1, 2.5, mean=(1.0, 0.0), kind=Kind.EFFECT))
    d = pqs_distribution_single(pair, single_direction(0.0)).distribution
    assert d.mean == pytest.approx(10 / 10.4, abs=1e-12)
    # numerical product of the two x-marginals, renormalised
    f = lambda x: stats.norm.pdf(x, 0, math.sqrt(2.5)) * stats.norm.pdf(x, 1, math.sqrt(0.1))
    z = integrate.quad(f, -10, 10, points=[0, 1])[0]
    mu = integrate.quad(lambda x: x * f(x), -10, 10, points=[0, 1])[0] / z
    var = integrate.quad(lambda x: (x - mu) ** 2 * f(x), -10, 10, points=[0, 1])[0] / z
    assert d.mean == pytest.approx(mu, rel=1e-9)
    assert d.variance == pytest.approx(var, rel=1e-8)


def test_single_mode_rejects_two_modes():
    rho = make_two_mode_squeezed(1.0)
    with pytest.raises(InvalidArgumentError):
        pqs_variance_single(PqsPair(rho, make_epr_effect(-1.0)), single_direction(0.0))


def test_pair_rejects_inadmissible_state():
    with pytest.raises(InvalidArgumentError):
        PqsPair(GaussianOperator([0, 0], np.diag([0.1, 0.1])), make_coherent([0, 0], Kind.EFFECT))


def test_pair_rejects_kind_swap():
    with pytest.raises(InvalidArgumentError):
        PqsPair(make_coherent([0, 0], Kind.EFFECT), make_coherent([0, 0]))


def test_pair_round_trip():
    pair = squeezed_pair(2.5, 0.1)
    back = PqsPair.from_dict(pair.to_dict())
    np.testing.assert_array_equal(back.effect.cov, pair.effect.cov)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2 * math.pi))
def test_harmonic_mean_bound(seed, phi):
    rng = np.random.default_rng(seed)
    rho = GaussianOperator(rng.normal(size=2), random_cov(rng))
    eff = GaussianOperator(rng.normal(size=2), random_cov(rng, 3.0), Kind.EFFECT)
    d = single_direction(phi)
    v = pqs_variance_single(PqsPair(rho, eff), d)
    assert 0 < v <= min(rotated_variance(rho, d), rotated_variance(eff, d)) * (1 + 1e-12)


def test_uninformative_effect_recovers_prior():
    rho = make_diagonal(2.5, 0.1, mean=(0.3, -0.4))
    d = single_direction(0.7)
    prior = rotated_variance(rho, d)
    vs = [pqs_variance_single(PqsPair(rho, make_diagonal(w, w, kind=Kind.EFFECT)), d)
          for w in (1e2, 1e4, 1e6, 1e8)]
    errs = [abs(v - prior) for v in vs]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-7


def test_general_route_agrees_with_single_mode():
    rng = np.random.default_rng(11)
    for _ in range(10):
        rho = GaussianOperator(rng.normal(size=2), random_cov(rng))
        eff = GaussianOperator(rng.normal(size=2), random_cov(rng), Kind.EFFECT)
        pair = PqsPair(rho, eff)
        d = single_direction(rng.uniform(0, 2 * np.pi))
        a = pqs_distribution(pair, d)
        b = pqs_distribution_single(pair, d).distribution
        assert a.mean == pytest.approx(b.mean, abs=1e-12)
        assert a.variance == pytest.approx(b.variance, abs=1e-12)


def test_butterfly_curve_rows():
    rows = butterfly_curve(squeezed_pair(2.5, 0.1), uniform_phi_grid(8))
    assert len(rows) == 8
    assert rows[0] == (0.0, pytest.approx(5 / 52, abs=1e-12))
    with pytest.raises(InvalidArgumentError):
        butterfly_curve(squeezed_pair(2.5, 0.1), [])


# -- two-mode retrodiction ----------------------------------------------------------------


def test_two_mode_phi_independent():
    rho, eff = make_two_mode_squeezed(2.0), make_epr_effect(-2.0)
    v = [pqs_two_mode(rho, eff, single_direction(p)).distribution.variance
         for p in uniform_phi_grid(64)]
    assert max(v) - min(v) < 1e-12
    assert v[0] == pytest.approx(1 / (4 * math.cosh(2.0)), abs=1e-12)
    assert v[0] == pytest.approx(0.06645, abs=1e-5)
    assert v[0] ** 2 == pytest.approx(0.00442, abs=1e-5)
    assert 0.25 / v[0] ** 2 == pytest.approx(56.6, abs=0.1)


@pytest.mark.parametrize("s,sp", [(0.0, 0.0), (1.0, -1.0), (2.0, -0.5), (0.5, 1.5), (-1.0, 2.0)])
def test_two_mode_matches_closed_form(s, sp):
    rho, eff = make_two_mode_squeezed(s), make_epr_effect(sp)
    for phi in (0.0, 0.9, 2.2):
        v = pqs_two_mode(rho, eff, single_direction(phi)).distribution.variance
        assert v == pytest.approx(epr_variance(s, sp), abs=1e-12)


def test_two_mode_zero_squeezing_is_quarter():
    rho, eff = make_two_mode_squeezed(0.0), make_epr_effect(0.0)
    assert pqs_two_mode(rho, eff, single_direction(1.0)).distribution.variance == pytest.approx(0.25)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * math.pi), st.integers(0, 2 ** 32 - 1))
def test_two_mode_mean_matches_closed_form(s, sp, phi, seed):
    rng = np.random.default_rng(seed)
    rm, em = rng.normal(size=4), rng.normal(size=4)
    res = pqs_two_mode(make_two_mode_squeezed(s, rm), make_epr_effect(sp, em), single_direction(phi))
    assert res.distribution.mean == pytest.approx(float(epr_mean(s, sp, rm, em, phi)), abs=1e-10)
    assert res.provenance is Provenance.TWO_MODE_EPR


def test_two_mode_mean_without_relative_squeezing():
    rm, em = [1.0, 2.0, -3.0, 0.5], [0.4, -1.0, 2.0, 7.0]
    phi = 0.8
    expected = math.cos(phi) * (1.0 + 0.4) / 2 + math.sin(phi) * (2.0 - 1.0) / 2
    res = pqs_two_mode(make_two_mode_squeezed(1.2, rm), make_epr_effect(1.2, em), single_direction(phi))
    assert res.distribution.mean == pytest.approx(expected, abs=1e-12)


def test_combined_mean_agrees_for_standard_forms():
    rm, em = np.array([0.3, -0.2, 1.0, 0.7]), np.array([-0.5, 0.4, 0.1, 2.0])
    pair = PqsPair(make_two_mode_squeezed(1.5, rm), make_epr_effect(-0.7, em))
    combined = combined_gaussian_mean(pair)
    for phi in (0.0, 1.3):
        u = single_direction(phi).unit
        exact = pqs_two_mode(pair.rho, pair.effect, single_direction(phi)).distribution.mean
        assert combined[:2] @ u == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("phi", [0.0, 0.4, 1.7, 3.0])
def test_two_mode_vacuum_reduces_to_single_mode(phi):
    rm, em = [0.5, -1.0, 0.0, 0.0], [1.5, 0.2, 0.0, 0.0]
    two = pqs_two_mode(make_two_mode_squeezed(0.0, rm), make_epr_effect(0.0, em),
                       single_direction(phi)).distribution
    one = pqs_distribution_single(
        PqsPair(make_coherent(rm[:2]), make_coherent(em[:2], Kind.EFFECT)),
        single_direction(phi)).distribution
    assert two.variance == pytest.approx(one.variance, abs=1e-14)
    assert two.mean == pytest.approx(one.mean, abs=1e-14)


# -- heterodyne ----------------------------------------------------------------------------


def test_heterodyne_coherent_pair():
    _, cov = heterodyne_retrodiction(PqsPair(make_coherent([0, 0]), make_coherent([0, 0], Kind.EFFECT)))
    np.testing.assert_allclose(cov, 0.5 * np.eye(2), atol=1e-15)
    assert math.sqrt(cov[0, 0] * cov[1, 1]) == pytest.approx(0.5)


def test_heterodyne_weak_effect_gives_husimi_of_state():
    pair = PqsPair(make_coherent([1.0, -2.0]), make_diagonal(1e9, 1e9, kind=Kind.EFFECT))
    mean, cov = heterodyne_retrodiction(pair)
    np.testing.assert_allclose(cov, np.eye(2), atol=1e-8)
    np.testing.assert_allclose(mean, [1.0, -2.0], atol=1e-8)


def test_heterodyne_squeezed_state():
    pair = PqsPair(make_diagonal(0.1, 2.5), make_coherent([0, 0], Kind.EFFECT))
    mean, cov = heterodyne_retrodiction(pair)
    np.testing.assert_allclose(cov, np.diag([0.375, 0.75]), atol=1e-14)


def test_heterodyne_against_numerical_product():
    rho = GaussianOperator([0.4, -0.3], [[1.2, 0.4], [0.4, 0.5]])
    eff = GaussianOperator([-1.0, 0.8], [[0.7, -0.2], [-0.2, 2.0]], Kind.EFFECT)
    mean, cov = heterodyne_retrodiction(PqsPair(rho, eff))
    qa = stats.multivariate_normal(rho.mean, rho.cov + 0.5 * np.eye(2))
    qb = stats.multivariate_normal(eff.mean, eff.cov + 0.5 * np.eye(2))
    x = np.linspace(-9, 9, 361)
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X, Y], -1)
    w = qa.pdf(pts) * qb.pdf(pts)
    tot = np.trapezoid(np.trapezoid(w, x, axis=1), x)
    mom = lambda f: np.trapezoid(np.trapezoid(f * w, x, axis=1), x) / tot
    mx, my = mom(X), mom(Y)
    num = np.array([[mom((X - mx) ** 2), mom((X - mx) * (Y - my))],
                    [mom((X - mx) * (Y - my)), mom((Y - my) ** 2)]])
    np.testing.assert_allclose(mean, [mx, my], atol=1e-10)
    np.testing.assert_allclose(cov, num, rtol=1e-9)
