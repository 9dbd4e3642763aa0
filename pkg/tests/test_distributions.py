import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from smsn.distributions import (
    Custom,
    Degenerate,
    ScaleMixtureSN,
    SkewT,
    Slash,
    affine_transform,
    alpha_from_delta,
    check_spd,
    delta_from_alpha,
    dist_from_dict,
    make_params,
    marginal_shape,
    sample,
    smsn_density,
    sn_density,
    sn_density_gradient,
    st_density,
    st_density_gradient,
)
from smsn.exceptions import MomentNotExistError, UnsupportedOperationError, ValidationError
from smsn.mode import fd_gradient
from smsn.moments import smsn_mean_cov

from conftest import random_dist, random_params, random_spd


def test_derived_quantities_identity_scale():
    p = make_params([0, 0], np.eye(2), [3, 4])
    assert p.alpha_star == pytest.approx(5.0, abs=1e-15)
    assert p.delta_star == pytest.approx(5 / math.sqrt(26), abs=1e-15)
    np.testing.assert_allclose(p.delta, np.array([3, 4]) / math.sqrt(26), atol=1e-15)


def test_omegabar_has_unit_diagonal(rng):
    p = random_params(rng, 4)
    assert np.all(np.diag(p.Omegabar) == 1.0)
    np.testing.assert_allclose(p.omega[:, None] * p.Omegabar * p.omega, p.Omega, rtol=1e-14)


def test_zero_alpha_gives_zero_delta():
    p = make_params([1.0], [[2.0]], [0.0])
    assert p.alpha_star == 0 and p.delta_star == 0
    assert np.all(p.delta == 0)


def test_params_are_read_only(rng):
    p = random_params(rng, 2)
    with pytest.raises(ValueError):
        p.xi[0] = 3.0


@pytest.mark.parametrize(
    "Omega",
    [[[1, 2], [2, 1]], [[1, 0.5], [0.4, 1]], [[1, 0], [0, 0]], [[1, np.nan], [np.nan, 1]]],
)
def test_check_spd_rejects(Omega):
    with pytest.raises(ValidationError):
        check_spd(np.array(Omega, dtype=float))


def test_make_params_dimension_mismatch():
    with pytest.raises(ValidationError):
        make_params([0, 0], np.eye(3), [1, 1])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31))
def test_delta_alpha_roundtrip(d, seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, d, alpha_scale=2.0)
    back = alpha_from_delta(p.delta, p.Omegabar)
    np.testing.assert_allclose(back, p.alpha, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(delta_from_alpha(p.alpha, p.Omegabar), p.delta, atol=1e-15)


def test_alpha_from_delta_outside_region():
    with pytest.raises(ValidationError):
        alpha_from_delta([0.8, 0.8], np.eye(2))


def test_marginal_shape_identity_scale():
    p = make_params([0, 0], np.eye(2), [3, 4])
    assert marginal_shape(p, [0])[0] == pytest.approx(3 / math.sqrt(17), rel=1e-14)
    with pytest.raises(ValidationError):
        marginal_shape(p, [0, 1])


def test_marginal_shape_matches_marginal_density(rng):
    p = random_params(rng, 3)
    a1 = marginal_shape(p, [0])[0]
    x = 0.7
    exact = integrate.dblquad(
        lambda z2, z1: sn_density(p, np.array([x, z1, z2])), -12, 12, -12, 12, epsabs=1e-11
    )[0]
    m = make_params([p.xi[0]], [[p.Omega[0, 0]]], [a1])
    assert sn_density(m, [x]) == pytest.approx(exact, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_affine_transform_density_change_of_variables(d, seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, d)
    A = random_spd(rng, d) + rng.normal(scale=0.3, size=(d, d))
    b = rng.normal(size=d)
    q = affine_transform(p, A, b)
    z = p.xi + rng.normal(size=d)
    lhs = sn_density(q, A.T @ z + b) * abs(np.linalg.det(A))
    assert lhs == pytest.approx(sn_density(p, z), rel=1e-9)
    assert q.alpha_star == pytest.approx(p.alpha_star, rel=1e-9, abs=1e-12)


def test_affine_transform_rejects_singular(rng):
    p = random_params(rng, 2)
    with pytest.raises(ValidationError):
        affine_transform(p, [[1, 2], [2, 4]], [0, 0])


@pytest.mark.parametrize("nu", [3.0, 5.5, 12.0])
@pytest.mark.parametrize("m", [1, 2])
def test_skew_t_mixing_moment_by_quadrature(nu, m):
    mix = SkewT(nu)
    num = integrate.quad(lambda s: s**m * mix.pdf(s), 0, np.inf, epsrel=1e-12)[0]
    assert mix.moment(m) == pytest.approx(num, rel=1e-9)


def test_skew_t_pdf_integrates_to_one():
    assert integrate.quad(SkewT(4.0).pdf, 0, np.inf)[0] == pytest.approx(1.0, abs=1e-10)


def test_slash_moments():
    mix = Slash(6.0)
    assert mix.moment(2) == pytest.approx(1.5)
    assert integrate.quad(lambda s: s**2 * mix.pdf(s), 1, np.inf)[0] == pytest.approx(1.5, rel=1e-10)


@pytest.mark.parametrize("mix, m, text", [(SkewT(4.0), 4, "nu > 4"), (Slash(3.0), 3, "q > 3")])
def test_missing_moment_raises_with_condition(mix, m, text):
    with pytest.raises(MomentNotExistError) as info:
        mix.moment(m)
    assert text in info.value.condition
    assert not mix.has_moment(m)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
def test_invalid_mixing_parameters(bad):
    with pytest.raises(ValidationError):
        SkewT(bad)
    with pytest.raises(ValidationError):
        Slash(bad)


def test_degenerate_has_no_density():
    with pytest.raises(UnsupportedOperationError):
        Degenerate().logpdf(1.0)


def test_custom_mixing_without_density():
    mix = Custom(lambda m: 1.0)
    dist = ScaleMixtureSN(make_params([0.0], [[1.0]], [1.0]), mix)
    with pytest.raises(UnsupportedOperationError):
        smsn_density(dist, [0.0])


def test_sn_density_univariate_matches_scipy():
    p = make_params([0.5], [[4.0]], [-2.0])
    x = np.linspace(-6, 6, 25)[:, None]
    ref = stats.skewnorm.pdf(x[:, 0], -2.0, loc=0.5, scale=2.0)
    np.testing.assert_allclose(sn_density(p, x), ref, rtol=1e-12)


def test_st_density_alpha_zero_matches_multivariate_t(rng):
    p = make_params(rng.normal(size=3), random_spd(rng, 3), np.zeros(3))
    y = rng.normal(size=(10, 3))
    ref = stats.multivariate_t.pdf(y, loc=p.xi, shape=p.Omega, df=5.0)
    np.testing.assert_allclose(st_density(p, 5.0, y), ref, rtol=1e-11)


@pytest.mark.parametrize("dens", ["sn", "st"])
def test_densities_integrate_to_one_d2(dens):
    p = make_params([0.3, -0.2], [[2.0, 0.6], [0.6, 1.0]], [2.0, -1.0])

    def f(y2, y1):
        pt = np.array([y1, y2])
        return sn_density(p, pt) if dens == "sn" else st_density(p, 6.0, pt)

    lim = 12 if dens == "sn" else 200
    total = integrate.dblquad(f, -lim, lim, -lim, lim, epsabs=1e-10, epsrel=1e-10)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_smsn_density_skew_t_matches_closed_form(rng):
    for d in (1, 2, 3):
        dist = random_dist(rng, d, SkewT(5.0))
        y = sample(dist, 30, rng)
        np.testing.assert_allclose(smsn_density(dist, y), st_density(dist.params, 5.0, y), rtol=1e-7)


def test_smsn_density_degenerate_is_sn(rng):
    dist = random_dist(rng, 3, Degenerate())
    y = rng.normal(size=(5, 3))
    np.testing.assert_array_equal(smsn_density(dist, y), sn_density(dist.params, y))


def test_slash_density_integrates_to_one_d1():
    dist = ScaleMixtureSN(make_params([0.0], [[1.0]], [3.0]), Slash(3.0))
    total = integrate.quad(lambda y: smsn_density(dist, [y]), -np.inf, np.inf, epsabs=1e-11)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_density_gradients_match_finite_differences(rng):
    p = random_params(rng, 3)
    for _ in range(5):
        y = p.xi + rng.normal(size=3)
        np.testing.assert_allclose(
            sn_density_gradient(p, y), fd_gradient(lambda x: sn_density(p, x), y), rtol=1e-6, atol=1e-10
        )
        np.testing.assert_allclose(
            st_density_gradient(p, 4.0, y),
            fd_gradient(lambda x: st_density(p, 4.0, x), y),
            rtol=1e-6,
            atol=1e-10,
        )


@pytest.mark.parametrize("mixing", [Degenerate(), SkewT(8.0), Slash(6.0)])
def test_sample_mean_and_covariance(mixing):
    rng = np.random.default_rng(3)
    dist = random_dist(rng, 3, mixing)
    n = 400_000
    X = sample(dist, n, rng)
    mean, cov = smsn_mean_cov(dist)
    se_mean = np.sqrt(np.diag(cov) / n)
    assert np.all(np.abs(X.mean(axis=0) - mean) < 4 * se_mean)
    Xc = X - mean
    prods = Xc[:, :, None] * Xc[:, None, :]
    se_cov = prods.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(prods.mean(axis=0) - cov) < 4 * se_cov)


def test_sample_is_reproducible(rng):
    dist = random_dist(rng, 2, SkewT(4.0))
    a = sample(dist, 50, np.random.default_rng(7))
    b = sample(dist, 50, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_dict_roundtrip(rng):
    for mixing in (Degenerate(), SkewT(3.5), Slash(2.0)):
        dist = random_dist(rng, 2, mixing)
        back = dist_from_dict(dist.to_dict())
        np.testing.assert_array_equal(back.params.Omega, dist.params.Omega)
        assert back.mixing == dist.mixing


@pytest.mark.parametrize(
    "spec",
    [
        {"xi": [0], "Omega": [[1]]},
        {"xi": [0], "Omega": [[1]], "alpha": [0], "mixing": {"type": "cauchy"}},
        {"xi": [0], "Omega": [[1]], "alpha": [0], "mixing": {"type": "skew_t"}},
        {"xi": [0, 1], "Omega": [[1]], "alpha": [0]},
        {"xi": ["a"], "Omega": [[1]], "alpha": [0]},
    ],
)
def test_dist_from_dict_rejects(spec):
    with pytest.raises(ValidationError):
        dist_from_dict(spec)
