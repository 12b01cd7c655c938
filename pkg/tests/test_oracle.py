import math

import numpy as np
import pytest
from scipy import integrate, stats

from ellproc.errors import NumericalError
from ellproc.mixing import MixingDistribution
from ellproc.oracle import (
    GPReference,
    covariance_zscores,
    density_by_quadrature,
    fd_gradient,
    log_density_by_quadrature,
)


def test_fd_quadratic():
    x = np.array([1.5, -2.0, 0.25])
    assert np.allclose(fd_gradient(lambda v: np.sum(v * v), x), 2 * x, rtol=0, atol=1e-8)


def test_fd_sine():
    for x in (-1.2, 0.3, 2.0):
        assert abs(fd_gradient(lambda v: math.sin(v[0]), [x])[0] - math.cos(x)) < 1e-8


def test_fd_second_order():
    f = lambda v: math.exp(2 * v[0])
    x = 0.3
    errs = [abs(fd_gradient(f, [x], h)[0] - 2 * math.exp(2 * x)) for h in (1e-2, 5e-3, 2.5e-3)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.5 < r < 4.5 for r in ratios)


def test_fd_reports_non_finite():
    with pytest.raises(NumericalError):
        fd_gradient(lambda v: math.log(v[0]) if v[0] > 0 else math.nan, [0.0])


def test_quadrature_narrow_piece_is_gaussian():
    mix = MixingDistribution([1.0], 2e-7, 1.0 - 1e-7)
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    y = np.array([0.4, -1.1])
    val, _ = log_density_by_quadrature(mix, S, y)
    assert val == pytest.approx(stats.multivariate_normal(np.zeros(2), S).logpdf(y), abs=1e-10)


def test_quadrature_piece_additivity():
    coarse = MixingDistribution([1.0, 3.0], 0.4, 0.1)
    fine = MixingDistribution([1.0, 1.0, 3.0, 3.0], 0.2, 0.1)
    S = np.array([[1.5]])
    for y in (0.1, 1.0, 4.0):
        a, _ = log_density_by_quadrature(coarse, S, [y])
        b, _ = log_density_by_quadrature(fine, S, [y])
        assert abs(math.expm1(a - b)) < 1e-11


def test_quadrature_value_and_error():
    mix = MixingDistribution([1.0, 2.0], 0.5, 0.2)
    val, err = density_by_quadrature(mix, np.eye(1), [0.7], mu=[0.2])
    # single coordinate: closed form against the mixture of normals with precision xi
    ref = integrate.quad(lambda xi: mix.pdf(xi) * stats.norm(0.2, 1 / math.sqrt(xi)).pdf(0.7),
                         0.2, 1.2, points=[0.7], epsabs=0, epsrel=1e-13)[0]
    assert val == pytest.approx(ref, rel=1e-11)
    assert 0 <= err < 1e-10 * val


def test_quadrature_rejects_loose_request():
    with pytest.raises(ValueError):
        log_density_by_quadrature(MixingDistribution([1.0], 1.0, 0.5), np.eye(1), [1.0], rel_tol=1e-14)


def test_gp_one_point_posterior():
    # one training point at x=0: every formula is scalar
    theta = (math.log(0.7), math.log(1.3), math.log(0.2))
    gp = GPReference(theta).condition(np.array([[0.0]]), np.array([0.9]))
    xs = 0.5
    k = 1.3 * math.exp(-0.5 * xs**2 / 0.49)
    mean, cov = gp.predict(np.array([[xs]]))
    assert mean[0] == pytest.approx(k * 0.9 / 1.5, rel=1e-14)
    assert cov[0, 0] == pytest.approx(1.3 - k * k / 1.5 + 0.2, rel=1e-14)
    nll = gp.nll(np.array([[0.0]]), [0.9])
    assert nll == pytest.approx(-stats.norm(0, math.sqrt(1.5)).logpdf(0.9), rel=1e-14)


def test_gp_predictive_integrates_to_one():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 1))
    gp = GPReference((0.0, 0.0, math.log(0.05))).condition(X, np.sin(X[:, 0]))
    f = lambda y: math.exp(gp.log_predictive_density(np.array([[0.3]]), [y]))
    assert integrate.quad(f, -np.inf, np.inf, epsabs=0, epsrel=1e-12)[0] == pytest.approx(1.0, abs=1e-10)


def test_gp_gradient_and_fit():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 1))
    y = np.sin(2 * X[:, 0]) + 0.1 * rng.normal(size=12)
    gp = GPReference()
    theta = np.array([0.2, -0.3, -2.0])
    _, g = gp.nll_and_grad(theta, X, y)
    fd = fd_gradient(lambda t: gp.nll_and_grad(t, X, y)[0], theta)
    assert np.allclose(g, fd, rtol=1e-6)
    gp.fit(X, y)
    assert np.linalg.norm(gp.nll_and_grad(gp.theta, X, y)[1]) < 1e-5


def test_covariance_zscores_known_gaussian():
    C = np.array([[1.0, 0.5], [0.5, 2.0]])
    draws = np.random.default_rng(2).multivariate_normal([0, 0], C, size=50_000)
    assert np.all(np.abs(covariance_zscores(draws, C, mean=0.0)) < 4)
    assert np.all(np.abs(covariance_zscores(draws, 1.2 * C, mean=0.0)) > 5)
