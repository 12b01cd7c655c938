"""
One-dimensional marginals and quantile-quantile diagnostics.

The zero-mean, unit-scale marginal of an elliptical process has

    F(y) = E[Phi(y sqrt(xi))],

which is evaluated piece by piece with Gauss-Legendre quadrature in xi.
Quantiles come from root finding on ``F``.
"""
import math

import numpy as np
from scipy import optimize, special, stats

from .errors import DomainError

__all__ = [
    "marginal_pdf",
    "marginal_cdf",
    "marginal_ppf",
    "sample_elliptical",
    "scaled_chi2_mixing",
    "truncated_laplace_mixing",
    "qq_pairs",
    "qq_slope",
    "qq_residual",
    "mixing_histogram",
    "QUANTILES",
]

QUANTILES = np.linspace(0.01, 0.99, 99)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def _nodes(mix):
    edges = mix.edges
    half = 0.5 * mix.width
    mid = 0.5 * (edges[:-1] + edges[1:])
    xi = (mid[:, None] + half * _GL_X[None, :]).ravel()
    w = (mix.levels[:, None] * half * _GL_W[None, :]).ravel()
    return xi, w


def marginal_pdf(mix, y):
    """Density of the unit-scale 1-D marginal."""
    y = np.asarray(y, dtype=float)
    xi, w = _nodes(mix)
    v = np.sqrt(xi / (2.0 * math.pi)) * np.exp(-0.5 * np.multiply.outer(y**2, xi))
    return v @ w


def marginal_cdf(mix, y):
    """Distribution function of the unit-scale 1-D marginal."""
    y = np.asarray(y, dtype=float)
    xi, w = _nodes(mix)
    return special.ndtr(np.multiply.outer(y, np.sqrt(xi))) @ w


def marginal_ppf(mix, q):
    """Quantiles of the unit-scale 1-D marginal by bracketed root finding."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any((q <= 0) | (q >= 1)):
        raise DomainError("quantile levels must lie in (0, 1)")
    # the widest component bounds every quantile
    z_max = np.abs(special.ndtri(q)) / math.sqrt(mix.support[0]) + 1.0
    out = np.empty_like(q)
    for i, (qi, b) in enumerate(zip(q, z_max)):
        if qi == 0.5:
            out[i] = 0.0
            continue
        out[i] = optimize.brentq(
            lambda y: marginal_cdf(mix, y) - qi, -b, b, xtol=1e-12, rtol=1e-12
        )
    return out


def sample_elliptical(xi, seed=None):
    """``z / sqrt(xi)`` with standard normal ``z``, one draw per ``xi``."""
    rng = np.random.default_rng(seed)
    xi = np.asarray(xi, dtype=float)
    return rng.standard_normal(xi.shape) / np.sqrt(xi)


def _truncated(dist, n, rng, lo, hi):
    a, b = dist.cdf(lo), dist.cdf(hi)
    return dist.ppf(a + (b - a) * rng.random(n))


def scaled_chi2_mixing(n, eta=1.0, seed=None, support=(0.0, math.inf)):
    """Draws of ``chi2(eta)/eta``, optionally truncated to ``support``."""
    rng = np.random.default_rng(seed)
    dist = stats.chi2(df=eta, scale=1.0 / eta)
    return _truncated(dist, n, rng, *support)


def truncated_laplace_mixing(n, mode=1.0, scale=0.5, seed=None, support=(0.0, math.inf)):
    """Draws of a Laplace variable with the given mode, truncated to ``support``.

    The lower end of ``support`` is raised to 0 if negative, so draws are
    strictly positive.
    """
    rng = np.random.default_rng(seed)
    lo = max(support[0], 0.0)
    return _truncated(stats.laplace(loc=mode, scale=scale), n, rng, lo, support[1])


def qq_pairs(mix, samples, q=QUANTILES):
    """``(q, sample_quantile, model_quantile)`` columns."""
    q = np.asarray(q, dtype=float)
    sq = np.quantile(np.asarray(samples, dtype=float), q)
    return q, sq, marginal_ppf(mix, q)


def qq_slope(sample_q, model_q):
    """Least-squares slope of model quantiles against sample quantiles."""
    slope, _ = np.polyfit(sample_q, model_q, 1)
    return float(slope)


def qq_residual(sample_q, model_q):
    """Sum of squared differences between model and sample quantiles."""
    return float(np.sum((np.asarray(model_q) - np.asarray(sample_q)) ** 2))


def mixing_histogram(mix):
    """``(lo, hi, density)`` rows of the normalized piecewise-constant density."""
    edges = mix.edges
    return np.column_stack([edges[:-1], edges[1:], mix.levels])
