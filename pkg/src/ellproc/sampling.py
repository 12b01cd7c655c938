"""
Sampling through the scale-mixture representation

    Y = mu + L Z / sqrt(xi),   xi ~ p(xi),   Z ~ N(0, I),

with ``L`` a Cholesky factor of the scale matrix.
"""
import numpy as np

from .kernel import build_scale_matrix, cholesky_with_jitter, cross_covariance
from .posterior import conditional_mixing, predict

__all__ = ["sample_prior", "sample_posterior", "sample_latent_and_noise"]


def _mixture_draws(rng, mean, L, xi):
    z = rng.standard_normal((xi.size, L.shape[0]))
    return mean + (z @ L.T) / np.sqrt(xi)[:, None]


def sample_prior(model, X, draws, seed=None):
    """Draws from the prior process at inputs ``X``; shape ``(draws, n)``."""
    rng = np.random.default_rng(seed)
    S = build_scale_matrix(model.kernel, X)
    xi = model.mixing.sample(draws, rng)
    return _mixture_draws(rng, model.mean, S.cholesky_factor, xi)


def sample_posterior(model, X_test, draws, seed=None):
    """Draws from the predictive distribution; shape ``(draws, n2)``.

    ``xi`` comes from the conditional mixing distribution, then a Gaussian
    with the conditional mean and scale matrix over ``xi``.
    """
    rng = np.random.default_rng(seed)
    post = predict(model, X_test, full_cov=True)
    L, _ = cholesky_with_jitter(post.scale)
    xi = conditional_mixing(model).sample(draws, rng)
    return _mixture_draws(rng, post.mean, L, xi)


def sample_latent_and_noise(model, X, draws, seed=None):
    """Prior draws split into a latent part and a noise part sharing ``xi``.

    The latent part has scale matrix K (no noise) and the noise part
    ``eps * I``; their sum is a draw from :func:`sample_prior`.  Returns
    ``(latent, noise, xi)``.
    """
    rng = np.random.default_rng(seed)
    K = cross_covariance(model.kernel, X, X)
    L, _ = cholesky_with_jitter(K)
    xi = model.mixing.sample(draws, rng)
    latent = _mixture_draws(rng, model.mean, L, xi)
    z = rng.standard_normal((draws, K.shape[0]))
    noise = np.sqrt(model.kernel.noise) * z / np.sqrt(xi)[:, None]
    return latent, noise, xi
