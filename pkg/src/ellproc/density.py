"""
Marginal density of an elliptical process with piecewise-constant mixing.

For n observations with squared Mahalanobis distance u the negative
log-likelihood is

    u/2 + (n/2) log(2 pi) + (1/2) log|Sigma| + log(width * sum h)
        - log sum_k h_k Psi_k(n/2 + 1, u),

which only ever touches the rescaled incomplete gamma values, so it stays
finite for large u and n.  Gradients are analytic.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .specfn import _log_psi, log_psi_sum, psi_sum_dlog_du

__all__ = [
    "Mahalanobis",
    "mahalanobis",
    "phi_sum",
    "nll",
    "nll_grads",
    "nll_and_grads",
    "log_mixing_moment",
    "U_FLOOR",
]

U_FLOOR = 1e-300
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Mahalanobis:
    """Squared Mahalanobis distance ``u`` and the solve ``alpha = Sigma^-1 (y - mu)``."""

    u: float
    alpha: np.ndarray


def mahalanobis(scale, y, mu=None):
    y = np.asarray(y, dtype=float).ravel()
    if y.size != scale.n:
        raise DomainError(f"{y.size} targets for a {scale.n}x{scale.n} scale matrix")
    r = y if mu is None else y - np.broadcast_to(np.asarray(mu, dtype=float), y.shape)
    alpha = scale.solve(r)
    return Mahalanobis(max(float(r @ alpha), 0.0), alpha)


def _clamped(u):
    if u <= U_FLOOR:
        warnings.warn(
            "Mahalanobis distance is zero; evaluating at u = 1e-300",
            RuntimeWarning,
            stacklevel=3,
        )
        return U_FLOOR
    return u


def phi_sum(mix, s, u):
    """``log sum_k h_k Psi_k(s, u)`` using the raw (unnormalized) heights.

    The unscaled sum ``Phi(s, u) = sum_k h_k Gamma(s, l_(k-1) u/2, l_k u/2)``
    equals ``exp(-u/2) (u/2)**s`` times the exponential of the result.
    """
    if not u > 0:
        raise DomainError("phi_sum needs u > 0")
    return log_psi_sum(mix.heights, s, mix.edges, u)


def log_mixing_moment(mix, power, U):
    """``log E[xi**power * exp(-U xi / 2)]`` under the mixing distribution.

    ``U = 0`` is handled in closed form; otherwise the rescaled incomplete
    gamma sum is used.
    """
    edges = mix.edges
    if U == 0:
        p1 = power + 1.0
        with np.errstate(divide="ignore"):
            terms = np.log(mix.levels) + np.log(
                (edges[1:] ** p1 - edges[:-1] ** p1) / p1
            )
        top = np.max(terms)
        return float(top + np.log(np.sum(np.exp(terms - top))))
    s = power + 1.0
    return float(
        log_psi_sum(mix.heights, s, edges, U)
        - 0.5 * U
        - math.log(mix.width * mix.heights.sum())
    )


def nll(mix, scale, y, mu=None):
    """Exact negative log marginal likelihood.

    Parameters
    ----------
    mix : MixingDistribution
    scale : ScaleMatrix
    y : array_like, shape (n,)
    mu : array_like or float, optional
        Location; zero by default.
    """
    m = mahalanobis(scale, y, mu)
    return _nll_from_u(mix, scale.n, scale.log_det, _clamped(m.u))


def _nll_from_u(mix, n, log_det, u, log_sum=None):
    s = 0.5 * n + 1.0
    if log_sum is None:
        log_sum = phi_sum(mix, s, u)
    return (
        0.5 * u
        + 0.5 * n * _LOG_2PI
        + 0.5 * log_det
        + math.log(mix.width * mix.heights.sum())
        - log_sum
    )


def nll_and_grads(mix, scale, y, mu=None, kernel_grads=()):
    """NLL together with its gradients.

    Returns
    -------
    value : float
    d_heights : ndarray, shape (M,)
        Gradient with respect to the raw heights.
    d_kernel : ndarray
        Gradient with respect to each matrix in ``kernel_grads`` (the
        derivatives of the scale matrix, e.g. from
        :func:`ellproc.kernel.scale_matrix_grads`).
    """
    n = scale.n
    s = 0.5 * n + 1.0
    m = mahalanobis(scale, y, mu)
    u = _clamped(m.u)
    heights = mix.heights
    edges = mix.edges
    log_sum = phi_sum(mix, s, u)
    value = _nll_from_u(mix, n, scale.log_det, u, log_sum)

    with np.errstate(divide="ignore"):
        log_psis = _log_psi(s, edges[:-1], edges[1:], u)
    d_heights = 1.0 / heights.sum() - np.exp(log_psis - log_sum)

    d_kernel = np.zeros(len(kernel_grads))
    if len(kernel_grads):
        dnll_du = 0.5 - psi_sum_dlog_du(heights, s, edges, u, log_sum)
        Sinv = scale.inverse()
        for i, dS in enumerate(kernel_grads):
            du = -float(m.alpha @ dS @ m.alpha)
            d_kernel[i] = dnll_du * du + 0.5 * float(np.sum(Sinv * dS))
    return value, d_heights, d_kernel


def nll_grads(mix, scale, y, mu=None, kernel_grads=()):
    """Gradients of :func:`nll` with respect to heights and kernel parameters."""
    _, dh, dk = nll_and_grads(mix, scale, y, mu, kernel_grads)
    return dh, dk
