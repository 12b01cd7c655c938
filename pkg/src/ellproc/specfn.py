"""
Generalized incomplete gamma function and its rescaled variant.

The generalized incomplete gamma function is

    Gamma(s, a, b) = int_a^b t^(s-1) exp(-t) dt,

and the rescaled version used by the likelihood is

    Psi(s, lo, hi, u) = exp(u/2) (u/2)^(-s) Gamma(s, lo*u/2, hi*u/2).

Everything is evaluated in log space.  The lower function gamma(s, x) is
summed from its power series for x < s + 1 and the upper function
Gamma(s, x) from its continued fraction (modified Lentz) otherwise; a
difference of two such values is formed as ``log(A) + log1p(-B/A)``.  When
the two values nearly coincide the difference is instead integrated
directly with Gauss-Legendre quadrature, which is exact to rounding on such
narrow intervals.

The scalar kernels are compiled with numba and exposed as numpy ufuncs, so
every function here broadcasts over array arguments.
"""
import math

import numba
import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, NumericalError

__all__ = [
    "log_inc_gamma",
    "inc_gamma",
    "inc_gamma_grad_limits",
    "log_psi",
    "psi_scaled",
    "psi_grad_u",
    "log_psi_sum",
    "psi_sum_dlog_du",
]

_EPS = 1e-17
_TINY = 1e-300
_MAXIT = 200_000
_LOG_MAX = math.log(np.finfo(float).max)
# Below this relative gap between the two tail values, switch to quadrature.
_CANCEL = 0.1

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_GL_LOGW = np.log(_GL_WEIGHTS)


@numba.njit(cache=True)
def _log_lower_series(s, x):
    # log gamma(s, x) by the power series; x > 0
    ap = s
    term = 1.0 / s
    total = term
    for _ in range(_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if term < total * _EPS:
            break
    return s * math.log(x) - x + math.log(total)


@numba.njit(cache=True)
def _log_upper_cf(s, x):
    # log Gamma(s, x) by the continued fraction; x > 0
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return s * math.log(x) - x + math.log(h)


@numba.njit(cache=True)
def _log_lower(s, x):
    if x <= 0.0:
        return -np.inf
    if x < s + 1.0:
        return _log_lower_series(s, x)
    lg = math.lgamma(s)
    return lg + math.log1p(-math.exp(_log_upper_cf(s, x) - lg))


@numba.njit(cache=True)
def _log_upper(s, x):
    if x == np.inf:
        return -np.inf
    if x <= 0.0:
        return math.lgamma(s)
    if x >= s + 1.0:
        return _log_upper_cf(s, x)
    lg = math.lgamma(s)
    return lg + math.log1p(-math.exp(_log_lower_series(s, x) - lg))


@numba.njit(cache=True)
def _log_quad(s, a, b):
    # log int_a^b t^(s-1) e^(-t) dt by 64-point Gauss-Legendre in log space
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    n = _GL_NODES.shape[0]
    vals = np.empty(n)
    top = -np.inf
    for i in range(n):
        t = mid + half * _GL_NODES[i]
        v = _GL_LOGW[i] + (s - 1.0) * math.log(t) - t
        vals[i] = v
        if v > top:
            top = v
    acc = 0.0
    for i in range(n):
        acc += math.exp(vals[i] - top)
    return top + math.log(acc) + math.log(half)


@numba.njit(cache=True)
def _log_diff_lower(s, a, b):
    # log(gamma(s, b) - gamma(s, a)), a < b <= s + 1
    lb = _log_lower(s, b)
    if a <= 0.0:
        return lb
    la = _log_lower(s, a)
    gap = -math.expm1(la - lb)
    if gap < _CANCEL:
        return _log_quad(s, a, b)
    return lb + math.log(gap)


@numba.njit(cache=True)
def _log_diff_upper(s, a, b):
    # log(Gamma(s, a) - Gamma(s, b)), s + 1 <= a < b
    la = _log_upper(s, a)
    if b == np.inf:
        return la
    lb = _log_upper(s, b)
    gap = -math.expm1(lb - la)
    if gap < _CANCEL:
        return _log_quad(s, a, b)
    return la + math.log(gap)


@numba.njit(cache=True)
def _log_inc_gamma_scalar(s, a, b):
    if not (s > 0.0 and a >= 0.0 and b > a):
        return np.nan
    m = s + 1.0
    if b <= m:
        return _log_diff_lower(s, a, b)
    if a >= m:
        return _log_diff_upper(s, a, b)
    left = _log_diff_lower(s, a, m)
    right = _log_diff_upper(s, m, b)
    hi = max(left, right)
    return hi + math.log(math.exp(left - hi) + math.exp(right - hi))


@numba.vectorize(["float64(float64, float64, float64)"], cache=True)
def _log_inc_gamma(s, a, b):
    return _log_inc_gamma_scalar(s, a, b)


def _check_gamma_args(s, a, b):
    s, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, a, b)))
    if np.any(~(s > 0)) or np.any(~(a >= 0)) or np.any(~(b > a)):
        raise DomainError("incomplete gamma needs s > 0 and 0 <= a < b")
    if np.any(~np.isfinite(s)) or np.any(~np.isfinite(a)):
        raise DomainError("s and a must be finite")
    return s, a, b


def _as_output(x):
    return float(x) if np.ndim(x) == 0 else x


def log_inc_gamma(s, a, b):
    """Logarithm of ``int_a^b t**(s-1) exp(-t) dt``.

    ``b`` may be ``inf``.  Broadcasts over array arguments.
    """
    s, a, b = _check_gamma_args(s, a, b)
    return _as_output(_log_inc_gamma(s, a, b))


def inc_gamma(s, a, b):
    """Generalized incomplete gamma function ``Gamma(s, a, b)``.

    Parameters
    ----------
    s : float or array_like
        Shape, ``s > 0``.
    a, b : float or array_like
        Integration limits with ``0 <= a < b``; ``b = inf`` gives the upper
        incomplete gamma function.

    Raises
    ------
    DomainError
        On invalid arguments.
    NumericalError
        If the result overflows double precision.  Use
        :func:`log_inc_gamma` for huge values.
    """
    out = log_inc_gamma(s, a, b)
    if np.any(np.asarray(out) > _LOG_MAX):
        raise NumericalError("incomplete gamma overflows double precision")
    return _as_output(np.exp(out))


def inc_gamma_grad_limits(s, a, b):
    """Derivatives of ``Gamma(s, a, b)`` with respect to ``a`` and ``b``.

    Returns ``(-a**(s-1) exp(-a), b**(s-1) exp(-b))``.
    """
    s, a, b = _check_gamma_args(s, a, b)
    if np.any((a == 0) & (s < 1)):
        raise DomainError("d/da is singular at a = 0 when s < 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        d_da = -np.exp((s - 1) * np.log(a) - a)
        d_da = np.where((a == 0) & (s == 1), -1.0, d_da)
        d_db = np.where(np.isinf(b), 0.0, np.exp((s - 1) * np.log(b) - b))
    return _as_output(d_da), _as_output(d_db)


def _check_psi_args(s, l_lo, l_hi, u):
    s, l_lo, l_hi, u = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (s, l_lo, l_hi, u))
    )
    if np.any(~(u > 0)):
        raise DomainError("Psi needs u > 0")
    if np.any(~(s > 0)) or np.any(~(l_lo >= 0)) or np.any(~(l_hi > l_lo)):
        raise DomainError("Psi needs s > 0 and 0 <= l_lo < l_hi")
    return s, l_lo, l_hi, u


def _log_psi(s, l_lo, l_hi, u):
    half = 0.5 * u
    return half - s * np.log(half) + _log_inc_gamma(s, l_lo * half, l_hi * half)


def log_psi(s, l_lo, l_hi, u):
    """Logarithm of the rescaled incomplete gamma function Psi."""
    return _as_output(_log_psi(*_check_psi_args(s, l_lo, l_hi, u)))


def psi_scaled(s, l_lo, l_hi, u):
    """Rescaled incomplete gamma ``exp(u/2) (u/2)**(-s) Gamma(s, l_lo*u/2, l_hi*u/2)``."""
    out = _log_psi(*_check_psi_args(s, l_lo, l_hi, u))
    if np.any(out > _LOG_MAX):
        raise NumericalError("Psi overflows double precision")
    return _as_output(np.exp(out))


def _log_edge_term(s, ell, u):
    # log(ell**s exp((u/2)(1 - ell))); -inf at ell = 0
    with np.errstate(divide="ignore"):
        return s * np.log(ell) + 0.5 * u * (1.0 - ell)


def psi_grad_u(s, l_lo, l_hi, u):
    """Derivative of Psi with respect to ``u``.

    Closed form ``(Psi/2)(1 - 2s/u) + (E(l_hi) - E(l_lo))/u`` with
    ``E(l) = l**s exp((u/2)(1 - l))``.
    """
    s, l_lo, l_hi, u = _check_psi_args(s, l_lo, l_hi, u)
    psi = np.exp(_log_psi(s, l_lo, l_hi, u))
    e_hi = np.exp(_log_edge_term(s, l_hi, u))
    e_lo = np.exp(_log_edge_term(s, l_lo, u))
    return _as_output(0.5 * psi * (1.0 - 2.0 * s / u) + (e_hi - e_lo) / u)


def log_psi_sum(heights, s, edges, u):
    """``log(sum_k h_k Psi_k(s, edges[k], edges[k+1], u))``.

    ``heights`` has length M and ``edges`` length M + 1.  ``u`` may be an
    array; the result then has the shape of ``u``.
    """
    heights = np.asarray(heights, dtype=float)
    edges = np.asarray(edges, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise DomainError("Psi needs u > 0")
    uu = u[..., None]
    with np.errstate(divide="ignore"):
        logs = _log_psi(s, edges[:-1], edges[1:], uu) + np.log(heights)
    out = logsumexp(logs, axis=-1)
    if np.any(~np.isfinite(out)):
        raise NumericalError("every Psi term underflowed; the model is ill-conditioned")
    return _as_output(out)


def psi_sum_dlog_du(heights, s, edges, u, log_sum=None):
    """Derivative of :func:`log_psi_sum` with respect to ``u``.

    Each piece contributes ``h_k (E(hi) - E(lo))`` which is formed as
    ``E(lo) * expm1(log E(hi) - log E(lo))`` so that narrow pieces keep full
    precision.
    """
    heights = np.asarray(heights, dtype=float)
    edges = np.asarray(edges, dtype=float)
    u = np.asarray(u, dtype=float)
    if log_sum is None:
        log_sum = log_psi_sum(heights, s, edges, u)
    uu = u[..., None]
    le_lo = _log_edge_term(s, edges[:-1], uu)
    le_hi = _log_edge_term(s, edges[1:], uu)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = le_hi - le_lo
        # h (E_hi - E_lo) as sign * exp(log_mag)
        log_mag = np.where(
            np.isneginf(le_lo),
            le_hi,
            le_lo + np.log(np.abs(np.expm1(d))),
        )
        log_mag = log_mag + np.log(heights)
    sign = np.where(np.isneginf(le_lo), 1.0, np.sign(d))
    total, tsign = logsumexp(log_mag, axis=-1, b=sign, return_sign=True)
    bracket = tsign * np.exp(total - np.asarray(log_sum))
    return _as_output(0.5 - s / u + bracket / u)
