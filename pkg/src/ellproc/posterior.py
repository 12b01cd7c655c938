"""
Closed-form prediction with an elliptical process.

Conditioning on ``n1`` training targets with Mahalanobis distance ``u1``
leaves the Gaussian conditional mean and scale matrix unchanged and
replaces the mixing distribution by

    p(xi | y1) proportional to xi^(n1/2) exp(-xi u1 / 2) p(xi).

The predictive covariance is ``E[1/xi | y1]`` times the conditional scale
matrix.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .density import U_FLOOR, log_mixing_moment, mahalanobis
from .errors import DataError, DomainError
from .kernel import cholesky_with_jitter, cross_covariance
from .specfn import _log_psi, log_psi_sum

__all__ = [
    "Posterior",
    "ConditionalMixing",
    "predict",
    "conditional_mixing",
    "predictive_log_density",
    "predictive_log_density_pointwise",
    "predictive_interval",
]

_LOG_2PI = math.log(2.0 * math.pi)
FULL_COV_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class Posterior:
    """Predictive distribution at a set of test inputs.

    ``scale`` is the full conditional scale matrix, or ``None`` when only
    its diagonal (``scale_diag``) was requested.
    """

    mean: np.ndarray
    scale: np.ndarray
    scale_diag: np.ndarray
    cov_scale: float
    u1: float
    n1: int

    @property
    def variance(self):
        return self.cov_scale * self.scale_diag

    @property
    def covariance(self):
        if self.scale is None:
            raise ValueError("posterior was computed without the full scale matrix")
        return self.cov_scale * self.scale

    def to_dict(self, lo=None, hi=None):
        d = {
            "mean": self.mean.tolist(),
            "variance": self.variance.tolist(),
            "cov_scale": self.cov_scale,
        }
        if lo is not None:
            d["lo"] = np.asarray(lo).tolist()
            d["hi"] = np.asarray(hi).tolist()
        return d


class ConditionalMixing:
    """Mixing distribution after observing ``n1`` targets at distance ``u1``.

    Shares its pieces with the prior; the density on each piece is the prior
    level times ``xi**(n1/2) exp(-xi u1/2)``, renormalized.
    """

    def __init__(self, prior, n1, u1):
        if n1 < 0 or u1 < 0:
            raise DomainError("n1 and u1 must be nonnegative")
        self.prior = prior
        self.n1 = int(n1)
        self.u1 = float(u1)
        self.power = 0.5 * self.n1
        self.rate = 0.5 * self.u1
        # log of 1/c, the normalizer; without data the prior is returned as is
        self.is_prior = self.n1 == 0 and self.u1 == 0
        self.log_norm = 0.0 if self.is_prior else log_mixing_moment(prior, self.power, self.u1)

    @property
    def piece_log_masses(self):
        mix = self.prior
        edges = mix.edges
        s = self.power + 1.0
        with np.errstate(divide="ignore"):
            if self.u1 == 0:
                w = np.log(mix.heights) + np.log(edges[1:] ** s - edges[:-1] ** s)
            else:
                w = np.log(mix.heights) + _log_psi(s, edges[:-1], edges[1:], self.u1)
        top = np.max(w)
        return w - (top + np.log(np.sum(np.exp(w - top))))

    @property
    def piece_masses(self):
        return np.exp(self.piece_log_masses)

    def _log_kernel(self, xi):
        with np.errstate(divide="ignore"):
            return self.power * np.log(xi) - self.rate * xi

    def pdf(self, xi):
        if self.is_prior:
            return self.prior.pdf(xi)
        xi = np.asarray(xi, dtype=float)
        prior = np.asarray(self.prior.pdf(xi))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(
                prior > 0,
                np.exp(self._log_kernel(np.where(xi > 0, xi, 1.0)) - self.log_norm) * prior,
                0.0,
            )
        return float(out) if out.ndim == 0 else out

    def mean_inverse(self):
        """``E[1/xi | y1]``."""
        if self.n1 == 0:
            return self.prior.mean_inverse()
        return math.exp(
            log_mixing_moment(self.prior, self.power - 1.0, self.u1) - self.log_norm
        )

    def sample(self, n, rng_seed=None):
        """Exact draws: pick a piece by its posterior mass, then rejection-sample
        within the piece against the piece maximum of ``xi**a exp(-b xi)``."""
        rng = np.random.default_rng(rng_seed)
        mix = self.prior
        masses = self.piece_masses
        lo_edges = mix.edges[:-1]
        hi_edges = mix.edges[1:]
        out = np.empty(n)
        pending = np.arange(n)
        k = rng.choice(mix.n_pieces, size=n, p=masses / masses.sum())
        if self.rate > 0:
            mode = self.power / self.rate
            peak = np.clip(mode, lo_edges, hi_edges)
        else:
            peak = hi_edges
        log_peak = self._log_kernel(np.maximum(peak, 1e-300))
        while pending.size:
            kk = k[pending]
            xi = lo_edges[kk] + mix.width * rng.random(pending.size)
            with np.errstate(divide="ignore"):
                log_acc = self._log_kernel(xi) - log_peak[kk]
            ok = np.log(rng.random(pending.size)) < log_acc
            out[pending[ok]] = xi[ok]
            pending = pending[~ok]
        return out


def _train_state(model):
    model.require_fitted()
    S11 = model.scale_matrix()
    resid = model.y - model.mean
    m = mahalanobis(S11, resid)
    return S11, m


def _test_inputs(model, X_test):
    X_test = np.asarray(X_test, dtype=float)
    if X_test.ndim == 1:
        X_test = X_test[:, None] if model.input_dim == 1 else X_test[None, :]
    if X_test.ndim != 2 or X_test.shape[1] != model.input_dim:
        raise DataError(
            f"test inputs must have {model.input_dim} columns, got shape {X_test.shape}"
        )
    return X_test


def cov_scale_from(mix, n1, u1):
    """``E[1/xi | y1]`` as the ratio of two rescaled incomplete gamma sums."""
    u1 = max(u1, U_FLOOR)
    s = 0.5 * n1
    return math.exp(
        log_psi_sum(mix.heights, s, mix.edges, u1)
        - log_psi_sum(mix.heights, s + 1.0, mix.edges, u1)
    )


def predict(model, X_test, full_cov=None, include_noise=True):
    """Predictive mean, conditional scale matrix and covariance multiplier.

    Parameters
    ----------
    model : EPModel
        Fitted model; ``X_test`` is in the model's (standardized) input space.
    full_cov : bool, optional
        Keep the full n2 x n2 scale matrix.  Defaults to True for up to
        2000 test points.
    include_noise : bool
        Include the diagonal noise term in the test block (predicting noisy
        targets rather than the latent function).
    """
    X_test = _test_inputs(model, X_test)
    if full_cov is None:
        full_cov = X_test.shape[0] <= FULL_COV_LIMIT
    S11, m = _train_state(model)
    K21 = cross_covariance(model.kernel, X_test, model.X)
    mean = model.mean + K21 @ m.alpha
    V = S11.solve_lower(K21.T)
    extra = model.kernel.noise if include_noise else 0.0
    if full_cov:
        scale = cross_covariance(model.kernel, X_test, X_test) - V.T @ V
        scale[np.diag_indices_from(scale)] += extra
        scale = 0.5 * (scale + scale.T)
        diag = np.diag(scale).copy()
    else:
        scale = None
        diag = model.kernel.signal_var + extra - np.sum(V**2, axis=0)
    diag = np.maximum(diag, 0.0)
    n1 = S11.n
    return Posterior(
        mean=mean,
        scale=scale,
        scale_diag=diag,
        cov_scale=cov_scale_from(model.mixing, n1, m.u),
        u1=m.u,
        n1=n1,
    )


def conditional_mixing(model):
    """The mixing distribution given the model's training targets."""
    _, m = _train_state(model)
    return ConditionalMixing(model.mixing, model.n_train, m.u)


def predictive_log_density(model, X_test, y_test):
    """Joint log density of ``y_test`` given the training data."""
    y_test = np.atleast_1d(np.asarray(y_test, dtype=float))
    post = predict(model, X_test, full_cov=True)
    if y_test.size != post.mean.size:
        raise DataError("y_test and X_test lengths differ")
    S22, _ = cholesky_with_jitter(post.scale)
    r = solve_triangular(S22, y_test - post.mean, lower=True)
    u21 = float(r @ r)
    log_det = 2.0 * float(np.sum(np.log(np.diag(S22))))
    return _cond_log_density(model.mixing, post.n1, post.u1, y_test.size, u21, log_det)


def _cond_log_density(mix, n1, u1, n2, u21, log_det):
    n = n1 + n2
    return (
        log_mixing_moment(mix, 0.5 * n, u21 + u1)
        - log_mixing_moment(mix, 0.5 * n1, u1)
        - 0.5 * log_det
        - 0.5 * n2 * _LOG_2PI
    )


def predictive_log_density_pointwise(model, X_test, y_test):
    """Log predictive density of each test target on its own."""
    y_test = np.atleast_1d(np.asarray(y_test, dtype=float))
    post = predict(model, X_test, full_cov=False)
    if y_test.size != post.mean.size:
        raise DataError("y_test and X_test lengths differ")
    out = np.empty(y_test.size)
    for i in range(y_test.size):
        var = post.scale_diag[i]
        u21 = (y_test[i] - post.mean[i]) ** 2 / var
        out[i] = _cond_log_density(model.mixing, post.n1, post.u1, 1, u21, math.log(var))
    return out


def predictive_interval(model, X_test, coverage=0.95, mc_samples=20000, seed=0):
    """Equal-tailed per-point predictive intervals by Monte Carlo.

    Draws ``xi`` from the conditional mixing distribution and then a
    Gaussian with the conditional scale over ``xi``.  Returns ``(lo, hi)``.
    """
    if not 0 <= coverage < 1:
        raise DomainError("coverage must lie in [0, 1)")
    post = predict(model, X_test, full_cov=False)
    cond = conditional_mixing(model)
    rng = np.random.default_rng(seed)
    xi = cond.sample(mc_samples, rng)
    z = rng.standard_normal((mc_samples, post.mean.size))
    draws = post.mean + z * np.sqrt(post.scale_diag / xi[:, None])
    tail = 0.5 * (1.0 - coverage)
    lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    return lo, hi
