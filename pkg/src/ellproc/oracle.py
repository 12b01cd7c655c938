"""
Independent reference computations used to check the production path.

Nothing here imports the incomplete gamma code, the kernel module or the
likelihood module: the marginal density is integrated numerically over the
mixing variable, and the Gaussian-process baseline is a plain textbook
implementation.  These routines are for verification and benchmarking, not
for general use.
"""
import math

import numpy as np
from scipy import integrate, optimize

from .errors import NumericalError

__all__ = [
    "density_by_quadrature",
    "log_density_by_quadrature",
    "GPReference",
    "fd_gradient",
    "covariance_zscores",
]

_LOG_2PI = math.log(2.0 * math.pi)


def _gauss_terms(scale, y, mu):
    S = np.asarray(scale, dtype=float)
    if hasattr(scale, "matrix"):
        S = np.asarray(scale.matrix, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    r = y if mu is None else y - mu
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        raise NumericalError("scale matrix is not positive definite")
    u = float(r @ np.linalg.solve(S, r))
    return y.size, u, logdet


def log_density_by_quadrature(mix, scale, y, mu=None, rel_tol=1e-12):
    """Log marginal density by adaptive quadrature over the mixing variable.

    Integrates ``(xi/2pi)^(n/2) exp(-u xi/2)`` against each mixing piece
    with ``scipy.integrate.quad`` (Gauss-Kronrod), after dividing out the
    integrand's maximum on the piece.

    Returns
    -------
    log_value : float
    rel_err : float
        Estimated relative error of the value (not of its log).
    """
    if rel_tol < 1e-12:
        raise ValueError("rel_tol must be at least 1e-12")
    n, u, logdet = _gauss_terms(scale, y, mu)
    h = np.asarray(mix.heights, dtype=float)
    width, start = float(mix.width), float(mix.start)
    norm = width * h.sum()
    half_n = 0.5 * n

    def log_g(xi):
        return half_n * math.log(xi) - 0.5 * u * xi if xi > 0 else -math.inf

    logs, errs = [], []
    for k in range(h.size):
        if h[k] == 0:
            continue
        lo, hi = start + k * width, start + (k + 1) * width
        peak = min(max(half_n / u, lo), hi) if u > 0 else hi
        ref = log_g(peak)
        f = lambda xi: math.exp(log_g(xi) - ref)
        pts = [peak] if lo < peak < hi else None
        val, err, *rest = integrate.quad(
            f, lo, hi, epsabs=0.0, epsrel=rel_tol, limit=500, points=pts, full_output=1
        )
        if len(rest) > 1 or not val > 0:
            raise NumericalError(f"quadrature on piece {k} did not converge: {rest[-1]}")
        logs.append(math.log(h[k] / norm) + ref + math.log(val))
        errs.append(err / val)
    logs = np.array(logs)
    top = logs.max()
    w = np.exp(logs - top)
    log_int = top + math.log(w.sum())
    rel_err = float(np.sum(w * np.array(errs)) / w.sum())
    if rel_err > max(rel_tol, 1e-12) * 10:
        raise NumericalError(f"quadrature error {rel_err:.2e} exceeds tolerance {rel_tol:.2e}")
    log_value = log_int - half_n * _LOG_2PI - 0.5 * logdet
    return log_value, rel_err


def density_by_quadrature(mix, scale, y, mu=None, rel_tol=1e-12):
    """Marginal density by quadrature; returns ``(value, abs_err)``."""
    log_value, rel_err = log_density_by_quadrature(mix, scale, y, mu, rel_tol)
    value = math.exp(log_value)
    return value, value * rel_err


class GPReference:
    """Exact Gaussian-process regression with a squared-exponential kernel.

    Hyperparameters are held as ``theta = (log lengthscale, log signal
    variance, log noise)``, the noise being a variance added to the
    diagonal.
    """

    def __init__(self, theta=(0.0, 0.0, math.log(0.1))):
        self.theta = np.array(theta, dtype=float)
        self.X = None
        self.y = None

    @staticmethod
    def _k(theta, X1, X2):
        ell, sf2 = math.exp(theta[0]), math.exp(theta[1])
        d2 = np.sum((X1[:, None, :] - X2[None, :, :]) ** 2, axis=-1)
        return sf2 * np.exp(-0.5 * d2 / ell**2), d2 / ell**2

    @staticmethod
    def _inputs(X):
        X = np.asarray(X, dtype=float)
        return X[:, None] if X.ndim == 1 else X

    def nll_and_grad(self, theta, X, y):
        X = self._inputs(X)
        y = np.asarray(y, dtype=float).ravel()
        n = y.size
        K, r2 = self._k(theta, X, X)
        noise = math.exp(theta[2])
        C = K + noise * np.eye(n)
        L = np.linalg.cholesky(C)
        alpha = np.linalg.solve(L.T, np.linalg.solve(L, y))
        value = 0.5 * y @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * _LOG_2PI
        Cinv = np.linalg.solve(L.T, np.linalg.solve(L, np.eye(n)))
        W = Cinv - np.outer(alpha, alpha)
        dC = (K * r2, K, noise * np.eye(n))
        grad = np.array([0.5 * np.sum(W * d) for d in dC])
        return float(value), grad

    def nll(self, X, y, theta=None):
        return self.nll_and_grad(self.theta if theta is None else theta, X, y)[0]

    def fit(self, X, y, theta0=None):
        """Set hyperparameters by L-BFGS on the exact NLL and store the data."""
        X = self._inputs(X)
        y = np.asarray(y, dtype=float).ravel()
        t0 = self.theta if theta0 is None else np.asarray(theta0, dtype=float)
        res = optimize.minimize(
            self.nll_and_grad,
            t0,
            args=(X, y),
            jac=True,
            method="L-BFGS-B",
            options={"gtol": 1e-10, "ftol": 1e-15, "maxiter": 5000},
        )
        self.theta = res.x
        self.X, self.y = X, y
        self.opt_result = res
        return self

    def condition(self, X, y):
        """Store training data without changing the hyperparameters."""
        self.X, self.y = self._inputs(X), np.asarray(y, dtype=float).ravel()
        return self

    def predict(self, X_test, include_noise=True):
        """Posterior mean and covariance at ``X_test``."""
        Xs = self._inputs(X_test)
        noise = math.exp(self.theta[2])
        K, _ = self._k(self.theta, self.X, self.X)
        L = np.linalg.cholesky(K + noise * np.eye(self.y.size))
        Ks, _ = self._k(self.theta, Xs, self.X)
        Kss, _ = self._k(self.theta, Xs, Xs)
        alpha = np.linalg.solve(L.T, np.linalg.solve(L, self.y))
        V = np.linalg.solve(L, Ks.T)
        cov = Kss - V.T @ V
        if include_noise:
            cov = cov + noise * np.eye(Xs.shape[0])
        return Ks @ alpha, cov

    def log_predictive_density(self, X_test, y_test):
        """Joint Gaussian log density of ``y_test`` under the posterior."""
        mean, cov = self.predict(X_test)
        r = np.asarray(y_test, dtype=float).ravel() - mean
        sign, logdet = np.linalg.slogdet(cov)
        return float(-0.5 * r @ np.linalg.solve(cov, r) - 0.5 * logdet - 0.5 * r.size * _LOG_2PI)

    def log_predictive_density_pointwise(self, X_test, y_test):
        mean, cov = self.predict(X_test)
        var = np.diag(cov)
        r = np.asarray(y_test, dtype=float).ravel() - mean
        return -0.5 * r**2 / var - 0.5 * np.log(var) - 0.5 * _LOG_2PI


def fd_gradient(f, x, step=1e-6):
    """Central-difference gradient with step ``step * max(1, |x_i|)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.empty_like(x)
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"non-finite function value at coordinate {i}")
        g[i] = (fp - fm) / (xp[i] - xm[i])
    return g


def covariance_zscores(draws, expected, mean=None):
    """Standardized differences between a sample covariance and ``expected``.

    The standard error of each entry is estimated from the draws themselves.
    With ``mean`` given the centring is exact; otherwise the sample mean is
    used.
    """
    draws = np.asarray(draws, dtype=float)
    c = draws - (draws.mean(axis=0) if mean is None else mean)
    prods = c[:, :, None] * c[:, None, :]
    est = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    return (est - expected) / se
