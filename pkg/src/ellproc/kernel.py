"""
Squared-exponential kernel with a diagonal noise term.

The scale matrix of n inputs is

    Sigma_ij = s2 * exp(-|x_i - x_j|^2 / (2 ell^2)) + eps * delta_ij,

parameterized by ``log ell``, ``log s2`` and ``log eps``.  Setting
``log_lengthscale`` to a length-d array gives one lengthscale per input
dimension (ARD).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import cdist

from .errors import DomainError, KernelError

__all__ = [
    "KernelParams",
    "ScaleMatrix",
    "build_scale_matrix",
    "cross_covariance",
    "scale_matrix_grads",
    "cholesky_with_jitter",
]

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True, eq=False)
class KernelParams:
    """Log-space kernel hyperparameters.

    Parameters
    ----------
    log_lengthscale : float or array_like
        Scalar for an isotropic kernel, or one entry per input dimension.
    log_signal_var : float
    log_noise : float
    """

    log_lengthscale: object = 0.0
    log_signal_var: float = 0.0
    log_noise: float = np.log(0.1)

    def __post_init__(self):
        ll = np.array(self.log_lengthscale, dtype=float)
        if ll.ndim > 1:
            raise DomainError("log_lengthscale must be a scalar or a vector")
        vals = np.concatenate([ll.ravel(), [self.log_signal_var, self.log_noise]])
        if not np.all(np.isfinite(np.exp(vals))) or np.any(np.exp(vals) <= 0):
            raise DomainError("kernel parameters must exponentiate to finite positives")
        if ll.ndim == 1:
            ll.setflags(write=False)
            object.__setattr__(self, "log_lengthscale", ll)
        else:
            object.__setattr__(self, "log_lengthscale", float(ll))
        object.__setattr__(self, "log_signal_var", float(self.log_signal_var))
        object.__setattr__(self, "log_noise", float(self.log_noise))

    @property
    def ard(self):
        return np.ndim(self.log_lengthscale) == 1

    @property
    def lengthscale(self):
        return np.exp(self.log_lengthscale)

    @property
    def signal_var(self):
        return float(np.exp(self.log_signal_var))

    @property
    def noise(self):
        return float(np.exp(self.log_noise))

    @property
    def n_params(self):
        return np.size(self.log_lengthscale) + 2

    def to_vector(self):
        return np.concatenate(
            [np.ravel(self.log_lengthscale), [self.log_signal_var, self.log_noise]]
        )

    @classmethod
    def from_vector(cls, v, ard=False):
        v = np.asarray(v, dtype=float)
        ll = v[:-2] if ard else float(v[0])
        return cls(ll, v[-2], v[-1])

    def param_names(self):
        if self.ard:
            ls = [f"log_lengthscale[{i}]" for i in range(np.size(self.log_lengthscale))]
        else:
            ls = ["log_lengthscale"]
        return ls + ["log_signal_var", "log_noise"]

    def to_dict(self):
        ll = self.log_lengthscale
        return {
            "log_lengthscale": ll.tolist() if self.ard else ll,
            "log_signal_var": self.log_signal_var,
            "log_noise": self.log_noise,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["log_lengthscale"], d["log_signal_var"], d["log_noise"])


@dataclass(frozen=True, eq=False)
class ScaleMatrix:
    """A symmetric positive-definite matrix with its Cholesky factor."""

    matrix: np.ndarray
    cholesky_factor: np.ndarray
    log_det: float
    jitter: float = 0.0
    _inv: list = field(default_factory=list, repr=False)

    @classmethod
    def from_matrix(cls, matrix):
        L, jitter = cholesky_with_jitter(matrix)
        log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
        return cls(matrix, L, log_det, jitter)

    @property
    def n(self):
        return self.matrix.shape[0]

    def solve(self, b):
        return cho_solve((self.cholesky_factor, True), b, check_finite=False)

    def solve_lower(self, b):
        """``L^-1 b`` for the Cholesky factor ``L``."""
        return solve_triangular(self.cholesky_factor, b, lower=True, check_finite=False)

    def inverse(self):
        if not self._inv:
            self._inv.append(self.solve(np.eye(self.n)))
        return self._inv[0]


def cholesky_with_jitter(matrix):
    """Cholesky factor, adding diagonal jitter on failure.

    Jitter starts at ``1e-10 * mean(diag)`` and grows tenfold up to
    ``1e-4 * mean(diag)``.  Returns ``(L, jitter)``.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise KernelError("scale matrix has non-finite entries")
    try:
        return np.linalg.cholesky(matrix), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(matrix)))
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-9):
        jitter = rel * scale
        try:
            return np.linalg.cholesky(matrix + jitter * np.eye(matrix.shape[0])), jitter
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise KernelError(
        f"Cholesky failed even with jitter {JITTER_MAX:g} * mean(diag)"
    )


def _as_inputs(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise DomainError("inputs must be an (n, d) array with n >= 1")
    if not np.all(np.isfinite(X)):
        raise DomainError("inputs must be finite")
    return X


def _scaled_sqdist(params, X1, X2):
    ls = params.lengthscale
    if params.ard and np.size(ls) != X1.shape[1]:
        raise DomainError(
            f"{np.size(ls)} lengthscales for {X1.shape[1]}-dimensional inputs"
        )
    return cdist(X1 / ls, X2 / ls, "sqeuclidean")


def cross_covariance(params, X1, X2):
    """Noise-free kernel matrix between two input sets."""
    X1 = _as_inputs(X1)
    X2 = _as_inputs(X2)
    if X1.shape[1] != X2.shape[1]:
        raise DomainError("input dimensions differ")
    return params.signal_var * np.exp(-0.5 * _scaled_sqdist(params, X1, X2))


def build_scale_matrix(params, X):
    """Kernel matrix plus ``eps * I``, factorized."""
    X = _as_inputs(X)
    K = cross_covariance(params, X, X)
    K[np.diag_indices_from(K)] += params.noise
    return ScaleMatrix.from_matrix(K)


def scale_matrix_grads(params, X):
    """Derivatives of the scale matrix with respect to each log-parameter.

    Returns a list ordered like :meth:`KernelParams.to_vector`.
    """
    X = _as_inputs(X)
    n = X.shape[0]
    K = cross_covariance(params, X, X)
    grads = []
    if params.ard:
        ls = params.lengthscale
        for j in range(X.shape[1]):
            diff = (X[:, j][:, None] - X[:, j][None, :]) / ls[j]
            grads.append(K * diff**2)
    else:
        grads.append(K * _scaled_sqdist(params, X, X))
    grads.append(K.copy())
    grads.append(params.noise * np.eye(n))
    return grads
