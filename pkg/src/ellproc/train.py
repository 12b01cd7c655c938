"""
Maximum marginal likelihood training.

Heights (as log-heights), kernel lengthscale, signal variance and noise are
optimized jointly with Adam.  The objective is the exact negative log
marginal likelihood plus a smoothness penalty

    lambda * sum_i (p_i - p_(i-1))^2

on the normalized piece levels ``p``.
"""
import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from types import SimpleNamespace

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import logsumexp

from . import mixing as mixing_mod
from .density import nll_and_grads
from .errors import DomainError, NumericalError, TrainingError
from .kernel import KernelParams, build_scale_matrix, scale_matrix_grads
from .model import MODES, EPModel
from .specfn import _log_psi

__all__ = [
    "TrainConfig",
    "AdamState",
    "adam_step",
    "fit",
    "objective_and_grad",
    "smoothness_penalty",
    "initial_kernel",
    "fit_mixing_to_samples",
    "select_lambda",
    "LAMBDA_GRID",
]

log = logging.getLogger(__name__)

_CONV_WINDOW = 25
LAMBDA_GRID = (0.0, 0.01, 0.1, 1.0, 10.0)


@dataclass
class TrainConfig:
    """Optimizer and model settings for :func:`fit`."""

    learning_rate: float = 0.01
    max_iters: int = 2000
    smoothness_lambda: float = 0.1
    restarts: int = 3
    seed: int = 0
    tol: float = 1e-8
    grad_tol: float = 1e-6
    freeze_heights: bool = False
    n_pieces: int = mixing_mod.DEFAULT_M
    width: float = mixing_mod.DEFAULT_WIDTH
    start: float = mixing_mod.DEFAULT_START
    cap_start: float = 1e-4
    ard: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if self.smoothness_lambda < 0:
            raise DomainError("smoothness_lambda must be nonnegative")
        if self.restarts < 1:
            raise DomainError("restarts must be at least 1")

    @classmethod
    def from_mapping(cls, d):
        """Build from a mapping of option names to typed or string values."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in d.items():
            key = key.replace("-", "_")
            if key not in known:
                raise DomainError(f"unknown training option {key!r}")
            default = known[key].default
            if isinstance(value, str):
                if isinstance(default, bool):
                    value = value.strip().lower() in ("1", "true", "yes", "on")
                elif isinstance(default, int):
                    value = int(value)
                else:
                    value = float(value)
            kwargs[key] = value
        return cls(**kwargs)

    def to_dict(self):
        return asdict(self)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update.  Returns ``(new_params, new_state)``; inputs are not modified."""
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m, v, t)


def smoothness_penalty(heights, width):
    """Penalty value and its gradient with respect to the raw heights."""
    H = heights.sum()
    p = heights / (width * H)
    d = np.diff(p)
    value = float(np.sum(d * d))
    g = np.zeros_like(p)
    g[1:] += 2.0 * d
    g[:-1] -= 2.0 * d
    grad_h = g / (width * H) - float(g @ p) / H
    return value, grad_h


def initial_kernel(X, y, ard=False):
    """Median-distance lengthscale, unit signal variance, noise 0.1 * var(y)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    dists = pdist(X) if X.shape[0] > 1 else np.array([1.0])
    med = float(np.median(dists[dists > 0])) if np.any(dists > 0) else 1.0
    var = float(np.var(y)) if np.size(y) > 1 else 1.0
    ll = math.log(med)
    if ard:
        ll = np.full(X.shape[1], ll)
    return KernelParams(ll, 0.0, math.log(0.1 * max(var, 1e-12)))


def objective_and_grad(theta, X, y, mix_template, lam, free_heights, ard, mean=0.0):
    """Penalized NLL and its gradient in the flat log-parameter vector.

    ``theta`` holds ``log h`` (when heights are free) followed by the kernel
    log-parameters.
    """
    M = mix_template.n_pieces
    if free_heights:
        log_h = theta[:M]
        kvec = theta[M:]
        heights = np.exp(log_h - np.max(log_h))
        mix = mix_template.with_heights(heights)
    else:
        kvec = theta
        mix = mix_template
    kp = KernelParams.from_vector(kvec, ard=ard)
    S = build_scale_matrix(kp, X)
    dS = scale_matrix_grads(kp, X)
    value, d_h, d_k = nll_and_grads(mix, S, y, mean, dS)
    grad_parts = []
    if free_heights:
        pen, pen_grad = smoothness_penalty(mix.heights, mix.width)
        value += lam * pen
        grad_parts.append((d_h + lam * pen_grad) * mix.heights)
    grad_parts.append(d_k)
    return value, np.concatenate(grad_parts), mix, kp


def _run_adam(theta0, fun, config):
    theta = theta0.copy()
    state = AdamState.zeros(theta.size)
    lr = config.learning_rate
    f, g = fun(theta)
    best_f, best_theta, best_g = f, theta.copy(), g
    history = [f]
    reason = "max_iters"
    it = 0
    for it in range(1, config.max_iters + 1):
        if float(np.linalg.norm(g)) < config.grad_tol:
            reason = "grad_tol"
            break
        new_theta, new_state = adam_step(theta, g, state, lr)
        try:
            new_f, new_g = fun(new_theta)
            ok = np.isfinite(new_f) and np.all(np.isfinite(new_g))
        except NumericalError:
            ok = False
        if not ok:
            # step into a numerically bad region: go back to the best point
            lr *= 0.5
            theta, f, g = best_theta.copy(), best_f, best_g
            state = AdamState.zeros(theta.size)
            if lr < 1e-8:
                reason = "step_failure"
                break
            continue
        theta, state, f, g = new_theta, new_state, new_f, new_g
        history.append(f)
        if f < best_f:
            best_f, best_theta, best_g = f, theta.copy(), g
        if len(history) > _CONV_WINDOW:
            old = history[-1 - _CONV_WINDOW]
            if abs(old - f) <= config.tol * max(1.0, abs(f)):
                reason = "tol"
                break
    return best_theta, best_f, best_g, it, reason


def _mode_mixing(mode, config):
    if mode == "gp":
        return mixing_mod.gaussian_limit(), False
    if mode == "cap":
        return (
            mixing_mod.preset_cauchy_approx(config.n_pieces, config.width, config.cap_start),
            False,
        )
    mix = mixing_mod.uniform(config.n_pieces, config.width, config.start)
    return mix, not config.freeze_heights


def fit(data, config=None, mode="ep"):
    """Fit an elliptical process to a dataset.

    Parameters
    ----------
    data : Dataset
        Standardized training data (``X``, ``y`` attributes).
    config : TrainConfig, optional
    mode : {"ep", "gp", "cap"}
        ``ep`` learns the mixing heights, ``gp`` fixes the mixing to the
        Gaussian limit and ``cap`` to the approximated Cauchy preset.

    Returns
    -------
    EPModel
    """
    config = config or TrainConfig()
    mode = mode.lower()
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    X = np.asarray(data.X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(data.y, dtype=float).ravel()
    if X.shape[0] < 2 or X.shape[0] != y.size:
        raise DomainError("need at least two training points with matching X and y")

    mix0, free = _mode_mixing(mode, config)
    k0 = initial_kernel(X, y, config.ard)
    lam = config.smoothness_lambda
    M = mix0.n_pieces

    def fun(theta):
        f, g, _, _ = objective_and_grad(theta, X, y, mix0, lam, free, config.ard)
        return f, g

    rng = np.random.default_rng(config.seed)
    base = np.concatenate([np.zeros(M) if free else np.zeros(0), k0.to_vector()])
    results = []
    for r in range(config.restarts):
        theta0 = base.copy()
        if r > 0:
            theta0[-k0.n_params:] += rng.normal(0.0, 0.5, k0.n_params)
            if free:
                theta0[:M] += rng.normal(0.0, 0.1, M)
        theta0 = _finite_start(theta0, fun, rng, k0.n_params)
        theta, f, g, iters, reason = _run_adam(theta0, fun, config)
        log.debug("restart %d: objective %.6g after %d iterations (%s)", r, f, iters, reason)
        results.append((f, r, theta, g, iters, reason))
    f, r, theta, g, iters, reason = min(results, key=lambda t: (t[0], t[1]))

    _, _, mix, kp = objective_and_grad(theta, X, y, mix0, lam, free, config.ard)
    S = build_scale_matrix(kp, X)
    final_nll, _, _ = nll_and_grads(mix, S, y, 0.0)
    meta = getattr(data, "x_mean", None)
    return EPModel(
        mixing=mix,
        kernel=kp,
        X=X,
        y=y,
        mean=0.0,
        x_mean=meta,
        x_std=getattr(data, "x_std", None),
        y_mean=float(getattr(data, "y_mean", 0.0)),
        y_std=float(getattr(data, "y_std", 1.0)),
        mode=mode,
        diagnostics={
            "objective": float(f),
            "nll": float(final_nll),
            "iterations": int(iters),
            "grad_norm": float(np.linalg.norm(g)),
            "stop_reason": reason,
            "best_restart": int(r),
            "restart_objectives": [float(t[0]) for t in results],
            "jitter": float(S.jitter),
            "config": config.to_dict(),
        },
    )


def _finite_start(theta0, fun, rng, n_kernel, attempts=5):
    theta = theta0.copy()
    for _ in range(attempts):
        try:
            f, g = fun(theta)
            if np.isfinite(f) and np.all(np.isfinite(g)):
                return theta
        except NumericalError:
            pass
        # raise the noise and perturb the rest
        theta[-1] += 1.0
        theta[-n_kernel:-1] += rng.normal(0.0, 0.1, n_kernel - 1)
    raise TrainingError(
        f"objective is not finite at the initial point (kernel params {theta[-n_kernel:]})"
    )


def _sample_objective(log_h, u, width, edges, lam):
    h = np.exp(log_h - np.max(log_h))
    s = 1.5
    with np.errstate(divide="ignore"):
        log_psis = _log_psi(s, edges[:-1], edges[1:], u[:, None])
        log_sum = logsumexp(log_psis + np.log(h), axis=1)
    nll = 0.5 * u + 0.5 * math.log(2 * math.pi) + math.log(width * h.sum()) - log_sum
    value = float(np.mean(nll))
    d_h = 1.0 / h.sum() - np.mean(np.exp(log_psis - log_sum[:, None]), axis=0)
    if lam > 0:
        pen, pen_grad = smoothness_penalty(h, width)
        value += lam * pen
        d_h = d_h + lam * pen_grad
    return value, d_h * h


def fit_mixing_to_samples(
    samples,
    M=mixing_mod.DEFAULT_M,
    delta=mixing_mod.DEFAULT_WIDTH,
    l0=mixing_mod.DEFAULT_START,
    iters=2000,
    learning_rate=0.05,
    smoothness_lambda=0.0,
):
    """Fit mixing heights to 1-D samples of a zero-mean, unit-scale elliptical.

    Minimizes the mean negative log density of the samples (the empirical
    KL divergence up to a constant), starting from equal heights.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 100:
        raise DomainError("need at least 100 samples")
    u = np.maximum(samples**2, 1e-300)
    edges = l0 + delta * np.arange(M + 1)
    theta = np.zeros(M)
    state = AdamState.zeros(M)
    best_f, best_theta = np.inf, theta
    for _ in range(iters):
        f, g = _sample_objective(theta, u, delta, edges, smoothness_lambda)
        if f < best_f:
            best_f, best_theta = f, theta.copy()
        theta, state = adam_step(theta, g, state, learning_rate)
    f, _ = _sample_objective(theta, u, delta, edges, smoothness_lambda)
    if f < best_f:
        best_theta = theta
    h = np.exp(best_theta - np.max(best_theta))
    return mixing_mod.MixingDistribution(h, delta, l0)


def select_lambda(data, config=None, grid=LAMBDA_GRID, folds=3, mode="ep", fold_restarts=1):
    """Pick the smoothness weight by k-fold cross-validation.

    Each candidate is scored by the mean held-out log predictive density
    (per point) over the folds.  Fold fits use ``fold_restarts`` restarts to
    keep the sweep affordable.  Ties go to the larger weight.

    Returns
    -------
    best : float
    scores : dict
        Mean held-out log density for every candidate.
    """
    from .posterior import predictive_log_density_pointwise

    config = config or TrainConfig()
    X = np.asarray(data.X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    y = np.asarray(data.y, dtype=float).ravel()
    n = y.size
    if folds < 2 or folds > n:
        raise DomainError("folds must lie between 2 and the number of points")
    perm = np.random.default_rng(config.seed).permutation(n)
    parts = np.array_split(perm, folds)
    scores = {}
    for lam in grid:
        cfg = replace(config, smoothness_lambda=float(lam), restarts=fold_restarts)
        total = []
        for k in range(folds):
            te = parts[k]
            tr = np.concatenate([parts[j] for j in range(folds) if j != k])
            try:
                model = fit(SimpleNamespace(X=X[tr], y=y[tr]), cfg, mode)
                total.append(np.mean(predictive_log_density_pointwise(model, X[te], y[te])))
            except NumericalError:
                total.append(-np.inf)
        scores[float(lam)] = float(np.mean(total))
    best = max(sorted(scores, reverse=True), key=lambda lam: scores[lam])
    return best, scores
