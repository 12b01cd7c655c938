"""
Datasets for the regression experiments.

Generators return ``(train, test)`` pairs already standardized with the
training statistics.  Real data sets are read from user-supplied CSV files.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError
from .kernel import cholesky_with_jitter

__all__ = [
    "Dataset",
    "standardize_split",
    "gen_synth",
    "gen_neal",
    "gen_friedman",
    "neal_function",
    "friedman_function",
    "load_csv",
    "save_csv",
    "GENERATORS",
]


@dataclass(eq=False)
class Dataset:
    """Standardized inputs and targets plus the statistics used.

    ``X`` and ``y`` are standardized; :attr:`raw_X` and :attr:`raw_y` undo
    the transformation.
    """

    X: np.ndarray
    y: np.ndarray
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    meta: dict = field(default_factory=dict)
    # the unstandardized values, when known exactly
    X_orig: np.ndarray = None
    y_orig: np.ndarray = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def raw_X(self):
        if self.X_orig is not None:
            return self.X_orig
        return self.X * self.x_std + self.x_mean

    @property
    def raw_y(self):
        if self.y_orig is not None:
            return self.y_orig
        return self.y * self.y_std + self.y_mean


def standardize_split(X_train, y_train, X_test, y_test, meta=None):
    """Standardize both splits with statistics of the training split.

    Constant input columns are centred but not scaled; their indices are
    recorded under ``meta["constant_columns"]``.
    """
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X_train.shape[0] == 1 and np.ndim(y_train) == 1 and len(y_train) > 1:
        X_train, X_test = X_train.T, X_test.T
    y_train = np.asarray(y_train, dtype=float).ravel()
    y_test = np.asarray(y_test, dtype=float).ravel()
    x_mean = X_train.mean(axis=0)
    x_std = X_train.std(axis=0)
    const = np.flatnonzero(x_std == 0)
    x_std = np.where(x_std == 0, 1.0, x_std)
    y_mean = float(y_train.mean())
    y_std = float(y_train.std())
    if y_std == 0:
        y_std = 1.0
    meta = dict(meta or {})
    meta["constant_columns"] = const.tolist()

    def make(X, y, split):
        return Dataset(
            (X - x_mean) / x_std,
            (y - y_mean) / y_std,
            x_mean,
            x_std,
            y_mean,
            y_std,
            dict(meta, split=split),
            X,
            y,
        )

    return make(X_train, y_train, "train"), make(X_test, y_test, "test")


def _student_t(rng, eta, size):
    if math.isinf(eta):
        return rng.standard_normal(size)
    return rng.standard_t(eta, size)


def gen_synth(
    eta,
    n_train=50,
    n_test=50,
    seed=0,
    noise_scale=0.1,
    lengthscale=1.0,
    signal_var=1.0,
):
    """Draw of a GP prior on a grid in [-5, 5] with Student-t training noise.

    The latent function is drawn once for all ``n_train + n_test`` grid
    points, which are then split at random.  Training targets get
    ``noise_scale * t_eta`` noise (``eta = inf`` gives Gaussian noise);
    test targets are noise free.
    """
    if not eta > 0:
        raise DomainError("eta must be positive")
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    x = np.linspace(-5.0, 5.0, n)
    d2 = (x[:, None] - x[None, :]) ** 2
    K = signal_var * np.exp(-0.5 * d2 / lengthscale**2)
    L, _ = cholesky_with_jitter(K + 1e-8 * np.eye(n))
    f = L @ rng.standard_normal(n)
    perm = rng.permutation(n)
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    noise = noise_scale * _student_t(rng, eta, n_train)
    meta = {
        "name": "synth",
        "seed": seed,
        "eta": eta,
        "noise": f"{noise_scale} * student_t(eta)" if math.isfinite(eta) else f"N(0, {noise_scale}^2)",
        "latent_kernel": {"lengthscale": lengthscale, "signal_var": signal_var},
        "train_noise": noise.tolist(),
    }
    return standardize_split(x[tr, None], f[tr] + noise, x[te, None], f[te], meta)


def neal_function(x):
    return 0.3 + 0.4 * x + 0.5 * np.sin(2.7 * x) + 1.1 / (1.0 + x**2)


def gen_neal(
    n_train=100,
    n_test=100,
    seed=0,
    noise_sd=0.1,
    outlier_frac=0.05,
    outlier_sd=3.0,
):
    """Neal's one-dimensional regression problem with target outliers.

    Inputs are standard normal.  Training targets carry N(0, noise_sd^2)
    noise, and ``round(outlier_frac * n_train)`` of them additionally get
    N(0, outlier_sd^2) noise.  Test targets are noise free.
    """
    rng = np.random.default_rng(seed)
    x_tr = rng.standard_normal(n_train)
    x_te = rng.standard_normal(n_test)
    y_tr = neal_function(x_tr) + noise_sd * rng.standard_normal(n_train)
    n_out = int(round(outlier_frac * n_train))
    idx = np.sort(rng.choice(n_train, size=n_out, replace=False))
    y_tr[idx] += outlier_sd * rng.standard_normal(n_out)
    meta = {
        "name": "neal",
        "seed": seed,
        "noise": f"N(0, {noise_sd}^2)",
        "outliers": {"count": n_out, "indices": idx.tolist(), "distribution": f"+N(0, {outlier_sd}^2)"},
    }
    return standardize_split(x_tr[:, None], y_tr, x_te[:, None], neal_function(x_te), meta)


def friedman_function(X):
    X = np.asarray(X, dtype=float)
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def gen_friedman(n_train=100, n_test=100, seed=0, noise_sd=1.0, n_dummy=5):
    """Friedman's five-input function padded with irrelevant uniform inputs."""
    rng = np.random.default_rng(seed)
    d = 5 + n_dummy
    X_tr = rng.random((n_train, d))
    X_te = rng.random((n_test, d))
    y_tr = friedman_function(X_tr) + noise_sd * rng.standard_normal(n_train)
    meta = {"name": "friedman", "seed": seed, "noise": f"N(0, {noise_sd}^2)"}
    return standardize_split(X_tr, y_tr, X_te, friedman_function(X_te), meta)


GENERATORS = {
    "synth": gen_synth,
    "neal": gen_neal,
    "friedman": gen_friedman,
}


def _read_numeric_csv(path):
    try:
        f = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from e
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}"
                )
            vals = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: column {col!r} is not numeric: {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: column {col!r} is not finite")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, np.array(rows)


def _target_index(header, target):
    if isinstance(target, int) or (isinstance(target, str) and target.lstrip("-").isdigit()):
        idx = int(target)
        if not -len(header) <= idx < len(header):
            raise DataError(f"target column index {idx} out of range")
        return idx % len(header)
    if target not in header:
        raise DataError(f"target column {target!r} not found; columns are {header}")
    return header.index(target)


def load_csv(path, target, split_fraction=None, split_counts=None, seed=0):
    """Read a numeric CSV with a header row and split it into train and test.

    Parameters
    ----------
    path : str or path-like
    target : str or int
        Target column name or index.
    split_fraction : float, optional
        Fraction of rows used for training (default 0.8).
    split_counts : (int, int), optional
        Exact ``(n_train, n_test)``; rows beyond their sum are unused.
    seed : int
        Seed of the random split.
    """
    header, data = _read_numeric_csv(path)
    j = _target_index(header, target)
    y = data[:, j]
    X = np.delete(data, j, axis=1)
    if X.shape[1] == 0:
        raise DataError(f"{path}: no input columns besides the target")
    n = data.shape[0]
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    if split_counts is not None:
        n_tr, n_te = (int(c) for c in split_counts)
        if n_tr < 1 or n_te < 0 or n_tr + n_te > n:
            raise DataError(f"split counts {split_counts} do not fit {n} rows")
    else:
        frac = 0.8 if split_fraction is None else float(split_fraction)
        if not 0 < frac <= 1:
            raise DataError("split fraction must lie in (0, 1]")
        n_tr = max(1, int(round(frac * n)))
        n_te = n - n_tr
    tr, te = perm[:n_tr], perm[n_tr:n_tr + n_te]
    meta = {
        "name": str(path),
        "seed": seed,
        "target": header[j],
        "input_columns": [h for i, h in enumerate(header) if i != j],
        "train_rows": tr.tolist(),
        "test_rows": te.tolist(),
    }
    return standardize_split(X[tr], y[tr], X[te], y[te], meta)


def save_csv(dataset, path, raw=True, target_name="y"):
    """Write a dataset as CSV with columns ``x0..x(d-1)`` and the target."""
    X = dataset.raw_X if raw else dataset.X
    y = dataset.raw_y if raw else dataset.y
    names = dataset.meta.get("input_columns") or [f"x{i}" for i in range(X.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(list(names) + [target_name])
        for xi, yi in zip(X, y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])
