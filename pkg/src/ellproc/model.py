"""The fitted elliptical-process regressor and its JSON form."""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NotFittedError
from .kernel import KernelParams, build_scale_matrix
from .mixing import MixingDistribution

__all__ = ["EPModel", "MODES", "load_model", "save_model"]

MODES = ("ep", "gp", "cap")
FORMAT_VERSION = 1


@dataclass(eq=False)
class EPModel:
    """Mixing distribution, kernel and (standardized) training data.

    ``X`` and ``y`` live in standardized units; ``x_mean`` etc. map raw
    inputs into that space and predictions back out of it.
    """

    mixing: MixingDistribution
    kernel: KernelParams
    X: np.ndarray = None
    y: np.ndarray = None
    mean: float = 0.0
    x_mean: np.ndarray = None
    x_std: np.ndarray = None
    y_mean: float = 0.0
    y_std: float = 1.0
    mode: str = "ep"
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_fitted(self):
        return self.X is not None and self.y is not None

    @property
    def n_train(self):
        self.require_fitted()
        return self.X.shape[0]

    @property
    def input_dim(self):
        self.require_fitted()
        return self.X.shape[1]

    def require_fitted(self):
        if not self.is_fitted:
            raise NotFittedError("model has no training data")

    def scale_matrix(self):
        self.require_fitted()
        return build_scale_matrix(self.kernel, self.X)

    def standardize_inputs(self, X_raw):
        X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
        if self.x_mean is None:
            return X_raw
        if X_raw.shape[1] != np.size(self.x_mean):
            raise DataError(
                f"model expects {np.size(self.x_mean)} input columns, got {X_raw.shape[1]}"
            )
        return (X_raw - self.x_mean) / self.x_std

    def to_dict(self):
        d = {
            "format_version": FORMAT_VERSION,
            "mode": self.mode,
            "mixing": self.mixing.to_dict(),
            "kernel": self.kernel.to_dict(),
            "mean": self.mean,
            "standardization": {
                "x_mean": None if self.x_mean is None else np.ravel(self.x_mean).tolist(),
                "x_std": None if self.x_std is None else np.ravel(self.x_std).tolist(),
                "y_mean": self.y_mean,
                "y_std": self.y_std,
            },
            "diagnostics": self.diagnostics,
        }
        if self.is_fitted:
            d["train"] = {"X": self.X.tolist(), "y": self.y.tolist()}
        return d

    @classmethod
    def from_dict(cls, d):
        st = d.get("standardization", {})
        train = d.get("train")
        as_arr = lambda v: None if v is None else np.asarray(v, dtype=float)
        return cls(
            mixing=MixingDistribution.from_dict(d["mixing"]),
            kernel=KernelParams.from_dict(d["kernel"]),
            X=None if train is None else np.asarray(train["X"], dtype=float),
            y=None if train is None else np.asarray(train["y"], dtype=float),
            mean=float(d.get("mean", 0.0)),
            x_mean=as_arr(st.get("x_mean")),
            x_std=as_arr(st.get("x_std")),
            y_mean=float(st.get("y_mean", 0.0)),
            y_std=float(st.get("y_std", 1.0)),
            mode=d.get("mode", "ep"),
            diagnostics=d.get("diagnostics", {}),
        )


def save_model(model, path):
    with open(path, "w") as f:
        json.dump(model.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def load_model(path):
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: not a model file ({e})") from e
    try:
        return EPModel.from_dict(d)
    except (KeyError, TypeError) as e:
        raise DataError(f"{path}: malformed model file ({e})") from e
