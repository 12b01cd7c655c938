"""
Repeated train/test runs over seeds, as in the regression benchmark tables.

Each (dataset, seed) pair is fitted once per mode and scored on the test
split in standardized target units: mean squared error of the predictive
mean and mean per-point log predictive density.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import data as data_mod
from .errors import EllprocError
from .posterior import predict, predictive_log_density_pointwise
from .train import TrainConfig, fit

__all__ = ["score", "run_seed", "run_benchmark", "summarize", "make_dataset"]

log = logging.getLogger(__name__)


def make_dataset(gen, seed, eta=1.0, data_path=None, target=None, split_counts=None):
    """Build the (train, test) pair for one seed."""
    if data_path is not None:
        return data_mod.load_csv(data_path, target, split_counts=split_counts, seed=seed)
    if gen == "synth":
        return data_mod.gen_synth(eta, seed=seed)
    try:
        return data_mod.GENERATORS[gen](seed=seed)
    except KeyError:
        raise ValueError(f"unknown generator {gen!r}") from None


def score(model, test):
    post = predict(model, test.X, full_cov=False)
    mse = float(np.mean((post.mean - test.y) ** 2))
    ll = float(np.mean(predictive_log_density_pointwise(model, test.X, test.y)))
    return mse, ll


def run_seed(args):
    """Fit and score every mode on one seed.

    ``args`` is ``(dataset_kwargs, seed, modes, config_dict)`` so the call
    can be shipped to a worker process.  Failures are returned as rows with
    an ``error`` field instead of being raised.
    """
    ds_kwargs, seed, modes, cfg = args
    rows = []
    try:
        train, test = make_dataset(seed=seed, **ds_kwargs)
    except EllprocError as e:
        return [{"seed": seed, "mode": m, "mse": None, "ll": None, "error": str(e)} for m in modes]
    for mode in modes:
        t0 = time.perf_counter()
        row = {"seed": seed, "mode": mode}
        try:
            model = fit(train, TrainConfig(**dict(cfg, seed=seed)), mode=mode)
            row["mse"], row["ll"] = score(model, test)
            row["nll"] = model.diagnostics["nll"]
            row["stop_reason"] = model.diagnostics["stop_reason"]
            row["error"] = ""
        except (EllprocError, np.linalg.LinAlgError) as e:
            row.update(mse=None, ll=None, error=f"{type(e).__name__}: {e}")
        row["seconds"] = round(time.perf_counter() - t0, 3)
        rows.append(row)
    return rows


def run_benchmark(seeds, modes=("gp", "ep", "cap"), config=None, jobs=1, **ds_kwargs):
    """Run :func:`run_seed` for every seed; rows come back in seed order."""
    cfg = (config or TrainConfig()).to_dict()
    tasks = [(ds_kwargs, int(s), tuple(modes), cfg) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run_seed, tasks))
    else:
        results = [run_seed(t) for t in tasks]
    return [row for rows in results for row in rows]


def summarize(rows, modes=None):
    """Per-mode mean and standard deviation of MSE and LL over seeds.

    The standard deviation is the population value (0 for a single seed).
    Modes with failed seeds are marked ``complete = False``.
    """
    modes = modes or list(dict.fromkeys(r["mode"] for r in rows))
    out = {}
    for mode in modes:
        mine = [r for r in rows if r["mode"] == mode]
        ok = [r for r in mine if not r.get("error")]
        cell = {"n_seeds": len(mine), "n_ok": len(ok), "complete": len(ok) == len(mine)}
        for key in ("mse", "ll"):
            vals = np.array([r[key] for r in ok], dtype=float)
            cell[f"{key}_mean"] = float(vals.mean()) if vals.size else math.nan
            cell[f"{key}_std"] = float(vals.std()) if vals.size else math.nan
        out[mode] = cell
    return out
