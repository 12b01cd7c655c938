"""
Command-line interface: ``ellproc {fit,predict,benchmark,qq}``.

Exit codes: 0 success, 2 usage, 3 data, 4 numerical or training failure,
5 internal error.
"""
import argparse
import configparser
import csv
import json
import logging
import math
import sys

import numpy as np

from . import bench, data as data_mod, mixing as mixing_mod, qq
from .errors import DataError, DomainError, EllprocError, NumericalError
from .model import MODES, load_model, save_model
from .posterior import predict, predictive_interval
from .train import TrainConfig, fit, fit_mixing_to_samples

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4, 5

log = logging.getLogger("ellproc")


class UsageError(Exception):
    pass


def _fmt(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_config(args):
    values = {}
    if args.config:
        cp = configparser.ConfigParser()
        try:
            with open(args.config, encoding="utf-8") as f:
                cp.read_file(f)
        except (OSError, configparser.Error) as e:
            raise DataError(f"cannot read config {args.config}: {e}") from e
        if cp.has_section("train"):
            values.update(cp["train"])
    if getattr(args, "lam", None) is not None:
        values["smoothness_lambda"] = args.lam
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    try:
        return TrainConfig.from_mapping(values)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad training configuration: {e}") from e


def _split_counts(text):
    if text is None:
        return None
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError("--split must look like N_TRAIN,N_TEST") from None
    return a, b


def _dataset_kwargs(args):
    if (args.gen is None) == (args.data is None):
        raise UsageError("give exactly one of --gen or --data")
    if args.data is not None:
        if args.target is None:
            raise UsageError("--data needs --target")
        return {"gen": None, "data_path": args.data, "target": args.target,
                "split_counts": _split_counts(args.split)}
    kw = {"gen": args.gen}
    if args.gen == "synth":
        kw["eta"] = args.eta
    return kw


def _fit_report(model, train):
    d = model.diagnostics
    lines = [
        f"mode: {model.mode}",
        f"training points: {model.n_train}",
        f"objective: {d['objective']:.10g}",
        f"nll: {d['nll']:.10g}",
        f"iterations: {d['iterations']} ({d['stop_reason']})",
        f"gradient norm: {d['grad_norm']:.3g}",
        f"best restart: {d['best_restart']} of {len(d['restart_objectives'])}",
        f"lengthscale: {np.array2string(np.atleast_1d(model.kernel.lengthscale), precision=6)}",
        f"signal variance: {model.kernel.signal_var:.6g}",
        f"noise variance: {model.kernel.noise:.6g}",
        f"E[1/xi] (prior): {model.mixing.mean_inverse():.6g}",
        "mixing probabilities: " + " ".join(f"{p:.4f}" for p in model.mixing.probs),
    ]
    return "\n".join(lines) + "\n"


def cmd_fit(args):
    config = _load_config(args)
    kw = _dataset_kwargs(args)
    seed = config.seed
    train, test = bench.make_dataset(seed=seed, **{k: v for k, v in kw.items()})
    model = fit(train, config, mode=args.mode)
    model.diagnostics["dataset"] = {k: v for k, v in train.meta.items() if k != "train_noise"}
    save_model(model, args.out)
    report = _fit_report(model, train)
    if test.n:
        mse, ll = bench.score(model, test)
        report += f"test mse: {mse:.6g}\ntest mean log density: {ll:.6g}\n"
    report_path = args.report or args.out + ".report.txt"
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(report)
    sys.stdout.write(report)
    return EXIT_OK


def _read_inputs(path, n_cols):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if n_cols is not None and len(header) != n_cols:
        raise DataError(f"{path}: model expects {n_cols} input columns, file has {len(header)}")
    out = np.empty((len(body), len(header)))
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise DataError(f"{path}:{i + 2}: expected {len(header)} fields, found {len(r)}")
        for j, cell in enumerate(r):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}:{i + 2}: column {header[j]!r} is not numeric: {cell!r}"
                ) from None
    return header, out


def cmd_predict(args):
    if not 0 < args.coverage < 1:
        raise UsageError("--coverage must lie in (0, 1)")
    try:
        model = load_model(args.model)
    except OSError as e:
        raise DataError(f"cannot read model {args.model}: {e.strerror}") from e
    n_cols = None if model.x_mean is None else np.size(model.x_mean)
    header, X_raw = _read_inputs(args.inputs, n_cols)
    Xs = model.standardize_inputs(X_raw)
    post = predict(model, Xs, full_cov=False)
    lo, hi = predictive_interval(model, Xs, args.coverage, args.mc_samples, seed=args.seed)
    ys = model.y_std
    mean = post.mean * ys + model.y_mean
    var = post.variance * ys**2
    lo, hi = lo * ys + model.y_mean, hi * ys + model.y_mean
    rows = [list(x) + [m, v, a, b] for x, m, v, a, b in zip(X_raw, mean, var, lo, hi)]
    _write_csv(args.out, header + ["mean", "variance", "lo", "hi"], rows)
    if args.debug:
        _write_json(args.debug, {
            "cov_scale": post.cov_scale,
            "u1": post.u1,
            "n1": post.n1,
            "scale_diag": post.scale_diag.tolist(),
            "y_std": ys,
            "y_mean": model.y_mean,
            "coverage": args.coverage,
        })
    return EXIT_OK


def cmd_benchmark(args):
    config = _load_config(args)
    kw = _dataset_kwargs(args)
    modes = [m.strip().lower() for m in args.modes.split(",")]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise UsageError(f"unknown modes {bad}; choose from {list(MODES)}")
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    seeds = range(config.seed, config.seed + args.seeds)
    rows = bench.run_benchmark(seeds, modes, config, jobs=args.jobs, **kw)
    summary = bench.summarize(rows, modes)
    cols = ["seed", "mode", "mse", "ll", "nll", "stop_reason", "error"]
    _write_csv(args.out + ".csv", cols, [[r.get(c, "") for c in cols] for r in rows])
    out = {
        "dataset": {k: v for k, v in kw.items() if v is not None},
        "seeds": list(seeds),
        "config": config.to_dict(),
        "summary": summary,
        "rows": [{k: v for k, v in r.items() if k != "seconds"} for r in rows],
    }
    _write_json(args.out + ".json", out)
    for mode, c in summary.items():
        flag = "" if c["complete"] else f"  (incomplete: {c['n_ok']}/{c['n_seeds']})"
        print(f"{mode:4s} mse {c['mse_mean']:.4g} +- {c['mse_std']:.4g}   "
              f"ll {c['ll_mean']:.4g} +- {c['ll_std']:.4g}{flag}")
    return EXIT_OK


def _qq_samples(args):
    support = (args.l0, args.l0 + args.n_pieces * args.width)
    if args.samples:
        _, arr = _read_inputs(args.samples, None)
        return arr[:, 0], {"source": args.samples}
    if args.source == "chi2":
        xi = qq.scaled_chi2_mixing(args.n, args.eta, seed=args.seed, support=support)
    else:
        xi = qq.truncated_laplace_mixing(args.n, 1.0, args.laplace_scale, seed=args.seed,
                                         support=support)
    y = qq.sample_elliptical(xi, seed=args.seed + 1)
    return y, {"source": args.source, "mixing_support": list(support)}


def cmd_qq(args):
    y, meta = _qq_samples(args)
    if y.size < 100:
        raise DataError(f"need at least 100 samples, got {y.size}")
    init = mixing_mod.uniform(args.n_pieces, args.width, args.l0)
    fitted = fit_mixing_to_samples(y, args.n_pieces, args.width, args.l0, iters=args.iters,
                                   smoothness_lambda=args.lam or 0.0)
    q, sq, before = qq.qq_pairs(init, y)
    _, _, after = qq.qq_pairs(fitted, y)
    _write_csv(args.out + "_qq.csv", ["q", "sample_quantile", "model_before", "model_after"],
               zip(q, sq, before, after))
    _write_csv(args.out + "_mixing.csv", ["lo", "hi", "density_fitted", "density_init"],
               [list(r) + [d0] for r, d0 in zip(qq.mixing_histogram(fitted), init.levels)])
    summary = dict(
        meta,
        n_samples=int(y.size),
        slope_before=qq.qq_slope(sq, before),
        slope_after=qq.qq_slope(sq, after),
        residual_before=qq.qq_residual(sq, before),
        residual_after=qq.qq_residual(sq, after),
        heights=fitted.heights.tolist(),
    )
    _write_json(args.out + "_summary.json", summary)
    print(f"slope {summary['slope_before']:.4f} -> {summary['slope_after']:.4f}, "
          f"residual {summary['residual_before']:.4g} -> {summary['residual_after']:.4g}")
    return EXIT_OK


def _add_data_flags(p):
    p.add_argument("--gen", choices=sorted(data_mod.GENERATORS))
    p.add_argument("--data", help="CSV file with a header row")
    p.add_argument("--target", help="target column name or index (with --data)")
    p.add_argument("--split", help="N_TRAIN,N_TEST row counts (with --data)")
    p.add_argument("--eta", type=float, default=1.0, help="Student-t noise dof for synth")


def _add_train_flags(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam", type=float, help="smoothness penalty weight")
    p.add_argument("--config", help="INI file with a [train] section of TrainConfig keys")


def build_parser():
    parser = argparse.ArgumentParser(prog="ellproc", description=__doc__.splitlines()[1])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model and write it as JSON")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--mode", choices=MODES, default="ep")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="fit report path (default OUT.report.txt)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict at inputs read from CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--inputs", required=True, help="CSV of raw inputs with a header row")
    p.add_argument("--out", required=True)
    p.add_argument("--coverage", type=float, default=0.95)
    p.add_argument("--mc-samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--debug", help="also write internal quantities as JSON")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", help="repeat fit/score over seeds")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--modes", default="gp,ep,cap")
    p.add_argument("--seeds", type=int, default=20, help="number of seeds")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output prefix for .csv and .json")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("qq", help="fit a mixing distribution to 1-D samples")
    p.add_argument("--source", choices=("chi2", "laplace"), default="chi2")
    p.add_argument("--samples", help="CSV whose first column holds the samples")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--laplace-scale", type=float, default=0.5)
    p.add_argument("--n-pieces", type=int, default=mixing_mod.DEFAULT_M)
    p.add_argument("--width", type=float, default=mixing_mod.DEFAULT_WIDTH)
    p.add_argument("--l0", type=float, default=mixing_mod.DEFAULT_START)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_qq)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"ellproc: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"ellproc: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DomainError, np.linalg.LinAlgError) as e:
        print(f"ellproc: numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except EllprocError as e:
        print(f"ellproc: error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"ellproc: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
