"""Command-line interface: ``npwnet {simulate,fit,select,eval,bench}``.

Every command accepts ``--config FILE`` holding a flat JSON object whose keys
match the long option names (dashes or underscores); explicit flags win over
the file.  Exit status is 0 on success, 1 on usage or input errors and 2 when
a fit finished without converging (its results are still written).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import io
from .errors import InvalidConfig, NpwnetError
from .experiment import evaluate, ks_summary, run_bench
from .modelsel import icl, select_k
from .simulate import THETA_S1, GeneratorConfig, WeightModel, simulate
from .varem import FitConfig, fit
from .varem.params import FitResult, ModelParams

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _k_range(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


# option name -> (type, default, help); defaults are applied after the config file
FIT_OPTIONS = {
    "K": (int, 2, "number of clusters"),
    "weight_mode": (str, "nonparametric", "nonparametric, normal, gamma or none"),
    "max_iter": (int, 200, "outer EM iterations"),
    "tol": (float, 1e-6, "relative ELBO tolerance"),
    "restarts": (int, 5, "random restarts"),
    "mm_inner_iters": (int, 5, "MM sweeps per E-step"),
    "seed": (int, 0, "random seed"),
    "degree": (int, 2, "local polynomial degree"),
    "grid_size": (int, 101, "density grid size"),
}
GEN_OPTIONS = {
    "n": (int, 500, "number of nodes"),
    "K": (int, None, "number of clusters (defaults to len(theta))"),
    "theta": (_floats, list(THETA_S1), "comma-separated sparsity parameters"),
    "pi": (_floats, None, "comma-separated mixture proportions (uniform by default)"),
    "weights": (str, "normal", "normal, gamma or none"),
    "block_params": (str, None, "JSON K x K x 2 table of block parameters"),
    "seed": (int, None, "random seed (required)"),
}


def _add(parser, options):
    for name, (_, _, helptext) in options.items():
        parser.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=helptext)


def _resolve(args, options):
    """Merge defaults < config file < explicit flags."""
    values = {k: d for k, (_, d, _) in options.items()}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        for key, v in doc.items():
            key = key.replace("-", "_")
            if key in options:
                values[key] = v
    for key in options:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    out = {}
    for key, (conv, _, _) in options.items():
        v = values[key]
        try:
            out[key] = v if v is None else conv(v)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for --{key.replace('_', '-')}: {v!r}") from None
    return out


def _fit_config(opts) -> FitConfig:
    return FitConfig(K=opts["K"], weight_mode=opts["weight_mode"], max_iter=opts["max_iter"],
                     elbo_rel_tol=opts["tol"], restarts=opts["restarts"],
                     mm_inner_iters=opts["mm_inner_iters"], seed=opts["seed"],
                     degree=opts["degree"], grid_size=opts["grid_size"])


def _generator(opts) -> GeneratorConfig:
    if opts["seed"] is None:
        raise UsageError("--seed is required")
    theta = np.asarray(opts["theta"], dtype=float)
    K = opts["K"] if opts["K"] is not None else theta.size
    pi = np.full(K, 1.0 / K) if opts["pi"] is None else np.asarray(opts["pi"], dtype=float)
    kind = opts["weights"]
    bp = json.loads(opts["block_params"]) if isinstance(opts["block_params"], str) else opts["block_params"]
    if kind == "normal":
        wm = WeightModel.normal(bp, K=K)
    elif kind == "gamma":
        wm = WeightModel.gamma(bp, K=K)
    elif kind == "none":
        wm = WeightModel("none")
    else:
        raise InvalidConfig(f"unknown weight kind {kind!r}")
    cfg = GeneratorConfig(n=opts["n"], K=K, pi=pi, theta=theta, weight_model=wm, seed=opts["seed"])
    cfg.check_simplex()
    return cfg


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args):
    cfg = _generator(_resolve(args, GEN_OPTIONS))
    z, net = simulate(cfg)
    out = _outdir(args.out)
    io.write_edges(os.path.join(out, "edges.csv"), net)
    io.write_labels(os.path.join(out, "labels.csv"), z)
    io.write_json(os.path.join(out, "truth.json"), io.truth_document(cfg, z))
    print(f"wrote {net.n_edges} edges on {net.n} nodes to {out}")
    return EXIT_OK


def _read_net(args):
    return io.read_edges(args.edges, n=int(args.n) if args.n is not None else None)


def cmd_fit(args):
    opts = _resolve(args, FIT_OPTIONS)
    net = _read_net(args)
    cfg = _fit_config(opts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = fit(net, cfg)
    res.icl = icl(net, res)
    out = _outdir(args.out)
    io.write_json(os.path.join(out, "fit.json"), io.fit_document(res, cfg.seed))
    io.write_labels(os.path.join(out, "assignments.csv"), res.hard_labels)
    io.write_densities(out, res)
    status = "converged" if res.converged else "did not converge"
    print(f"K={cfg.K} {status} after {res.n_iter} iterations; ELBO {res.final_elbo:.6f}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_select(args):
    opts = _resolve(args, FIT_OPTIONS)
    net = _read_net(args)
    ks = _k_range(args.k_range)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = select_k(net, ks, _fit_config(opts))
    out = _outdir(args.out)
    report.to_csv(os.path.join(out, "icl.csv"))
    report.to_json(os.path.join(out, "icl.json"))
    print(f"best_k={report.best_k}")
    return EXIT_OK


def _load_fit(fit_dir, net) -> FitResult:
    doc = io.read_json(os.path.join(fit_dir, "fit.json"))
    mode = doc["weight_mode"]
    theta = np.asarray(doc["theta"], dtype=float)
    K = theta.size
    dens = None
    if mode == "nonparametric":
        dens = {(k, l): io.read_density(os.path.join(fit_dir, io.density_filename(k, l)))
                for k in range(K) for l in range(k, K)}
    bp = None if doc.get("block_params") is None else np.asarray(doc["block_params"], dtype=float)
    params = ModelParams(theta, np.asarray(doc["pi"], dtype=float), mode, dens, bp)
    gamma = np.asarray(doc["gamma"], dtype=float)
    return FitResult(params, gamma, np.asarray(doc["labels"], dtype=np.int64),
                     doc["elbo_trace"], bool(doc["converged"]), doc.get("icl"))


def cmd_eval(args):
    net = _read_net(args)
    res = _load_fit(args.fit, net)
    z_true = theta_true = wm = None
    if args.truth:
        z_true = io.read_labels(os.path.join(args.truth, "labels.csv"))
        tpath = os.path.join(args.truth, "truth.json")
        if os.path.exists(tpath):
            doc = io.read_json(tpath)
            theta_true = doc["theta"]
            if doc["weight_kind"] != "none":
                wm = WeightModel(doc["weight_kind"], np.asarray(doc["block_params"], dtype=float))
    rep = evaluate(net, res, z_true, theta_true, wm)
    out = _outdir(args.out)
    rep.to_json(os.path.join(out, "metrics.json"))
    rep.to_csv(os.path.join(out, "metrics.csv"))
    for name, v in rep.rows():
        print(f"{name}: {v:.6g}")
    return EXIT_OK


def cmd_bench(args):
    gen = _generator(_resolve(args, {**GEN_OPTIONS, "seed": (int, 0, "base seed")}))
    fopts = _resolve(args, {**FIT_OPTIONS, "K": (int, gen.K, "")})
    fcfg = _fit_config(fopts)
    reps = int(args.replicates)
    rows = run_bench(gen, fcfg, reps, gen.seed)
    path = args.out
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with io._open_w(path) as fh:
        fh.write("replicate,mode,metric,value\n")
        for r, mode, metric, value in rows:
            v = value if isinstance(value, str) else io.fmt(value)
            fh.write(f"{r},{mode},{metric},{v}\n")
    summary = ks_summary(rows)
    if summary:
        print(f"KS statistic (x100) over {reps} replicates, n={gen.n}")
        print(f"{'block':>6} {'mean':>8} {'median':>8}")
        for block, (mean, med) in summary.items():
            print(f"{'f' + block:>6} {mean:8.2f} {med:8.2f}")
    for mode in ("nonparametric", gen.weight_model.kind, "none"):
        ri = [v for _, m, metric, v in rows if m == mode and metric == "ri"]
        if ri:
            print(f"{mode:>14}: mean RI {np.mean(ri):.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="npwnet", description="Clustering weighted networks with a nonparametric "
                                          "weighted block model.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw a planted network")
    _add(s, GEN_OPTIONS)
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    for name, func, helptext in (("fit", cmd_fit, "fit one K"),
                                 ("select", cmd_select, "choose K by ICL")):
        f = sub.add_parser(name, help=helptext)
        _add(f, FIT_OPTIONS)
        f.add_argument("--config")
        f.add_argument("--edges", required=True)
        f.add_argument("--n", default=None, help="node count (default: largest index + 1)")
        f.add_argument("--out", required=True, help="output directory")
        if name == "select":
            f.add_argument("--k-range", dest="k_range", default="1-4", help="e.g. 1-4 or 1,2,3")
        f.set_defaults(func=func)

    e = sub.add_parser("eval", help="metrics of a fit")
    e.add_argument("--edges", required=True)
    e.add_argument("--n", default=None)
    e.add_argument("--fit", required=True, help="directory written by 'fit'")
    e.add_argument("--truth", default=None, help="directory written by 'simulate'")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="replicated simulation study")
    _add(b, {**GEN_OPTIONS, **{k: v for k, v in FIT_OPTIONS.items() if k not in ("K", "seed")}})
    b.add_argument("--config")
    b.add_argument("--replicates", default=20, type=int)
    b.add_argument("--out", required=True, help="output CSV path")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"npwnet: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (NpwnetError, OSError, ValueError) as exc:
        print(f"npwnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
