"""Command-line interface.

    w1mix functionals --model '<descriptor json or path>'
    w1mix kernel     --config cfg.json [--out DIR]
    w1mix simulate   --config cfg.json [--out DIR]
    w1mix cvar       --u 0.05 (--model '<json>' --n N | --input-csv FILE) [--seed S]
    w1mix experiment {clt,lil,prop1,cvar,bivariate} --config cfg.json
                     [--out DIR] [--seed N] [--threads N]

Exit codes: 0 success, 2 precondition refusal (the theory does not apply to
the requested inputs), 1 any other error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .cvar import cvar_report
from .errors import DivergenceError, PreconditionError, W1MixError
from .experiments import ExperimentConfig, limit_kernel, run_experiment, write_outputs
from .gaussian import l1_norm_distribution
from .mixing import check_condition_2_2, compute_V, gine_integral, rq_integral
from .processes import model_from_spec
from .quadrature import DEFAULT_QUAD


def _load_json_arg(arg):
    """Accept inline JSON or a path to a JSON file."""
    text = arg
    if not arg.lstrip().startswith("{"):
        with open(arg) as f:
            text = f.read()
    return json.loads(text)


def _load_config(path, seed=None, threads=None):
    with open(path) as f:
        raw = json.load(f)
    if seed is not None:
        raw["seed"] = seed
    if threads is not None:
        raw["threads"] = threads
    return ExperimentConfig.from_dict(raw)


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_functionals(args):
    model = model_from_spec(_load_json_arg(args.model))
    profile = model.mixing
    out = {"model": model.name}
    verdict = check_condition_2_2(profile, DEFAULT_QUAD)
    out["condition_2_2"] = {"status": verdict.status, "value": verdict.value}
    try:
        out["V"] = compute_V(profile, DEFAULT_QUAD)
    except DivergenceError as exc:
        out["V"] = None
        out["V_status"] = str(exc)
    try:
        out["sqrt_tail_integral"] = gine_integral(profile.tail, DEFAULT_QUAD)
        out["sqrt_tail_status"] = "finite"
    except DivergenceError as exc:
        out["sqrt_tail_integral"] = None
        out["sqrt_tail_status"] = str(exc)
    try:
        out["rq_integral"] = rq_integral(profile, DEFAULT_QUAD)
    except DivergenceError as exc:
        out["rq_integral"] = None
        out["rq_status"] = str(exc)
    _emit(out)
    return 0


def _partial_config(path, seed=None):
    with open(path) as f:
        raw = json.load(f)
    raw.setdefault("experiment", "clt")  # placeholder; kernel/simulate ignore it
    if seed is not None:
        raw["seed"] = seed
    return ExperimentConfig.from_dict(raw)


def cmd_kernel(args):
    config = _partial_config(args.config, args.seed)
    model = model_from_spec(config.model)
    kernel = limit_kernel(model, config)
    os.makedirs(args.out, exist_ok=True)
    np.savetxt(os.path.join(args.out, "kernel.csv"), kernel.matrix, delimiter=",")
    np.savetxt(
        os.path.join(args.out, "grid.csv"),
        np.column_stack([kernel.grid.points, kernel.grid.weights]),
        delimiter=",",
        header="point,weight",
        comments="",
    )
    kernel.factor()
    _emit(
        {
            "model": model.name,
            "grid_size": kernel.grid.size,
            "grid_lo": float(kernel.grid.points[0]),
            "grid_hi": float(kernel.grid.points[-1]),
            "trace": float(np.trace(kernel.matrix)),
            "psd_repair": kernel.psd_repair,
            "out": args.out,
        }
    )
    return 0


def cmd_simulate(args):
    config = _partial_config(args.config, args.seed)
    model = model_from_spec(config.model)
    kernel = limit_kernel(model, config)
    sample = l1_norm_distribution(kernel, config.limit_draws, (config.seed, 2))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "l1_sample.csv")
    with open(path, "w", newline="\n") as f:
        f.write("l1_norm\n")
        for v in sample.values:
            f.write(repr(float(v)) + "\n")
    _emit(
        {
            "model": model.name,
            "draws": int(sample.values.size),
            "mean": sample.mean,
            "quantiles": sample.quantiles,
            "psd_repair": kernel.psd_repair,
            "out": path,
        }
    )
    return 0


def cmd_cvar(args):
    if (args.model is None) == (args.input_csv is None):
        raise W1MixError("provide exactly one of --model or --input-csv")
    if args.model is not None:
        model = model_from_spec(_load_json_arg(args.model))
        n = args.n if args.n is not None else 10000
        path = model.sample(n, (args.seed, 1))
        kernel = None
        if args.rate:
            cfg = ExperimentConfig(experiment="clt", model=_load_json_arg(args.model),
                                   seed=args.seed, n=n)
            kernel = limit_kernel(model, cfg)
        report = cvar_report(
            path, args.u, marginal=model.marginal, kernel=kernel,
            n_for_rate=n, draws=args.rate_draws, seed=(args.seed, 3),
        )
    else:
        data = np.loadtxt(args.input_csv, delimiter=",", ndmin=1)
        report = cvar_report(data, args.u)
    _emit(report.to_dict())
    return 0


def cmd_experiment(args):
    config = _load_config(args.config, args.seed, args.threads)
    if config.experiment != args.kind:
        config.experiment = args.kind
        config.__post_init__()
    result = run_experiment(config)
    csv_path, json_path = write_outputs(result, args.out)
    _emit({"results": csv_path, "summary": json_path,
           "verdict": result.summary.get("verdict"),
           "config_hash": config.config_hash})
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="w1mix",
        description="Empirical W1 distance for stationary mixing sequences: "
        "functionals, Gaussian limits, CVaR, and Monte Carlo experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("functionals", help="print mixing functionals for a model")
    p.add_argument("--model", required=True, help="model descriptor (inline JSON or path)")
    p.set_defaults(fn=cmd_functionals)

    p = sub.add_parser("kernel", help="emit the covariance kernel as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_kernel)

    p = sub.add_parser("simulate", help="emit an integrated-|Z| sample as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("cvar", help="CVaR report for a model or a CSV of observations")
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--input-csv", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", action=argparse.BooleanOptionalAction, default=True,
                   help="include the asymptotic rate annotation (model mode)")
    p.add_argument("--rate-draws", type=int, default=20000)
    p.set_defaults(fn=cmd_cvar)

    p = sub.add_parser("experiment", help="run a seeded Monte Carlo experiment")
    p.add_argument("kind", choices=["clt", "lil", "prop1", "cvar", "bivariate"])
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(fn=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PreconditionError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (W1MixError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
