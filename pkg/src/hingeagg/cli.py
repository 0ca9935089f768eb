"""Command-line entry point.

Every subcommand reads its settings from an optional flat TOML file
(``--config``), then ``--set KEY=VALUE`` overrides, then dedicated flags.
Unknown keys are rejected.  Exit codes: 0 success, 2 usage or input
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .aggregates import Procedure, compute_weights, aggregate_rule, minimizers
from .bounds import BoundSpec, remainder, theorem1_bound, theorem2_bound
from .distributions import excess_hinge, load_distribution, zero_one_risk
from .errors import ConsistencyError, NumericError
from .experiments import (
    ExperimentConfig,
    _atomic_write,
    fit_rate,
    hull_oracle,
    monte_carlo,
    read_result_csv,
)
from .losses import empirical_risks, get_loss
from .textio import load_class, load_sample

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def parse_value(text: str):
    """Interpret ``text`` as a TOML value, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def read_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None
    nested = [k for k, v in doc.items() if isinstance(v, dict)]
    if nested:
        raise UsageError(f"{path}: config must be flat, found tables {nested}")
    return doc


def gather_settings(args, defaults: dict, flags: dict) -> dict:
    """Merge defaults, config file, ``--set`` overrides and flags (in that order)."""
    settings = dict(defaults)
    supplied = {}
    if args.config:
        supplied.update(read_config(args.config))
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        supplied[key.strip()] = parse_value(value.strip())
    supplied.update({k: v for k, v in flags.items() if v is not None})
    unknown = sorted(set(supplied) - set(defaults))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    settings.update(supplied)
    return settings


def emit(text: str, output) -> None:
    if output:
        _atomic_write(Path(output), text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------


def cmd_aggregate(args) -> int:
    s = gather_settings(
        args,
        {"class": None, "sample": None, "procedure": "AEW", "loss": "hinge", "distribution": None},
        {
            "class": args.class_file,
            "sample": args.sample_file,
            "procedure": args.procedure,
            "loss": args.loss,
            "distribution": args.distribution,
        },
    )
    if not s["class"] or not s["sample"]:
        raise UsageError("aggregate needs a class file and a sample file")
    cls = load_class(s["class"])
    obs = load_sample(s["sample"])
    if obs.atoms.max() >= cls.n_atoms:
        raise UsageError(
            f"sample uses atom {int(obs.atoms.max())} but the class defines {cls.n_atoms} atoms"
        )
    proc = Procedure.parse(s["procedure"])
    loss = get_loss(s["loss"])
    risks = empirical_risks(loss, cls.values, obs)
    weights = compute_weights(proc, loss, cls, obs)
    tied = minimizers(risks)

    out = io.StringIO()
    out.write(f"procedure {proc.value}\nloss {loss.kind}\nn {obs.n}\nM {cls.M}\n")
    out.write("rule,empirical_risk,weight,minimizer\n")
    for j, (r, w) in enumerate(zip(risks, weights)):
        out.write(f"{j},{float(r)!r},{float(w)!r},{int(tied[j])}\n")
    f = aggregate_rule(weights, cls)
    out.write("aggregate " + " ".join(repr(float(v)) for v in f.values) + "\n")
    if s["distribution"]:
        dist = load_distribution(s["distribution"])
        if dist.n_atoms != cls.n_atoms:
            raise UsageError("distribution and class have different supports")
        out.write(f"excess_hinge {excess_hinge(dist, f).direct!r}\n")
        out.write(f"excess_bayes {zero_one_risk(dist, f) - dist.bayes_risk!r}\n")
    emit(out.getvalue(), args.output)
    return 0


def _experiment_config(args) -> ExperimentConfig:
    defaults = ExperimentConfig().to_mapping()
    s = gather_settings(args, defaults, {"master_seed": args.seed, "output_path": args.output})
    base_dir = Path(args.config).parent if args.config else None
    return ExperimentConfig.from_mapping(s, base_dir=base_dir)


def cmd_simulate(args) -> int:
    config = _experiment_config(args)
    result = monte_carlo(config, threads=args.threads)
    path = result.write_csv(config.output_path)
    print(f"wrote {len(result.rows)} rows to {path}")
    return 0


def _print_fits(result, procedures) -> None:
    print("procedure,slope,target_slope,r_squared,points")
    for proc in procedures:
        fit = fit_rate(result, proc)
        print(f"{proc},{fit.slope:.6f},{-fit.target_exponent:.6f},{fit.r_squared:.6f},{fit.n_points}")


def cmd_rates(args) -> int:
    if args.input:
        if args.config or args.set:
            raise UsageError("--input cannot be combined with --config or --set")
        result = read_result_csv(args.input)
        procedures = list(dict.fromkeys(r.procedure for r in result.rows))
    else:
        config = _experiment_config(args)
        result = monte_carlo(config, threads=args.threads)
        if args.output:
            result.write_csv(config.output_path)
        procedures = [p.value for p in config.procedure_list]
    _print_fits(result, procedures)
    return 0


def _n_values(spec) -> list[int]:
    if isinstance(spec, list):
        return [int(v) for v in spec]
    lo, sep, hi = str(spec).partition(":")
    if not sep:
        return [int(lo)]
    lo, hi = int(lo), int(hi)
    if lo < 1 or hi < lo:
        raise UsageError(f"bad n range {spec!r}")
    out = []
    n = lo
    while n <= hi:
        out.append(n)
        n *= 2
    return out


def cmd_bounds(args) -> int:
    s = gather_settings(
        args,
        {"kappa": 1.0, "M": 16, "c": 1.0, "delta": 0.0, "procedure": "AEW", "n_range": "128:8192"},
        {
            "kappa": args.kappa,
            "M": args.M,
            "c": args.c,
            "delta": args.delta,
            "procedure": args.procedure,
            "n_range": args.n_range,
        },
    )
    if float(s["kappa"]) < 1:
        raise UsageError(f"kappa must be >= 1, got {s['kappa']}")
    spec = BoundSpec(
        float(s["kappa"]), int(s["M"]), float(s["c"]), float(s["delta"]), Procedure.parse(s["procedure"])
    )
    out = io.StringIO()
    out.write("n,remainder,thm1_bound,thm2_bound\n")
    for n in _n_values(s["n_range"]):
        out.write(
            f"{n},{remainder(n, spec)!r},{theorem1_bound(n, spec)!r},{theorem2_bound(n, spec)!r}\n"
        )
    emit(out.getvalue(), args.output)
    return 0


def cmd_oracle(args) -> int:
    s = gather_settings(
        args,
        {"distribution": None, "class": None, "grid_step": 0.02},
        {"distribution": args.distribution, "class": args.class_file, "grid_step": args.grid_step},
    )
    if not s["distribution"] or not s["class"]:
        raise UsageError("oracle needs a distribution file and a class file")
    dist = load_distribution(s["distribution"])
    cls = load_class(s["class"])
    if dist.n_atoms != cls.n_atoms:
        raise UsageError("distribution and class have different supports")
    step = float(s["grid_step"])
    vertex, grid = hull_oracle(dist, cls, step)
    text = (
        f"min_vertex {vertex!r}\nmin_grid {grid!r}\n"
        f"gap {grid - vertex!r}\nslack {2.0 * step * cls.M!r}\n"
        f"excess_vertex {vertex - dist.optimal_hinge_risk!r}\n"
    )
    emit(text, args.output)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat TOML settings file")
    common.add_argument(
        "--set", metavar="KEY=VALUE", action="append", help="override one setting (repeatable)"
    )
    common.add_argument("--output", metavar="PATH", help="output file")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument(
        "--threads", type=int, default=1, help="worker cap; never changes results (default 1)"
    )

    parser = argparse.ArgumentParser(
        prog="hingeagg", description="Aggregation of classifiers with exact hinge risks."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", parents=[common], help="weights of one procedure on a sample")
    p.add_argument("--class", dest="class_file", metavar="FILE")
    p.add_argument("--sample", dest="sample_file", metavar="FILE")
    p.add_argument("--procedure", choices=[x.value for x in Procedure], type=str.upper)
    p.add_argument("--loss", choices=["hinge", "zero_one"])
    p.add_argument("--distribution", metavar="FILE", help="also report exact excess risks")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo sweep to CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rates", parents=[common], help="fit log-log rate exponents")
    p.add_argument("--input", metavar="CSV", help="fit an existing result CSV instead of simulating")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("bounds", parents=[common], help="theoretical bound curves as CSV")
    p.add_argument("--kappa", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--c", type=float, help="hinge margin constant")
    p.add_argument("--delta", type=float, help="oracle excess risk")
    p.add_argument("--procedure", type=str.upper, choices=[x.value for x in Procedure])
    p.add_argument("--n-range", dest="n_range", metavar="LO:HI", help="doubling grid from LO to HI")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("oracle", parents=[common], help="hinge risk over the convex hull by grid search")
    p.add_argument("--distribution", metavar="FILE")
    p.add_argument("--class", dest="class_file", metavar="FILE")
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except (NumericError, ConsistencyError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, OSError, KeyError) as exc:
        msg = exc.strerror if isinstance(exc, OSError) and exc.strerror else exc
        where = f" ({exc.filename})" if isinstance(exc, OSError) and exc.filename else ""
        print(f"error: {msg}{where}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
