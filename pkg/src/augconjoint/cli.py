"""Command-line interface.

    augconjoint [--seed S] [--out PATH] [--format json|csv] COMMAND ...

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings

from . import __version__
from .choice import DatasetKind
from .errors import DataValidationError, NumericalError
from .estimators import EstimatorKind, fit_estimator
from .experiments import ETA_GRID, SimulationConfig, eta_sweep, monte_carlo_benchmark, savings_study
from .fileio import emit_report, ingest_csv, write_dataset_csv
from .gmodels import MlpOptions
from .inference import confidence_intervals, dominance_check, estimate_asymptotics
from .metrics import DEFAULT_MAPE_EPSILON, MetricsReport
from .simlab import (
    DEFAULT_EXPECTATION_DRAWS,
    BENCHMARK_MLP_OPTIONS,
    AlignmentWorld,
    SingleProductWorld,
    MisalignedWorld,
    benchmark_world,
    oracle_beta_star,
    rng_for,
    sample_dataset,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
# seed stream for random world coefficients, kept apart from the data streams
WORLD_STREAM = 7919


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_world_args(p):
    g = p.add_argument_group("world")
    g.add_argument("--world", choices=["single-product", "alignment", "misaligned"], default="misaligned")
    g.add_argument("--alpha", type=float, default=0.3, help="single-product: P(z = 1)")
    g.add_argument("--p", type=float, default=0.8, help="single-product: P(y = z)")
    g.add_argument("--eta", type=float, default=1.0, help="alignment: alignment strength")
    g.add_argument("--theta", type=_floats, help="alignment: human coefficients (default: random)")
    g.add_argument("--zeta", type=_floats, help="alignment: AI coefficients (default: random)")
    g.add_argument("--dim", type=int, default=5, help="alignment: feature dimension for random coefficients")
    g.add_argument("--alternatives", type=int, default=2, help="alignment: inside alternatives per task")


def _world(args):
    if args.world == "single-product":
        return SingleProductWorld(args.alpha, args.p)
    if args.world == "alignment":
        rng = rng_for(args.seed, WORLD_STREAM)
        theta = args.theta if args.theta is not None else rng.uniform(-2, 2, args.dim)
        zeta = args.zeta if args.zeta is not None else rng.uniform(-2, 2, len(theta))
        return AlignmentWorld(theta, zeta, args.eta, k=args.alternatives)
    return benchmark_world()


def _beta_star(world, args):
    if isinstance(world, MisalignedWorld):
        return world.beta.copy()
    return oracle_beta_star(world, draws=args.oracle_draws, seed=args.seed)


def _g_options(args):
    if getattr(args, "g", "parametric") != "mlp":
        return None
    return MlpOptions(epochs=args.epochs, learning_rate=args.learning_rate, seed=args.seed)


def _emit(args, payload, kind):
    text = emit_report(payload, args.format, args.out, kind=kind, seed=args.seed)
    if args.out is None:
        sys.stdout.write(text)


# -- commands ----------------------------------------------------------------------------------


def cmd_simulate(args):
    world = _world(args)
    primary, auxiliary = sample_dataset(world, args.m, args.n, args.seed)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    write_dataset_csv(primary, os.path.join(out, "primary.csv"))
    write_dataset_csv(auxiliary, os.path.join(out, "auxiliary.csv"))
    print(f"wrote {len(primary)} primary and {len(auxiliary)} auxiliary tasks to {out}")


def cmd_fit(args):
    primary = ingest_csv(args.primary, DatasetKind.PRIMARY) if args.primary else None
    auxiliary = ingest_csv(args.auxiliary, DatasetKind.AUXILIARY) if args.auxiliary else None
    res = fit_estimator(args.estimator, primary, auxiliary, args.g, g_options=_g_options(args))
    payload = {"estimator": res.kind.value, "g": args.g if res.kind is EstimatorKind.AAE else None,
               "m": res.sample_sizes[0], "n": res.sample_sizes[1], "beta_hat": res.beta_hat}
    if args.beta_star is not None:
        payload["metrics"] = MetricsReport.compute(res.beta_hat, args.beta_star, args.epsilon)
    if args.format == "csv":
        payload = [{"coefficient": i + 1, "beta_hat": float(b)} for i, b in enumerate(res.beta_hat)]
    _emit(args, payload, "fit")


def cmd_infer(args):
    primary = ingest_csv(args.primary, DatasetKind.PRIMARY)
    auxiliary = ingest_csv(args.auxiliary, DatasetKind.AUXILIARY)
    res = fit_estimator("aae", primary, auxiliary, args.g, g_options=_g_options(args))
    report = estimate_asymptotics(primary, auxiliary, res.beta_hat, res.g_model)
    if args.format == "csv":
        _emit(args, report, "infer")
        return
    dom = dominance_check(report)
    payload = {"beta_hat": res.beta_hat, "g": args.g, "level": args.level,
               "ci_aae": confidence_intervals(res.beta_hat, report.var_aae, args.level),
               "se_aae": report.standard_errors("aae"), "se_primary": report.standard_errors("primary"),
               "dominant": dom.dominant, "asymptotics": report}
    _emit(args, payload, "infer")


def cmd_sweep(args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = eta_sweep(args.instances, args.eta_grid, args.draws, args.seed, k=args.alternatives, d=args.dim,
                        n_jobs=args.jobs)
    payload = res if args.format == "csv" else {"config": res.config, "resampled": res.resampled,
                                                 "summary": res.summary(), "rows": res.records()}
    _emit(args, payload, "sweep-eta")


def cmd_benchmark(args):
    world = _world(args)
    cfg = SimulationConfig(world, args.m, args.n, args.replications, args.seed, tuple(args.estimators),
                           args.g, args.epsilon, args.oracle_draws, g_options=_g_options(args))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = monte_carlo_benchmark(cfg, args.jobs, _beta_star(world, args))
    payload = res if args.format == "csv" else {"config": res.config, "beta_star": res.beta_star,
                                                 "summary": res.summary(args.metric), "records": res.records}
    _emit(args, payload, "benchmark")


def cmd_savings(args):
    world = _world(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        study = savings_study(world, args.m_values, args.n, args.curve_sizes, args.replications, args.seed,
                              args.metric, args.epsilon, not args.no_extrapolate, args.jobs, args.oracle_draws,
                              args.g, beta_star=_beta_star(world, args), g_options=_g_options(args))
    payload = study if args.format == "csv" else {
        "beta_star": study.beta_star, "curve": {"sizes": study.curve.sizes, "errors": study.curve.errors,
                                                "smoothed": study.curve.smoothed()},
        "savings": study.records()}
    _emit(args, payload, "savings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="augconjoint", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    parser.add_argument("--out", help="output file (directory for simulate); stdout if omitted")
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def g_args(p, g="parametric", learning_rate=MlpOptions.learning_rate):
        p.add_argument("--g", choices=["parametric", "mlp"], default=g)
        p.add_argument("--epochs", type=int, default=MlpOptions.epochs, help="mlp: Adam epochs")
        p.add_argument("--learning-rate", type=float, default=learning_rate, help="mlp: Adam step size")

    def mc_args(p):
        p.add_argument("--replications", type=int, default=50)
        p.add_argument("--epsilon", type=float, default=DEFAULT_MAPE_EPSILON, help="MAPE denominator adjustment")
        p.add_argument("--metric", choices=["mape", "mse", "l2"], default="mape")
        p.add_argument("--oracle-draws", type=int, default=DEFAULT_EXPECTATION_DRAWS)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("simulate", help="draw primary and auxiliary CSV datasets from a world")
    _add_world_args(p)
    p.add_argument("-m", type=int, required=True, help="primary tasks")
    p.add_argument("-n", type=int, required=True, help="auxiliary tasks")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one estimator to CSV data")
    p.add_argument("--estimator", choices=[e.value for e in EstimatorKind], default="aae")
    p.add_argument("--primary")
    p.add_argument("--auxiliary")
    p.add_argument("--beta-star", type=_floats, help="reference coefficients for MAPE/MSE")
    p.add_argument("--epsilon", type=float, default=DEFAULT_MAPE_EPSILON)
    g_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("infer", help="AI-augmented fit with plug-in covariance and intervals")
    p.add_argument("--primary", required=True)
    p.add_argument("--auxiliary", required=True)
    p.add_argument("--level", type=float, default=0.95)
    g_args(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("sweep-eta", help="dominance eigenvalues across alignment strengths")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--eta-grid", type=_floats, default=list(ETA_GRID))
    p.add_argument("--draws", type=int, default=DEFAULT_EXPECTATION_DRAWS)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--alternatives", type=int, default=2)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("benchmark", help="Monte Carlo comparison of the estimators")
    _add_world_args(p)
    p.add_argument("-m", type=int, default=100)
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("--estimators", type=lambda s: s.split(","), default=["primary", "auxiliary", "naive", "aae"])
    g_args(p, "mlp", BENCHMARK_MLP_OPTIONS.learning_rate)
    mc_args(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("savings", help="percent of human data saved by AI augmentation")
    _add_world_args(p)
    p.add_argument("--m-values", type=_ints, default=[50, 100, 200])
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("--curve-sizes", type=_ints, default=[50, 100, 200, 400, 800, 1600])
    p.add_argument("--no-extrapolate", action="store_true")
    g_args(p, "mlp", BENCHMARK_MLP_OPTIONS.learning_rate)
    mc_args(p)
    p.set_defaults(func=cmd_savings)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except DataValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
