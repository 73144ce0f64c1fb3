"""Monte Carlo experiments: the eta sweep, estimator benchmarks and data savings.

Every replication or instance draws from its own generator seeded by
``(master_seed, index, ...)``, so results do not depend on execution order
and runs may be spread over worker processes.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .choice import FitOptions, _log_probs
from .errors import ChoiceModelError, NumericalError
from .estimators import EstimatorKind, fit_estimator
from .inference import residual_decomposition
from .metrics import DEFAULT_MAPE_EPSILON, ErrorCurve, SavingsEntry, data_savings, l2_error, mape, mse
from .simlab import (
    DEFAULT_EXPECTATION_DRAWS,
    AlignmentWorld,
    World,
    derive_seed,
    oracle_beta_star,
    population_beta,
    rng_for,
    sample_dataset,
)

logger = logging.getLogger(__name__)

ETA_GRID = (0.01, 0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)


def _run(fn, args_list, n_jobs):
    if n_jobs == 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, *zip(*args_list)))


# -- eta sweep ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    eta: float
    instance: int
    min_eig: float
    abs_prob_diff: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    resampled: int
    config: dict = field(default_factory=dict)

    def values(self, eta, attr):
        return np.array([getattr(r, attr) for r in self.rows if r.eta == eta])

    @property
    def etas(self):
        return sorted({r.eta for r in self.rows})

    def summary(self) -> list[dict]:
        out = []
        for eta in self.etas:
            row = {"eta": eta}
            for attr in ("min_eig", "abs_prob_diff"):
                v = self.values(eta, attr)
                row.update({f"{attr}_mean": float(v.mean()), f"{attr}_min": float(v.min()),
                            f"{attr}_max": float(v.max())})
            out.append(row)
        return out

    def records(self) -> list[dict]:
        return [{"eta": r.eta, "instance": r.instance, "min_eig": r.min_eig, "abs_prob_diff": r.abs_prob_diff}
                for r in self.rows]


def sweep_cell(world: AlignmentWorld, support, init=None):
    """Best-in-class coefficients, ``min eig E[r r^T]`` and mean absolute
    probability gap ``E[(1/k) sum_j |sigma_j - g_j|]`` for one world."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        beta = population_beta(support, init=init)
    dec = residual_decomposition(support, beta, world.g, projection=False)
    x, z, w, _ = support.xz_rows()
    gap = np.abs(np.exp(_log_probs(x, beta))[:, 1:] - world.g.probs(x, z)[:, 1:]).mean(axis=1)
    return beta, float(np.linalg.eigvalsh(dec.total)[0]), float(w @ gap)


def _sweep_instance(index, master_seed, eta_grid, draws, k, d, max_attempts):
    for attempt in range(max_attempts):
        rng = rng_for(master_seed, index, attempt)
        theta = rng.uniform(-2.0, 2.0, d)
        zeta = rng.uniform(-2.0, 2.0, d)
        x = rng.uniform(-1.0, 1.0, size=(draws, k, d))
        rows, beta = [], None
        try:
            for eta in eta_grid:
                world = AlignmentWorld(theta, zeta, eta, k=k)
                beta, min_eig, gap = sweep_cell(world, world.support_at(x), init=beta)
                rows.append(SweepRow(float(eta), index, min_eig, gap))
            return rows, attempt
        except NumericalError as exc:
            logger.info("sweep instance %d attempt %d failed: %s", index, attempt, exc)
    raise NumericalError(f"sweep instance {index} failed {max_attempts} times")


def eta_sweep(n_instances=50, eta_grid=ETA_GRID, expectation_draws=DEFAULT_EXPECTATION_DRAWS, master_seed=0,
              k=2, d=5, n_jobs=1, max_attempts=20) -> SweepResult:
    """Minimum eigenvalue of the dominance matrix across alignment strengths.

    Each instance draws ``theta_check, zeta ~ U[-2, 2]^d`` and
    ``expectation_draws`` feature points ``~ U[-1, 1]``; the same instance
    (parameters and points) is evaluated at every ``eta``. An instance whose
    oracle fit fails is redrawn with the next attempt seed.
    """
    args = [(i, master_seed, tuple(eta_grid), expectation_draws, k, d, max_attempts) for i in range(n_instances)]
    results = _run(_sweep_instance, args, n_jobs)
    rows = [row for inst_rows, _ in results for row in inst_rows]
    rows.sort(key=lambda r: (r.eta, r.instance))
    config = {"n_instances": n_instances, "eta_grid": list(eta_grid), "expectation_draws": expectation_draws,
              "master_seed": master_seed, "k": k, "d": d}
    return SweepResult(rows, sum(a for _, a in results), config)


# -- estimator benchmark -----------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    world: World
    m: int
    n: int
    replications: int = 50
    master_seed: int = 0
    estimators: tuple = ("primary", "auxiliary", "naive", "aae")
    g_variant: str = "parametric"
    epsilon: float = DEFAULT_MAPE_EPSILON
    oracle_draws: int = DEFAULT_EXPECTATION_DRAWS
    fit_options: FitOptions | None = None
    g_options: object = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.m < 0 or self.n < 0:
            raise ValueError("sample sizes must be nonnegative")
        object.__setattr__(self, "estimators", tuple(EstimatorKind(e).value for e in self.estimators))


@dataclass
class BenchmarkResult:
    beta_star: np.ndarray
    records: list[dict]
    config: dict = field(default_factory=dict)

    def errors(self, estimator, metric="mape") -> np.ndarray:
        """Per-replication errors in replication order; NaN where the fit failed."""
        recs = sorted((r for r in self.records if r["estimator"] == estimator), key=lambda r: r["replication"])
        return np.array([r[metric] for r in recs], dtype=float)

    def paired_differences(self, a, b, metric="mape") -> np.ndarray:
        return self.errors(a, metric) - self.errors(b, metric)

    def summary(self, metric="mape", baseline="primary") -> list[dict]:
        out = []
        names = list(dict.fromkeys(r["estimator"] for r in self.records))
        for name in names:
            e = self.errors(name, metric)
            ok = e[np.isfinite(e)]
            row = {"estimator": name, "metric": metric, "n_ok": int(ok.size), "n_failed": int(e.size - ok.size),
                   "mean": float(ok.mean()) if ok.size else np.nan,
                   "sd": float(ok.std(ddof=1)) if ok.size > 1 else np.nan}
            if baseline in names and name != baseline:
                diff = self.paired_differences(name, baseline, metric)
                diff = diff[np.isfinite(diff)]
                row["paired_mean_diff"] = float(diff.mean()) if diff.size else np.nan
                row["paired_frac_below"] = float((diff < 0).mean()) if diff.size else np.nan
            out.append(row)
        return out


def _replicate(config: SimulationConfig, beta_star, rep):
    primary, auxiliary = sample_dataset(config.world, config.m, config.n, derive_seed(config.master_seed, rep))
    out = []
    for name in config.estimators:
        rec = {"replication": rep, "estimator": name}
        try:
            res = fit_estimator(name, primary, auxiliary, config.g_variant, config.fit_options, config.g_options)
            b = res.beta_hat
            rec.update(status="ok", mape=mape(b, beta_star, config.epsilon), mse=mse(b, beta_star),
                       l2=l2_error(b, beta_star), beta=b.tolist())
        except ChoiceModelError as exc:
            rec.update(status=type(exc).__name__, mape=np.nan, mse=np.nan, l2=np.nan, beta=None)
        out.append(rec)
    return out


def monte_carlo_benchmark(config: SimulationConfig, n_jobs=1, beta_star=None) -> BenchmarkResult:
    """Fit the requested estimators on ``replications`` fresh datasets and
    score each against the world's best-in-class coefficients.

    Estimator failures are recorded per replication (status column) rather
    than raised.
    """
    if beta_star is None:
        beta_star = oracle_beta_star(config.world, draws=config.oracle_draws, seed=config.master_seed)
    args = [(config, beta_star, r) for r in range(config.replications)]
    records = [rec for recs in _run(_replicate, args, n_jobs) for rec in recs]
    meta = {"m": config.m, "n": config.n, "replications": config.replications,
            "master_seed": config.master_seed, "estimators": list(config.estimators),
            "g_variant": config.g_variant, "epsilon": config.epsilon, "world": repr(config.world)}
    return BenchmarkResult(np.asarray(beta_star), records, meta)


# -- data savings ------------------------------------------------------------------------------


@dataclass
class SavingsStudy:
    curve: ErrorCurve
    entries: list[SavingsEntry]
    aae_errors: list[float]
    beta_star: np.ndarray

    def records(self) -> list[dict]:
        return [{"m": e.n1, "aae_error": a, "n2": e.n2, "percent": e.percent, "extrapolated": e.extrapolated}
                for e, a in zip(self.entries, self.aae_errors)]


def _sub_seed(master_seed, *keys) -> int:
    return int(derive_seed(master_seed, *keys).generate_state(1)[0])


def savings_study(world: World, m_values, n, curve_sizes, replications=50, master_seed=0, metric="mape",
                  epsilon=DEFAULT_MAPE_EPSILON, extrapolate=True, n_jobs=1, oracle_draws=DEFAULT_EXPECTATION_DRAWS,
                  g_variant="parametric", beta_star=None, g_options=None) -> SavingsStudy:
    """Percent of human data the AI-augmented estimator saves at each primary size.

    A primary-only error curve is estimated on ``curve_sizes``; for each ``m``
    the mean AI-augmented error at ``(m, n)`` is located on that curve.
    """
    if beta_star is None:
        beta_star = oracle_beta_star(world, draws=oracle_draws, seed=master_seed)
    curve_err = []
    for size in curve_sizes:
        cfg = SimulationConfig(world, int(size), 0, replications, _sub_seed(master_seed, 0, size), ("primary",),
                               epsilon=epsilon, oracle_draws=oracle_draws)
        e = monte_carlo_benchmark(cfg, n_jobs, beta_star).errors("primary", metric)
        curve_err.append(float(np.nanmean(e)))
    curve = ErrorCurve(curve_sizes, curve_err)
    entries, aae = [], []
    for m in m_values:
        cfg = SimulationConfig(world, int(m), int(n), replications, _sub_seed(master_seed, 1, m), ("aae",),
                               g_variant=g_variant, epsilon=epsilon, oracle_draws=oracle_draws, g_options=g_options)
        err = float(np.nanmean(monte_carlo_benchmark(cfg, n_jobs, beta_star).errors("aae", metric)))
        aae.append(err)
        entries.append(data_savings(err, curve, int(m), extrapolate))
    return SavingsStudy(curve, entries, aae, beta_star)
