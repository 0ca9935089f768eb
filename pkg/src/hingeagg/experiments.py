"""Monte Carlo harness for aggregation rates.

Excess risks are exact: each trial draws a sample, aggregates, and
evaluates the aggregate against the known distribution.  Trial seeds are
derived from ``(master_seed, n, procedure index, trial index)`` through
:class:`numpy.random.SeedSequence`, so results do not depend on the
order or the number of workers that execute the trials.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .aggregates import (
    FunctionClass,
    Procedure,
    aerm_weights,
    aew_weights,
    aggregate_rule,
    caew_weights,
    erm_weights,
    minimizers,
)
from .bounds import BoundSpec, rate_exponent, remainder_value, theorem1_bound
from .distributions import (
    FiniteDistribution,
    excess_hinge,
    hinge_margin_constant,
    hinge_risk,
    load_distribution,
    sample,
    zero_one_risk,
)
from .losses import empirical_risk, empirical_risks, get_loss
from .lower_bound import choose_params, cube_distribution, hypercube_class
from .textio import load_class

PROCEDURE_INDEX = {p: i for i, p in enumerate(Procedure)}

CSV_COLUMNS = [
    "n",
    "M",
    "kappa",
    "procedure",
    "mean_excess_hinge",
    "stderr_hinge",
    "mean_excess_bayes",
    "stderr_bayes",
    "theory_remainder",
    "trials",
    "seed",
]


@dataclass
class ExperimentConfig:
    """Description of a Monte Carlo sweep.

    ``distribution`` is ``"cube"`` or a path to a distribution JSON file;
    ``function_class`` (config key ``class``) is ``"hypercube"`` or a path
    to a class file.  For the cube, ``sigma`` is ``"random"`` (a fresh
    uniform sign vector per trial) or an explicit list of signs.
    """

    kappa: float = 1.0
    M: int = 16
    n_grid: list = field(default_factory=lambda: [2**k for k in range(7, 14)])
    trials: int = 200
    procedures: list = field(default_factory=lambda: ["ERM", "AEW"])
    loss: str = "hinge"
    distribution: str = "cube"
    function_class: str = "hypercube"
    sigma: object = "random"
    master_seed: int = 0
    output_path: str = "results.csv"

    KEY_ALIASES = {"class": "function_class"}

    @classmethod
    def from_mapping(cls, mapping, base_dir=None) -> ExperimentConfig:
        """Build a config from a flat mapping; unknown keys are an error."""
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        unknown = []
        for key, value in mapping.items():
            name = cls.KEY_ALIASES.get(key, key)
            if name not in names:
                unknown.append(key)
            else:
                kwargs[name] = value
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        config = cls(**kwargs)
        if base_dir is not None:
            for name in ("distribution", "function_class"):
                value = getattr(config, name)
                if value not in ("cube", "hypercube") and not os.path.isabs(value):
                    setattr(config, name, str(Path(base_dir) / value))
        return config.validate()

    def to_mapping(self) -> dict:
        out = dataclasses.asdict(self)
        out["class"] = out.pop("function_class")
        return out

    @property
    def procedure_list(self) -> list[Procedure]:
        return [Procedure.parse(p) if isinstance(p, str) else p for p in self.procedures]

    def validate(self) -> ExperimentConfig:
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError(f"trials must be an integer >= 1, got {self.trials!r}")
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa!r}")
        grid = list(self.n_grid)
        if not grid or any(not isinstance(n, int) or n < 1 for n in grid):
            raise ValueError("n_grid must be a non-empty list of positive integers")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if not self.procedures:
            raise ValueError("at least one procedure is required")
        for p in self.procedures:
            Procedure.parse(p) if isinstance(p, str) else Procedure(p)
        get_loss(self.loss)
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative integer")
        if self.function_class == "hypercube" and self.distribution != "cube":
            raise ValueError("the hypercube class is only defined with the cube distribution")
        if self.sigma == "random" and self.function_class != "hypercube" and self.distribution == "cube":
            raise ValueError("a random sigma needs the hypercube class")
        problem = build_problem(self)
        for n in grid:
            problem.check(n)
        return self


class Problem:
    """Distribution/class pair for each sample size of a config."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.kappa = config.kappa
        if config.distribution == "cube":
            self._dist = None
        else:
            self._dist = load_distribution(config.distribution)
        if config.function_class == "hypercube":
            self._cls = None
        else:
            self._cls = load_class(config.function_class)
            if self._dist is not None and self._cls.n_atoms != self._dist.n_atoms:
                raise ValueError("class and distribution have different supports")
        if self._dist is None and config.sigma != "random":
            sigma = np.asarray(config.sigma, dtype=float)
            if np.any(np.abs(sigma) != 1.0):
                raise ValueError("sigma entries must be -1 or +1")

    @property
    def M(self) -> int:
        return self.config.M if self._cls is None else self._cls.M

    def check(self, n: int) -> None:
        if self._dist is None:
            params = choose_params(n, self.config.M, self.kappa)
            if self.config.sigma != "random" and len(self.config.sigma) != params.N - 1:
                raise ValueError(f"sigma needs {params.N - 1} entries for M = {self.config.M}")
            if self._cls is not None and self._cls.n_atoms != params.N:
                raise ValueError("class support does not match the cube's atom count")

    @lru_cache(maxsize=None)
    def _cube(self, n: int):
        params = choose_params(n, self.config.M, self.kappa)
        cls = hypercube_class(params) if self._cls is None else self._cls
        return params, cls

    def draw(self, n: int, rng: np.random.Generator) -> tuple[FiniteDistribution, FunctionClass]:
        if self._dist is not None:
            return self._dist, self._cls
        params, cls = self._cube(n)
        if self.config.sigma == "random":
            sigma = rng.choice([-1.0, 1.0], size=params.N - 1)
        else:
            sigma = self.config.sigma
        return cube_distribution(params, sigma), cls

    def reference(self, n: int) -> tuple[FiniteDistribution, FunctionClass]:
        """A representative law for the theory columns.

        With a random sigma the oracle excess and the margin constant are
        the same for every cube law, so the all-ones law stands in.
        """
        if self._dist is not None:
            return self._dist, self._cls
        params, cls = self._cube(n)
        sigma = np.ones(params.N - 1) if self.config.sigma == "random" else self.config.sigma
        return cube_distribution(params, sigma), cls

    def oracle_excess(self, n: int) -> float:
        dist, cls = self.reference(n)
        return max(min(excess_hinge(dist, row).direct for row in cls.values), 0.0)

    def hinge_constant(self, n: int) -> float:
        dist, _ = self.reference(n)
        return hinge_margin_constant(dist, self.kappa)


@lru_cache(maxsize=32)
def _problem_for(key) -> Problem:
    return Problem(ExperimentConfig(**dict(key)))


def build_problem(config: ExperimentConfig) -> Problem:
    key = tuple(
        (k, tuple(v) if isinstance(v, list) else v)
        for k, v in dataclasses.asdict(config).items()
        if k in ("kappa", "M", "distribution", "function_class", "sigma")
    )
    return _problem_for(key)


def trial_seed(master_seed: int, n: int, procedure: Procedure, trial: int) -> int:
    """Stable 64-bit seed for one trial."""
    ss = np.random.SeedSequence([master_seed, n, PROCEDURE_INDEX[procedure], trial])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TrialOutcome:
    excess_hinge: float
    excess_bayes: float
    empirical_risk: float
    erm_empirical_risk: float
    n_minimizers: int
    M: int
    n: int

    def __iter__(self):
        yield self.excess_hinge
        yield self.excess_bayes


def run_trial(config: ExperimentConfig, n: int, procedure, trial_seed: int) -> TrialOutcome:
    """One draw of size ``n``, one aggregate, its exact excess hinge and Bayes risks."""
    procedure = Procedure.parse(procedure) if isinstance(procedure, str) else procedure
    rng = np.random.default_rng(trial_seed)
    problem = build_problem(config)
    dist, cls = problem.draw(n, rng)
    loss = get_loss(config.loss)
    obs = sample(dist, n, rng)

    risks = empirical_risks(loss, cls.values, obs)
    if procedure is Procedure.ERM:
        w = erm_weights(risks)
    elif procedure is Procedure.AERM:
        w = aerm_weights(risks)
    elif procedure is Procedure.AEW:
        w = aew_weights(risks, n)
    else:
        w = caew_weights(loss, cls, obs)
    f = aggregate_rule(w, cls)

    return TrialOutcome(
        excess_hinge=hinge_risk(dist, f) - dist.optimal_hinge_risk,
        excess_bayes=zero_one_risk(dist, f) - dist.bayes_risk,
        empirical_risk=empirical_risk(loss, f, obs),
        erm_empirical_risk=float(risks.min()),
        n_minimizers=int(minimizers(risks).sum()),
        M=cls.M,
        n=n,
    )


@dataclass(frozen=True)
class ResultRow:
    n: int
    M: int
    kappa: float
    procedure: str
    mean_excess_hinge: float
    stderr_hinge: float
    mean_excess_bayes: float
    stderr_bayes: float
    theory_remainder: float
    trials: int
    seed: int
    # not part of the CSV
    delta: float = float("nan")
    theorem1_bound: float = float("nan")


@dataclass
class ExperimentResult:
    rows: list
    config: ExperimentConfig | None = None
    outcomes: dict = field(default_factory=dict, repr=False)

    def for_procedure(self, procedure) -> list[ResultRow]:
        name = Procedure.parse(procedure).value if isinstance(procedure, str) else procedure.value
        return [r for r in self.rows if r.procedure == name]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([_fmt(getattr(r, col)) for col in CSV_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        """Write the CSV atomically plus a ``.json`` companion holding the config."""
        path = Path(path)
        _atomic_write(path, self.to_csv_text())
        if self.config is not None:
            meta = {"hingeagg_version": __version__, "config": self.config.to_mapping()}
            _atomic_write(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(x))
    if x.size < 2:
        return mean, float("nan")
    return mean, float(np.std(x, ddof=1) / math.sqrt(x.size))


def monte_carlo(config: ExperimentConfig, threads: int = 1, keep_outcomes: bool = False) -> ExperimentResult:
    """Average :func:`run_trial` over ``config.trials`` seeds for every ``(n, procedure)``.

    ``threads`` only changes how trials are scheduled; results are merged
    in trial order, so the output is bit-identical for any value.
    """
    config.validate()
    problem = build_problem(config)
    tasks = [
        (n, proc, t)
        for n in config.n_grid
        for proc in config.procedure_list
        for t in range(config.trials)
    ]

    def work(task):
        n, proc, t = task
        return run_trial(config, n, proc, trial_seed(config.master_seed, n, proc, t))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, tasks))
    else:
        outcomes = [work(task) for task in tasks]

    by_cell = {}
    for (n, proc, _), out in zip(tasks, outcomes):
        by_cell.setdefault((n, proc), []).append(out)

    rows = []
    for n in config.n_grid:
        delta = problem.oracle_excess(n)
        c = problem.hinge_constant(n)
        for proc in config.procedure_list:
            cell = by_cell[(n, proc)]
            hinge = np.array([o.excess_hinge for o in cell])
            bayes = np.array([o.excess_bayes for o in cell])
            mh, sh = _mean_stderr(hinge)
            mb, sb = _mean_stderr(bayes)
            if math.isfinite(c):
                bound = theorem1_bound(n, BoundSpec(config.kappa, problem.M, c, delta, proc))
            else:
                bound = math.inf
            rows.append(
                ResultRow(
                    n=n,
                    M=problem.M,
                    kappa=float(config.kappa),
                    procedure=proc.value,
                    # exact excesses are >= 0; clamp float noise at reporting
                    mean_excess_hinge=max(mh, 0.0),
                    stderr_hinge=sh,
                    mean_excess_bayes=max(mb, 0.0),
                    stderr_bayes=sb,
                    theory_remainder=remainder_value(n, problem.M, config.kappa, delta),
                    trials=config.trials,
                    seed=config.master_seed,
                    delta=delta,
                    theorem1_bound=bound,
                )
            )
    return ExperimentResult(rows, config, by_cell if keep_outcomes else {})


def read_result_csv(path) -> ExperimentResult:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            rows.append(
                ResultRow(
                    n=int(rec["n"]),
                    M=int(rec["M"]),
                    kappa=float(rec["kappa"]),
                    procedure=rec["procedure"],
                    mean_excess_hinge=float(rec["mean_excess_hinge"]),
                    stderr_hinge=float(rec["stderr_hinge"]),
                    mean_excess_bayes=float(rec["mean_excess_bayes"]),
                    stderr_bayes=float(rec["stderr_bayes"]),
                    theory_remainder=float(rec["theory_remainder"]),
                    trials=int(rec["trials"]),
                    seed=int(rec["seed"]),
                )
            )
    return ExperimentResult(rows)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    target_exponent: float
    n_points: int


class InsufficientPointsError(ValueError):
    pass


def fit_power_law(ns, values, min_points: int = 4) -> tuple[float, float, float, int]:
    """Least-squares line through ``(log n, log value)``; non-positive values are dropped.

    Returns ``(slope, intercept, r_squared, points_used)``.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if keep.sum() < min_points:
        raise InsufficientPointsError(
            f"need at least {min_points} positive points for a log-log fit, have {int(keep.sum())}"
        )
    x, y = np.log(ns[keep]), np.log(values[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2, int(keep.sum())


def fit_rate(result: ExperimentResult, procedure) -> RateFit:
    """Empirical exponent of the mean excess hinge risk against ``n``."""
    rows = result.for_procedure(procedure)
    if not rows:
        raise InsufficientPointsError(f"no rows for procedure {procedure}")
    slope, intercept, r2, used = fit_power_law(
        [r.n for r in rows], [r.mean_excess_hinge for r in rows]
    )
    return RateFit(slope, intercept, r2, rate_exponent(rows[0].kappa), used)


def simplex_grid(M: int, K: int) -> np.ndarray:
    """All ``M``-part compositions of ``K`` as an integer array, one per row."""
    if M == 1:
        return np.array([[K]])
    first = np.arange(K + 1)
    if M == 2:
        return np.column_stack([first, K - first])
    blocks = []
    for i in first:
        rest = simplex_grid(M - 1, K - i)
        blocks.append(np.column_stack([np.full(len(rest), i), rest]))
    return np.vstack(blocks)


def hull_oracle(dist: FiniteDistribution, cls: FunctionClass, grid_step: float) -> tuple[float, float]:
    """Brute-force minimum of the hinge risk over the convex hull of a small class.

    Returns ``(min over the rules, min over a simplex grid of mixtures)``.
    """
    if cls.M > 4:
        raise ValueError(f"the simplex grid is limited to M <= 4, got M = {cls.M}")
    if not 0.0 < grid_step <= 0.5:
        raise ValueError(f"grid_step must lie in (0, 0.5], got {grid_step!r}")
    K = int(round(1.0 / grid_step))
    lam = simplex_grid(cls.M, K) / K
    mixtures = np.clip(lam @ cls.values, -1.0, 1.0)
    per_atom = dist.etas * np.maximum(1.0 - mixtures, 0.0) + (1.0 - dist.etas) * np.maximum(
        1.0 + mixtures, 0.0
    )
    grid_risks = per_atom @ dist.masses
    vertex = min(hinge_risk(dist, row) for row in cls.values)
    return float(vertex), float(grid_risks.min())
