"""Monte Carlo harness: size, exact-critical-value power, p-value discrepancy.

Replicates are independent tasks seeded from the master seed and the
replicate index, so results are identical for any worker count; covariates
are drawn once per design (fixed-design Monte Carlo) unless
``redraw_covariates`` is set.
"""

from __future__ import annotations

import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import evd
from .errors import DataError, EvregError
from .evd import GumbelParams, Tail
from .fit import Direction, HypothesisSpec
from .hots import STATISTICS, run_tests
from .inference import prepare
from .model import Dataset, ModelSpec, parse_formula


@dataclass(frozen=True)
class SimDesign:
    """One simulation study: model, truth, covariate laws, hypothesis, seeds."""

    model: ModelSpec
    truth: np.ndarray
    covariates: tuple          # ((name, low, high), ...)
    covariate_seed: int
    n: int
    reps: int
    hypothesis: HypothesisSpec
    alphas: tuple = (0.10, 0.05, 0.01)
    statistics: tuple = STATISTICS
    seed: int = 0
    name: str = "design"
    epsilons: tuple = ()
    crit_reps: int = 100_000
    redraw_covariates: bool = False

    def __post_init__(self):
        object.__setattr__(self, "truth", np.asarray(self.truth, dtype=float))
        if self.reps < 1:
            raise DataError("reps must be >= 1")
        if self.truth.shape != (self.model.n_params,):
            raise DataError(
                f"truth must have {self.model.n_params} entries, got {self.truth.shape}")
        if not all(0.0 < a < 1.0 for a in self.alphas):
            raise DataError("alphas must lie in (0, 1)")
        bad = set(self.statistics) - set(STATISTICS)
        if bad:
            raise DataError(f"unknown statistics {sorted(bad)}")

    def draw_covariates(self, rng: np.random.Generator) -> dict:
        return {name: rng.uniform(low, high, self.n) for name, low, high in self.covariates}

    def build_data(self) -> Dataset:
        """Fixed design: one covariate draw from the design's own seed."""
        rng = np.random.default_rng(np.random.SeedSequence(self.covariate_seed))
        return Dataset(response=np.zeros(self.n), covariates=self.draw_covariates(rng))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "family": self.model.tail.value,
            "location": " + ".join(self.model.location.labels()),
            "dispersion": " + ".join(self.model.dispersion.labels()),
            "dispersion_link": self.model.dispersion_link,
            "truth": [float(v) for v in self.truth],
            "covariates": [list(c) for c in self.covariates],
            "covariate_seed": self.covariate_seed,
            "n": self.n,
            "reps": self.reps,
            "param": self.model.param_names()[self.hypothesis.param],
            "null": self.hypothesis.null_value,
            "direction": self.hypothesis.direction.value,
            "alphas": list(self.alphas),
            "statistics": list(self.statistics),
            "seed": self.seed,
            "epsilons": list(self.epsilons),
            "crit_reps": self.crit_reps,
            "redraw_covariates": self.redraw_covariates,
        }


@dataclass
class SimResult:
    """Per-statistic draws of the test statistics plus aggregation helpers.

    ``values[i, j]`` is statistic j of replicate i (NaN when the replicate
    failed or the statistic was unavailable); failed replicates never enter
    a denominator silently -- valid counts are reported alongside rates.
    """

    design: SimDesign
    values: np.ndarray
    converged: np.ndarray
    elapsed: float
    truth_used: np.ndarray

    @property
    def failures(self) -> int:
        return int((~self.converged).sum())

    @property
    def warning(self):
        frac = self.failures / self.design.reps
        if frac > 0.05:
            return f"{self.failures} of {self.design.reps} replicates failed to fit"
        return None

    def stat_column(self, stat: str) -> np.ndarray:
        return self.values[:, list(self.design.statistics).index(stat)]

    def valid_count(self, stat: str) -> int:
        return int(np.isfinite(self.stat_column(stat)).sum())

    def rejection_rate(self, stat: str, alpha: float, critical=None):
        """(rate, rejections, valid) against the normal or a supplied critical value."""
        vals = self.stat_column(stat)
        vals = vals[np.isfinite(vals)]
        direction = self.design.hypothesis.direction
        if critical is None:
            critical = float(special.ndtri(1.0 - alpha)) if direction is Direction.GREATER \
                else float(special.ndtri(alpha))
        if direction is Direction.GREATER:
            rej = int((vals > critical).sum())
        else:
            rej = int((vals < critical).sum())
        valid = vals.size
        rate = rej / valid if valid else math.nan
        return rate, rej, valid

    def size_rows(self) -> list[dict]:
        rows = []
        for stat in self.design.statistics:
            for alpha in self.design.alphas:
                rate, rej, valid = self.rejection_rate(stat, alpha)
                se = math.sqrt(rate * (1 - rate) / valid) if valid else math.nan
                rows.append({"statistic": stat, "alpha": alpha, "rate": rate,
                             "mc_se": se, "rejections": rej, "valid": valid,
                             "failures": self.failures})
        return rows


def type1_quantile(sorted_values: np.ndarray, q: float) -> float:
    """Inverse empirical CDF (type-1): the ceil(Nq)-th order statistic."""
    n = sorted_values.shape[0]
    idx = min(max(int(math.ceil(q * n)) - 1, 0), n - 1)
    return float(sorted_values[idx])


# --------------------------------------------------------------------------
# replicate execution
# --------------------------------------------------------------------------

def _replicate_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=(stream, index)))


def _run_range(design: SimDesign, truth, stream: int, lo: int, hi: int):
    """Run replicates [lo, hi); returns (values, converged) for the range."""
    stats = design.statistics
    values = np.full((hi - lo, len(stats)), np.nan)
    converged = np.zeros(hi - lo, dtype=bool)
    truth = np.asarray(truth, dtype=float)
    base_data = design.build_data()
    prep0 = prepare(design.model, base_data)
    c0 = prep0._components(truth)
    mu_max, sigma = c0["mu"], c0["sigma"]
    tail = design.model.tail
    for i in range(lo, hi):
        rng = _replicate_rng(design.seed, stream, i)
        if design.redraw_covariates:
            data_i = Dataset(response=np.zeros(design.n),
                             covariates=design.draw_covariates(rng))
            prep_base = prepare(design.model, data_i)
            ci = prep_base._components(truth)
            mu_i, sig_i = ci["mu"], ci["sigma"]
        else:
            prep_base, mu_i, sig_i = prep0, mu_max, sigma
        y_max = evd.sample(rng, GumbelParams(mu=mu_i, sigma=sig_i, tail=Tail.MAX),
                           size=design.n)
        y = -y_max if tail is Tail.MIN else y_max
        data = Dataset(response=y, covariates=prep_base.data.covariates)
        try:
            report = run_tests(design.model, data, design.hypothesis, which=stats,
                               prepared=prep_base.with_response(y))
        except EvregError:
            continue
        converged[i - lo] = True
        for j, s in enumerate(stats):
            v = report.R if s == "R" else report.adjusted.get(s, math.nan)
            values[i - lo, j] = v
    return values, converged


def _chunk_worker(args):
    design, truth, stream, lo, hi = args
    return lo, _run_range(design, truth, stream, lo, hi)


def _run_study(design: SimDesign, truth, stream: int, reps: int, threads: int) -> SimResult:
    start = time.perf_counter()
    stats = design.statistics
    values = np.full((reps, len(stats)), np.nan)
    converged = np.zeros(reps, dtype=bool)
    if threads <= 1:
        vals, conv = _run_range(design, truth, stream, 0, reps)
        values[:], converged[:] = vals, conv
    else:
        n_chunks = min(reps, threads * 8)
        bounds = np.linspace(0, reps, n_chunks + 1).astype(int)
        jobs = [(design, truth, stream, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for lo, (vals, conv) in pool.map(_chunk_worker, jobs):
                values[lo:lo + vals.shape[0]] = vals
                converged[lo:lo + conv.shape[0]] = conv
    return SimResult(design=design, values=values, converged=converged,
                     elapsed=time.perf_counter() - start,
                     truth_used=np.asarray(truth, dtype=float))


# --------------------------------------------------------------------------
# studies
# --------------------------------------------------------------------------

def run_size(design: SimDesign, threads: int = 1) -> SimResult:
    """Null rejection rates of each statistic against normal critical values."""
    return _run_study(design, design.truth, stream=0, reps=design.reps, threads=threads)


def exact_critical_values(design: SimDesign, reps: int | None = None,
                          threads: int = 1, result: SimResult | None = None):
    """Empirical null quantiles that make each test exactly size alpha.

    Returns (critical values {stat: {alpha: cv}}, the underlying null run).
    """
    if result is None:
        reps = design.crit_reps if reps is None else reps
        result = _run_study(design, design.truth, stream=0, reps=reps, threads=threads)
    direction = design.hypothesis.direction
    out = {}
    for stat in design.statistics:
        vals = result.stat_column(stat)
        vals = np.sort(vals[np.isfinite(vals)])
        if vals.size == 0:
            raise EvregError(f"no valid null replicates for {stat}")
        out[stat] = {}
        for alpha in design.alphas:
            q = 1.0 - alpha if direction is Direction.GREATER else alpha
            out[stat][alpha] = type1_quantile(vals, q)
    return out, result


def run_power(design: SimDesign, epsilon_grid, critical_values,
              threads: int = 1) -> dict:
    """Rejection rates at truth shifted by each epsilon on the interest parameter.

    ``critical_values`` must come from :func:`exact_critical_values`, so that
    epsilon = 0 recovers the nominal level by construction.
    """
    rows = []
    runs = {}
    for e_idx, eps in enumerate(epsilon_grid):
        truth = design.truth.copy()
        truth[design.hypothesis.param] += eps
        res = _run_study(design, truth, stream=1 + e_idx, reps=design.reps,
                         threads=threads)
        runs[eps] = res
        for stat in design.statistics:
            for alpha in design.alphas:
                cv = critical_values[stat][alpha]
                rate, rej, valid = res.rejection_rate(stat, alpha, critical=cv)
                rows.append({"statistic": stat, "alpha": alpha, "epsilon": eps,
                             "rate": rate, "rejections": rej, "valid": valid,
                             "critical_value": cv, "failures": res.failures})
    return {"rows": rows, "runs": runs}


DISCREPANCY_GRID = np.linspace(0.001, 0.25, 250)


def discrepancy_curve(values: np.ndarray, direction: Direction,
                      grid=DISCREPANCY_GRID) -> np.ndarray:
    """Relative p-value discrepancy (empirical - asymptotic)/asymptotic.

    The empirical p at a grid point is the fraction of null statistic draws
    at least as extreme as the normal quantile with that asymptotic p.
    """
    vals = values[np.isfinite(values)]
    out = np.empty(len(grid))
    for i, p in enumerate(grid):
        if direction is Direction.GREATER:
            thr = special.ndtri(1.0 - p)
            emp = float((vals >= thr).mean())
        else:
            thr = special.ndtri(p)
            emp = float((vals <= thr).mean())
        out[i] = (emp - p) / p
    return out


def pvalue_discrepancy(design: SimDesign, threads: int = 1, grid=DISCREPANCY_GRID):
    """Null-run discrepancy curves per statistic on the asymptotic-p grid."""
    result = run_size(design, threads=threads)
    curves = {stat: discrepancy_curve(result.stat_column(stat),
                                      design.hypothesis.direction, grid)
              for stat in design.statistics}
    return {"grid": np.asarray(grid, dtype=float), "curves": curves, "run": result}


# --------------------------------------------------------------------------
# design files
# --------------------------------------------------------------------------

_COV_RE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*~\s*uniform\(\s*([^,]+)\s*,\s*([^)]+)\s*\)\s*$")


def parse_design(text: str) -> SimDesign:
    """Parse the key = value design format (# starts a comment)."""
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"design line {lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        kv[key.strip()] = val.strip()

    def need(key):
        if key not in kv:
            raise DataError(f"design file is missing required key {key!r}")
        return kv[key]

    def floats(s):
        return tuple(float(v) for v in s.split(",") if v.strip())

    tail = Tail(need("family").lower())
    model = ModelSpec(tail=tail,
                      location=parse_formula(need("location")),
                      dispersion=parse_formula(need("dispersion")),
                      dispersion_link=kv.get("dispersion_link", "log"))
    covs = []
    for part in need("covariates").split(";"):
        if not part.strip():
            continue
        m = _COV_RE.match(part)
        if not m:
            raise DataError(f"bad covariate spec {part.strip()!r}; "
                            "expected 'name ~ uniform(a, b)'")
        covs.append((m.group(1), float(m.group(2)), float(m.group(3))))
    hyp = HypothesisSpec(param=model.param_index(need("param")),
                         null_value=float(need("null")),
                         direction=Direction(need("direction").lower()))
    stats = tuple(s.strip() for s in kv.get("statistics", ",".join(STATISTICS)).split(",")
                  if s.strip())
    return SimDesign(
        model=model,
        truth=np.array(floats(need("truth"))),
        covariates=tuple(covs),
        covariate_seed=int(kv.get("covariate_seed", 0)),
        n=int(need("n")),
        reps=int(kv.get("reps", 10_000)),
        hypothesis=hyp,
        alphas=floats(kv.get("alphas", "0.10, 0.05, 0.01")),
        statistics=stats,
        seed=int(kv.get("seed", 0)),
        name=kv.get("name", "design"),
        epsilons=floats(kv.get("epsilons", "")),
        crit_reps=int(kv.get("crit_reps", 100_000)),
        redraw_covariates=kv.get("redraw_covariates", "false").lower()
        in ("1", "true", "yes"),
    )


def load_design(path) -> SimDesign:
    with open(path) as fh:
        return parse_design(fh.read())
