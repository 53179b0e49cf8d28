"""
Monte-Carlo harness: batches of independent runs, per-time-step quantiles of
ln(sigma_t/sigma_0), rate and variance estimates against the closed forms, and
closed-form relative-std sweeps.

Run r of a batch always draws from substream(seed, r), and every reduction
walks the runs in index order, so results do not depend on the worker count.
"""
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from es_core import simulate_run
from mathutils import substream
from params import AlgorithmParams
from rates import log_step_variance, path_fourth_moment_limit, path_second_moment_limit, rate_no_cumulation, \
    rate_with_cumulation, rel_std_by_c, rel_std_curve

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (1e-4, 1e-3, 1e-2, 1e-1, 0.5, 0.9, 0.99, 0.999, 0.9999)
# Matrix entries (float64) a batch may hold in memory
DEFAULT_MEMORY_BUDGET = 30_000_000
DEFAULT_RESERVOIR = 1000

# Stream keys separating experiments that share a seed
MAIN_STREAM = 0
INCREMENT_STREAM = 1
FULL_MODE_STREAM = 2
RESERVOIR_STREAM = 3
PATH_STREAM = 4


class MemoryBudgetError(MemoryError):
    """Raised when a batch would not fit the configured memory budget"""

    def __init__(self, entries, budget):
        super().__init__(
            "batch needs {} matrix entries, budget is {}; use run_streaming".format(entries, budget)
        )
        self.entries = entries
        self.budget = budget


@dataclass
class TrajectoryBatch:
    """
    Trajectories of independent runs

    Attributes:
        params: AlgorithmParams
        runs: int - Number of runs
        steps: int - Iterations per run
        log_sigma: numpy array [runs, steps + 1] - ln(sigma_t / sigma_0)
        log_absx: numpy array [runs, steps + 1] or None - ln|x_{t,1} / x_{0,1}|
        mode: str - Sampling mode used
    """
    params: AlgorithmParams
    runs: int
    steps: int
    log_sigma: np.ndarray
    log_absx: np.ndarray = None
    mode: str = "marginal"


@dataclass
class QuantileTable:
    """
    Per-time-step empirical quantiles

    Attributes:
        levels: numpy array [L] - Increasing probabilities in (0, 1)
        values: numpy array [L, steps + 1] - Quantile of each level at each t
    """
    levels: np.ndarray
    values: np.ndarray

    def to_frame(self):
        """Long format with columns t, level, value (t-major)"""
        steps_plus_one = self.values.shape[1]
        return pd.DataFrame({
            "t": np.repeat(np.arange(steps_plus_one), len(self.levels)),
            "level": np.tile(self.levels, steps_plus_one),
            "value": self.values.T.ravel(),
        })


@dataclass(frozen=True)
class RateEstimate:
    mean_slope: float
    std_error: float
    theoretical: float
    z_score: float
    runs_used: int
    burn_in: int = 0


@dataclass(frozen=True)
class VarianceEstimate:
    empirical: float
    theoretical: float
    increment_mean: float
    increment_mean_se: float
    samples: int

    @property
    def relative_error(self):
        return abs(self.empirical - self.theoretical) / self.theoretical


@dataclass(frozen=True)
class PathMomentEstimate:
    second_moment: float
    fourth_moment: float
    theoretical_second: float
    theoretical_fourth: float
    other_mean: float
    other_mean_se: float
    other_variance: float
    samples: int

    @property
    def second_relative_error(self):
        return abs(self.second_moment - self.theoretical_second) / self.theoretical_second

    @property
    def fourth_relative_error(self):
        return abs(self.fourth_moment - self.theoretical_fourth) / self.theoretical_fourth


@dataclass(frozen=True)
class AgreementCheck:
    """Two independent estimates of one quantity"""
    first: float
    second: float
    combined_se: float

    @property
    def z_score(self):
        return (self.first - self.second) / self.combined_se


@dataclass(frozen=True)
class IncrementLawCheck:
    ks_statistic: float
    p_value: float
    mean: float
    mean_se: float
    variance: float
    expected_variance: float


@dataclass
class StreamingSummary:
    quantiles: QuantileTable
    rate: RateEstimate
    reservoir_runs: int


def _simulate_chunk(params, steps, start, stop, mode, record_x, stream):
    log_sigma = np.empty((stop - start, steps + 1))
    log_absx = np.empty((stop - start, steps + 1)) if record_x else None
    for row, run_index in enumerate(range(start, stop)):
        record = simulate_run(params, steps, substream(params.seed, run_index, stream), mode=mode, record_x=record_x)
        log_sigma[row] = record.log_sigma
        if record_x:
            log_absx[row] = record.log_absx
    return log_sigma, log_absx


def _chunks(start, stop, workers):
    count = max(1, min(stop - start, 4 * workers))
    edges = np.linspace(start, stop, count + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _map_chunks(params, steps, chunks, mode, record_x, stream, workers):
    args = [(params, steps, a, b, mode, record_x, stream) for a, b in chunks]
    if workers <= 1:
        for index, arg in enumerate(args):
            yield _simulate_chunk(*arg)
            logger.info("Progress: %d/%d chunks", index + 1, len(args))
        return
    with ProcessPoolExecutor(max_workers=workers) as executor:
        # map keeps submission order, which is run order
        for index, result in enumerate(executor.map(_simulate_chunk, *zip(*args))):
            yield result
            logger.info("Progress: %d/%d chunks", index + 1, len(args))


def run_batch(params, runs, steps, record_x=False, mode="marginal", workers=1,
              memory_budget=DEFAULT_MEMORY_BUDGET, stream=MAIN_STREAM):
    """
    Simulate independent runs and keep every trajectory

    Args:
        params: AlgorithmParams
        runs: int - Number of runs (>= 1)
        steps: int - Iterations per run (>= 1)
        record_x: bool - Also keep ln|x_{t,1} / x_{0,1}|
        mode: "marginal" or "full" selected-step sampling
        workers: int - Worker processes (1 = in-process)
        memory_budget: int - Largest number of matrix entries to hold
        stream: int - Substream key (experiments sharing a seed use distinct keys)

    Returns:
        TrajectoryBatch

    Raises:
        MemoryBudgetError: the matrices would exceed memory_budget
    """
    if runs < 1 or steps < 1:
        raise ValueError("runs and steps must be >= 1, got {} and {}".format(runs, steps))
    entries = runs * (steps + 1) * (2 if record_x else 1)
    if entries > memory_budget:
        raise MemoryBudgetError(entries, memory_budget)

    logger.info("Simulating %d runs x %d steps (lambda=%d, n=%d, c=%.6g, %s mode)",
                runs, steps, params.lam, params.n, params.c, mode)
    log_sigma = np.empty((runs, steps + 1))
    log_absx = np.empty((runs, steps + 1)) if record_x else None
    chunks = _chunks(0, runs, workers)
    for (a, b), (chunk_sigma, chunk_x) in zip(chunks, _map_chunks(params, steps, chunks, mode, record_x, stream, workers)):
        log_sigma[a:b] = chunk_sigma
        if record_x:
            log_absx[a:b] = chunk_x
    return TrajectoryBatch(params=params, runs=runs, steps=steps, log_sigma=log_sigma, log_absx=log_absx, mode=mode)


def _check_levels(levels):
    levels = np.sort(np.asarray(levels, dtype=float))
    if levels.size == 0 or np.any(levels <= 0.0) or np.any(levels >= 1.0):
        raise ValueError("quantile levels must lie in (0, 1), got {}".format(levels.tolist()))
    return levels


def quantiles(batch, levels=DEFAULT_LEVELS):
    """
    Empirical quantiles of ln(sigma_t / sigma_0) across runs at every t

    Interpolates linearly between adjacent order statistics, so extreme levels
    on a few thousand runs fall between the two smallest (largest) samples.
    """
    levels = _check_levels(levels)
    values = np.quantile(batch.log_sigma, levels, axis=0, method="linear")
    return QuantileTable(levels=levels, values=values)


def _slope_estimate(start, end, span, theoretical, burn_in):
    mask = np.isfinite(start) & np.isfinite(end)
    slopes = (end[mask] - start[mask]) / span
    runs_used = int(slopes.size)
    mean = float(np.mean(slopes)) if runs_used else math.nan
    std_error = float(np.std(slopes, ddof=1) / math.sqrt(runs_used)) if runs_used > 1 else math.nan
    z_score = (mean - theoretical) / std_error if std_error > 0 else math.nan
    return RateEstimate(mean_slope=mean, std_error=std_error, theoretical=theoretical, z_score=z_score,
                        runs_used=runs_used, burn_in=burn_in)


def _resolve_burn_in(burn_in, default, steps):
    burn_in = default if burn_in is None else int(burn_in)
    if not 0 <= burn_in < steps:
        raise ValueError("burn-in {} must be in [0, steps={})".format(burn_in, steps))
    return burn_in


def estimate_rate(batch, burn_in=None):
    """
    Slope of ln(sigma_t / sigma_0) against rate_with_cumulation

    Each run contributes (ln sigma_T - ln sigma_B) / (T - B). B defaults to
    ceil(10/c) for c < 1, which removes the bias of the path transient, and to
    0 at c = 1, where the statistic is ln(sigma_T / sigma_0) / T.
    """
    params = batch.params
    burn_in = _resolve_burn_in(burn_in, params.default_burn_in(), batch.steps)
    return _slope_estimate(batch.log_sigma[:, burn_in], batch.log_sigma[:, batch.steps], batch.steps - burn_in,
                           rate_with_cumulation(params), burn_in)


def estimate_x_rate(batch, burn_in=None):
    """
    Slope of ln|x_{t,1} / x_{0,1}| against rate_no_cumulation (c = 1 only)

    ln|x_{t+1,1} - x_{0,1}| = ln sigma_t + ln|Z_t|; B defaults to steps // 4 so
    that ln|Z| is near stationarity at both ends and cancels in the difference.
    Runs whose x hit exactly 0 are excluded.
    """
    params = batch.params
    if params.c != 1.0:
        raise ValueError("x-divergence rate is only defined without cumulation (c = 1), got c = {}".format(params.c))
    if batch.log_absx is None:
        raise ValueError("batch was simulated without record_x")
    burn_in = _resolve_burn_in(burn_in, batch.steps // 4, batch.steps)
    return _slope_estimate(batch.log_absx[:, burn_in], batch.log_absx[:, batch.steps], batch.steps - burn_in,
                           rate_no_cumulation(params), burn_in)


def _runs_for(samples, per_run_cap=20_000):
    runs = max(10, math.ceil(samples / per_run_cap))
    return runs, math.ceil(samples / runs)


def estimate_step_variance(params, burn_in=None, samples=100_000, mode="marginal", stream=INCREMENT_STREAM):
    """
    Empirical stationary variance of ln(sigma_{t+1} / sigma_t) against the closed form

    Increments after burn_in are pooled across at least ten runs.

    Args:
        params: AlgorithmParams
        burn_in: int - Discarded iterations per run, >= 10/c (default ceil(10/c))
        samples: int - Pooled increments (>= 1e5)

    Returns:
        VarianceEstimate
    """
    minimum_burn_in = params.default_burn_in()
    burn_in = minimum_burn_in if burn_in is None else int(burn_in)
    if burn_in < minimum_burn_in:
        raise ValueError("burn-in must be >= 10/c = {}, got {}".format(minimum_burn_in, burn_in))
    if samples < 100_000:
        raise ValueError("samples must be >= 1e5, got {}".format(samples))

    runs, per_run = _runs_for(samples)
    increments = np.empty((runs, per_run))
    for run_index in range(runs):
        record = simulate_run(params, burn_in + per_run, substream(params.seed, run_index, stream), mode=mode)
        increments[run_index] = np.diff(record.log_sigma)[burn_in:]

    run_means = increments.mean(axis=1)
    return VarianceEstimate(
        empirical=float(np.var(increments, ddof=1)),
        theoretical=log_step_variance(params).variance,
        increment_mean=float(run_means.mean()),
        increment_mean_se=float(np.std(run_means, ddof=1) / math.sqrt(runs)),
        samples=increments.size,
    )


def estimate_path_moments(params, burn_in=None, samples=1_000_000, mode="marginal"):
    """
    Empirical stationary E[p_1^2], E[p_1^4] and moments of an unselected
    coordinate, against the closed-form limits and N(0, 1)
    """
    if params.n < 2:
        raise ValueError("need n >= 2 to look at an unselected coordinate")
    burn_in = params.default_burn_in() if burn_in is None else int(burn_in)
    runs, per_run = _runs_for(samples)
    first = np.empty((runs, per_run))
    other = np.empty((runs, per_run))
    for run_index in range(runs):
        record = simulate_run(params, burn_in + per_run, substream(params.seed, run_index, PATH_STREAM),
                              mode=mode, record_path=True)
        first[run_index] = record.path[burn_in + 1:, 0]
        other[run_index] = record.path[burn_in + 1:, 1]

    other_run_means = other.mean(axis=1)
    return PathMomentEstimate(
        second_moment=float(np.mean(first ** 2)),
        fourth_moment=float(np.mean(first ** 4)),
        theoretical_second=path_second_moment_limit(params.lam, params.c),
        theoretical_fourth=path_fourth_moment_limit(params.lam, params.c).fourth_moment_limit,
        other_mean=float(other.mean()),
        other_mean_se=float(np.std(other_run_means, ddof=1) / math.sqrt(runs)),
        other_variance=float(np.var(other, ddof=1)),
        samples=first.size,
    )


def cesaro_consistency(params, runs, steps, samples=100_000, mode="marginal"):
    """
    Endpoint slope of ln sigma and the mean of stationary one-step increments,
    from independent streams; both estimate the same limit
    """
    rate = estimate_rate(run_batch(params, runs, steps, mode=mode))
    increments = estimate_step_variance(params, samples=samples, mode=mode)
    combined = math.sqrt(rate.std_error ** 2 + increments.increment_mean_se ** 2)
    return AgreementCheck(first=rate.mean_slope, second=increments.increment_mean, combined_se=combined)


def compare_sampling_modes(params, runs, steps):
    """Rate estimates from marginal and full sampling (independent streams)"""
    marginal = estimate_rate(run_batch(params, runs, steps, mode="marginal"))
    full = estimate_rate(run_batch(params, runs, steps, mode="full", stream=FULL_MODE_STREAM))
    combined = math.sqrt(marginal.std_error ** 2 + full.std_error ** 2)
    return AgreementCheck(first=marginal.mean_slope, second=full.mean_slope, combined_se=combined)


def random_walk_increment_check(params, samples=100_000):
    """
    For lambda = 1 without cumulation the increment is (1/(2 d_sigma))(chi2_n/n - 1):
    Kolmogorov-Smirnov test of n(2 d_sigma W + 1) against chi2_n, plus the mean
    and variance (0 and 1/(2 d_sigma^2 n))
    """
    if params.lam != 1 or params.c != 1.0:
        raise ValueError("increment law is chi-square only for lambda = 1, c = 1")
    record = simulate_run(params, samples, substream(params.seed, 0, INCREMENT_STREAM))
    increments = np.diff(record.log_sigma)
    chi_square = params.n * (2.0 * params.d_sigma * increments + 1.0)
    ks = stats.kstest(chi_square, stats.chi2(df=params.n).cdf)
    return IncrementLawCheck(
        ks_statistic=float(ks.statistic),
        p_value=float(ks.pvalue),
        mean=float(increments.mean()),
        mean_se=float(increments.std(ddof=1) / math.sqrt(samples)),
        variance=float(increments.var(ddof=1)),
        expected_variance=1.0 / (2.0 * params.d_sigma ** 2 * params.n),
    )


def run_streaming(params, runs, steps, levels=DEFAULT_LEVELS, reservoir=DEFAULT_RESERVOIR, mode="marginal",
                  workers=1, memory_budget=DEFAULT_MEMORY_BUDGET, burn_in=None):
    """
    Batch aggregation that never holds all trajectories

    Endpoint slopes are kept for every run (exact rate estimate); quantiles come
    from a reservoir of whole trajectories chosen by a seeded reservoir sample
    over runs in index order.
    """
    levels = _check_levels(levels)
    reservoir = min(reservoir, runs)
    if reservoir * (steps + 1) > memory_budget:
        raise MemoryBudgetError(reservoir * (steps + 1), memory_budget)
    burn_in = _resolve_burn_in(burn_in, params.default_burn_in(), steps)

    kept = np.empty((reservoir, steps + 1))
    start_values = np.empty(runs)
    end_values = np.empty(runs)
    chooser = substream(params.seed, 0, RESERVOIR_STREAM)

    runs_per_chunk = max(1, min(runs, memory_budget // (2 * (steps + 1))))
    outer = [(a, min(a + runs_per_chunk, runs)) for a in range(0, runs, runs_per_chunk)]
    for a, b in outer:
        inner = _chunks(a, b, workers)
        for (c0, c1), (chunk_sigma, _) in zip(inner, _map_chunks(params, steps, inner, mode, False, MAIN_STREAM, workers)):
            start_values[c0:c1] = chunk_sigma[:, burn_in]
            end_values[c0:c1] = chunk_sigma[:, steps]
            for offset, run_index in enumerate(range(c0, c1)):
                if run_index < reservoir:
                    kept[run_index] = chunk_sigma[offset]
                else:
                    slot = int(chooser.integers(0, run_index + 1))
                    if slot < reservoir:
                        kept[slot] = chunk_sigma[offset]

    table = QuantileTable(levels=levels, values=np.quantile(kept, levels, axis=0, method="linear"))
    rate = _slope_estimate(start_values, end_values, steps - burn_in, rate_with_cumulation(params), burn_in)
    return StreamingSummary(quantiles=table, rate=rate, reservoir_runs=reservoir)


def figure2_sweep(lam, d_sigma, policies, n_grid):
    """
    Closed-form relative standard deviation per policy along n_grid

    Returns:
        pandas DataFrame with columns policy, n, rel_std (inf where the rate is zero)
    """
    rows = []
    for policy in policies:
        for n, rel_std in rel_std_curve(lam, d_sigma, policy, n_grid):
            rows.append({"policy": policy.label, "n": n, "rel_std": rel_std})
    return pd.DataFrame(rows, columns=["policy", "n", "rel_std"])


def c_sweep(lam, d_sigma, n_values, c_grid):
    """Relative standard deviation against c, one curve per dimension"""
    rows = []
    for n in n_values:
        for c, rel_std in rel_std_by_c(lam, d_sigma, n, c_grid):
            rows.append({"n": int(n), "c": c, "rel_std": rel_std})
    return pd.DataFrame(rows, columns=["n", "c", "rel_std"])


def loglog_slope(frame, n_min, n_max):
    """Least-squares slope of ln(rel_std) against ln(n) on [n_min, n_max]"""
    window = frame[(frame["n"] >= n_min) & (frame["n"] <= n_max)]
    return float(stats.linregress(np.log(window["n"]), np.log(window["rel_std"])).slope)


def _plain(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def frame_to_csv(frame):
    """CSV text with 17 significant digits; infinite values written as inf"""
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def records_to_json(records):
    """JSON text for a dict or a list of dicts; floats keep their exact repr, inf becomes "inf" """
    if isinstance(records, dict):
        payload = {key: _plain(value) for key, value in records.items()}
    else:
        payload = [{key: _plain(value) for key, value in row.items()} for row in records]
    return json.dumps(payload, indent=2) + "\n"
