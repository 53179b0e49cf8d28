import json
import math

import numpy as np
import pandas as pd
import pytest

from experiments import DEFAULT_LEVELS, MemoryBudgetError, QuantileTable, TrajectoryBatch, c_sweep, \
    cesaro_consistency, compare_sampling_modes, estimate_path_moments, estimate_rate, estimate_step_variance, \
    estimate_x_rate, figure2_sweep, frame_to_csv, loglog_slope, quantiles, random_walk_increment_check, \
    records_to_json, run_batch, run_streaming
from order_stats import min_moment
from params import AlgorithmParams
from policies import FIGURE2_POLICIES, ConstantPolicy, PowerPolicy, parse_policy
from rates import log_grid, rate_no_cumulation


def make_params(lam, n, c, seed=0):
    return AlgorithmParams(lam=lam, n=n, c=c, d_sigma=1.0, seed=seed)


def test_run_batch_shape_and_start():
    batch = run_batch(make_params(8, 20, 0.3), runs=5, steps=30, record_x=True)
    assert batch.log_sigma.shape == (5, 31)
    assert batch.log_absx.shape == (5, 31)
    np.testing.assert_array_equal(batch.log_sigma[:, 0], 0.0)
    np.testing.assert_array_equal(batch.log_absx[:, 0], 0.0)


def test_run_batch_is_deterministic():
    p = make_params(8, 20, 0.3, seed=4)
    np.testing.assert_array_equal(run_batch(p, 6, 40).log_sigma, run_batch(p, 6, 40).log_sigma)


def test_run_batch_independent_of_workers():
    p = make_params(8, 20, 0.3, seed=4)
    np.testing.assert_array_equal(run_batch(p, 9, 40, workers=1).log_sigma, run_batch(p, 9, 40, workers=3).log_sigma)


def test_run_batch_random_walk_one_step():
    p = make_params(1, 20, 1.0, seed=2)
    batch = run_batch(p, runs=2, steps=1)
    for row in batch.log_sigma:
        assert row[0] == 0.0
        assert -0.5 < row[1]
    assert batch.log_sigma[0, 1] != batch.log_sigma[1, 1]


def test_run_batch_memory_budget():
    with pytest.raises(MemoryBudgetError) as excinfo:
        run_batch(make_params(8, 20, 0.3), runs=100, steps=100, memory_budget=1000)
    assert excinfo.value.entries == 100 * 101
    assert isinstance(excinfo.value, MemoryError)


def test_run_batch_rejects_empty():
    with pytest.raises(ValueError):
        run_batch(make_params(8, 20, 0.3), runs=0, steps=10)


def test_quantiles_of_two_runs():
    log_sigma = np.array([[0.0, 1.0, 3.0], [0.0, -1.0, 5.0]])
    batch = TrajectoryBatch(params=make_params(8, 20, 0.3), runs=2, steps=2, log_sigma=log_sigma)
    table = quantiles(batch, [0.5])
    np.testing.assert_allclose(table.values[0], log_sigma.mean(axis=0))


def test_quantiles_single_run_levels_coincide():
    batch = run_batch(make_params(8, 20, 0.3), runs=1, steps=20)
    table = quantiles(batch)
    for row in table.values:
        np.testing.assert_array_equal(row, batch.log_sigma[0])


def test_quantile_rows_are_monotone():
    table = quantiles(run_batch(make_params(8, 20, 0.3, seed=1), runs=50, steps=30))
    assert np.all(np.diff(table.values, axis=0) >= 0.0)


def test_quantiles_reject_bad_levels():
    batch = run_batch(make_params(8, 20, 0.3), runs=3, steps=3)
    with pytest.raises(ValueError):
        quantiles(batch, [0.0, 0.5])
    with pytest.raises(ValueError):
        quantiles(batch, [1.2])


def test_quantile_frame_layout():
    table = QuantileTable(levels=np.array([0.1, 0.9]), values=np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
    frame = table.to_frame()
    assert list(frame.columns) == ["t", "level", "value"]
    assert frame["t"].tolist() == [0, 0, 1, 1, 2, 2]
    assert frame["value"].tolist() == [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]


@pytest.mark.slow
def test_rate_without_cumulation():
    estimate = estimate_rate(run_batch(make_params(8, 20, 1.0, seed=1), runs=400, steps=1000))
    assert estimate.burn_in == 0
    assert abs(estimate.z_score) <= 4


@pytest.mark.slow
def test_rate_random_walk_lambda_2():
    estimate = estimate_rate(run_batch(make_params(2, 20, 1.0, seed=2), runs=400, steps=1000))
    assert abs(estimate.mean_slope) <= 4 * estimate.std_error


@pytest.mark.slow
def test_rate_with_cumulation_lambda_2():
    estimate = estimate_rate(run_batch(make_params(2, 20, 0.5, seed=3), runs=400, steps=1500))
    assert estimate.theoretical == pytest.approx(0.5 / (20 * math.pi), abs=1e-10)
    assert estimate.burn_in == 20
    assert abs(estimate.z_score) <= 4


def test_rate_burn_in_bounds():
    batch = run_batch(make_params(8, 20, 0.3), runs=3, steps=10)
    with pytest.raises(ValueError):
        estimate_rate(batch, burn_in=10)


@pytest.mark.slow
@pytest.mark.parametrize('lam, n', [(8, 20), (3, 5)])
def test_x_rate_follows_sigma_rate(lam, n):
    estimate = estimate_x_rate(run_batch(make_params(lam, n, 1.0, seed=5), runs=400, steps=1000, record_x=True))
    assert estimate.theoretical > 0.0
    assert abs(estimate.z_score) <= 4


@pytest.mark.slow
def test_x_rate_small_without_sigma_drift():
    slow = estimate_x_rate(run_batch(make_params(2, 20, 1.0, seed=6), runs=400, steps=1000, record_x=True))
    assert abs(slow.mean_slope) < 0.5 * rate_no_cumulation(make_params(8, 20, 1.0))


def test_x_rate_requires_no_cumulation():
    batch = run_batch(make_params(8, 20, 0.5), runs=3, steps=10, record_x=True)
    with pytest.raises(ValueError):
        estimate_x_rate(batch)
    with pytest.raises(ValueError):
        estimate_x_rate(run_batch(make_params(8, 20, 1.0), runs=3, steps=10))


@pytest.mark.slow
def test_step_variance_random_walk():
    estimate = estimate_step_variance(make_params(1, 20, 1.0, seed=7))
    assert estimate.theoretical == pytest.approx(0.025, abs=1e-12)
    assert estimate.relative_error <= 0.05
    assert estimate.samples >= 100_000


@pytest.mark.slow
@pytest.mark.parametrize('c', [1.0, 1.0 / math.sqrt(20.0)])
def test_step_variance_lambda_8(c):
    assert estimate_step_variance(make_params(8, 20, c, seed=8)).relative_error <= 0.05


def test_step_variance_preconditions():
    with pytest.raises(ValueError):
        estimate_step_variance(make_params(8, 20, 0.5), samples=1000)
    with pytest.raises(ValueError):
        estimate_step_variance(make_params(8, 20, 0.5), burn_in=5)


@pytest.mark.slow
def test_path_moments():
    estimate = estimate_path_moments(make_params(8, 20, 1.0 / math.sqrt(20.0), seed=9), samples=400_000)
    assert estimate.second_relative_error <= 0.02
    assert estimate.fourth_relative_error <= 0.02
    assert abs(estimate.other_mean) <= 4 * estimate.other_mean_se
    assert estimate.other_variance == pytest.approx(1.0, rel=0.02)


@pytest.mark.slow
def test_cesaro_consistency():
    check = cesaro_consistency(make_params(8, 20, 1.0 / math.sqrt(20.0), seed=10), runs=200, steps=1000)
    assert abs(check.z_score) <= 4


@pytest.mark.slow
def test_sampling_modes_agree():
    check = compare_sampling_modes(make_params(8, 20, 1.0 / math.sqrt(20.0), seed=11), runs=200, steps=500)
    assert abs(check.z_score) <= 4


@pytest.mark.slow
def test_random_walk_increment_law():
    check = random_walk_increment_check(make_params(1, 20, 1.0, seed=12))
    assert abs(check.mean) <= 4 * check.mean_se
    assert check.variance == pytest.approx(check.expected_variance, rel=0.05)
    assert check.p_value > 1e-4


def test_random_walk_increment_law_needs_lambda_1():
    with pytest.raises(ValueError):
        random_walk_increment_check(make_params(2, 20, 1.0))


def test_streaming_matches_full_batch_when_reservoir_holds_all():
    p = make_params(8, 20, 0.5, seed=13)
    batch = run_batch(p, runs=12, steps=25)
    summary = run_streaming(p, runs=12, steps=25, reservoir=12, memory_budget=400)
    assert summary.reservoir_runs == 12
    np.testing.assert_allclose(summary.quantiles.values, quantiles(batch).values)
    assert summary.rate.mean_slope == pytest.approx(estimate_rate(batch).mean_slope, rel=1e-12)


def test_streaming_reservoir_is_deterministic():
    p = make_params(8, 20, 0.5, seed=14)
    first = run_streaming(p, runs=30, steps=25, reservoir=5, memory_budget=300)
    second = run_streaming(p, runs=30, steps=25, reservoir=5, memory_budget=300, workers=2)
    np.testing.assert_array_equal(first.quantiles.values, second.quantiles.values)
    assert first.reservoir_runs == 5


def test_streaming_reservoir_must_fit():
    with pytest.raises(MemoryBudgetError):
        run_streaming(make_params(8, 20, 0.3), runs=30, steps=20, reservoir=10, memory_budget=100)


def test_figure2_sweep_layout():
    frame = figure2_sweep(8, 1.0, [parse_policy(text) for text in FIGURE2_POLICIES], log_grid(2, 1000, 10))
    assert list(frame.columns) == ["policy", "n", "rel_std"]
    assert frame["policy"].unique().tolist() == ["constant:1", "constant:0.5", "constant:0.2", "alpha:0.25",
                                                 "alpha:0.333333", "alpha:0.5", "alpha:1"]
    assert np.all(np.isfinite(frame["rel_std"]))


def test_figure2_scaling_regimes():
    grid = log_grid(10_000, 1_000_000, 25)
    constant = figure2_sweep(8, 1.0, [ConstantPolicy(1.0)], grid)
    assert loglog_slope(constant, 10_000, 1_000_000) == pytest.approx(0.5, abs=0.02)
    quarter = figure2_sweep(8, 1.0, [PowerPolicy(0.25)], grid)
    assert loglog_slope(quarter, 10_000, 1_000_000) == pytest.approx(0.25, abs=0.02)
    critical = figure2_sweep(8, 1.0, [PowerPolicy(0.5)], [1_000_000])["rel_std"].iloc[0]
    assert critical == pytest.approx(1.0 / (math.sqrt(2.0) * min_moment(8, 1) ** 2), rel=0.05)


def test_c_sweep_layout():
    frame = c_sweep(8, 1.0, (2, 20), [0.25, 0.5, 1.0])
    assert list(frame.columns) == ["n", "c", "rel_std"]
    assert len(frame) == 6


def test_policy_parsing():
    assert parse_policy("constant:0.5").c_for(100) == 0.5
    assert parse_policy("alpha:1").c_for(9) == pytest.approx(0.1)
    for text in ("constant", "beta:1", "alpha:x", "constant:0", "alpha:-1"):
        with pytest.raises(ValueError):
            parse_policy(text)


def test_csv_keeps_full_precision_and_inf():
    frame = pd.DataFrame({"n": [2, 3], "rel_std": [1.0 / 3.0, math.inf]})
    text = frame_to_csv(frame)
    assert text.splitlines() == ["n,rel_std", "2,0.33333333333333331", "3,inf"]


def test_json_writes_inf_as_string():
    payload = json.loads(records_to_json({"rate": 0.0, "rel_std": math.inf, "lam": np.int64(2), "ok": np.bool_(True)}))
    assert payload == {"rate": 0.0, "rel_std": "inf", "lam": 2, "ok": True}


def test_default_levels():
    assert len(DEFAULT_LEVELS) == 9
    assert list(DEFAULT_LEVELS) == sorted(DEFAULT_LEVELS)
