import math
import threading

import numpy as np
import pytest
from scipy import integrate

from mathutils import substream
from order_stats import QuadratureError, clear_cache, min_moment, moment, order_stat_pdf, recurrence_residual, \
    sample_min

PHI_0 = 1.0 / math.sqrt(2.0 * math.pi)


def test_pdf_reduces_to_normal_density():
    assert order_stat_pdf(0.0, 1, 1) == pytest.approx(PHI_0, abs=1e-12)
    assert order_stat_pdf(0.0, 1, 2) == pytest.approx(PHI_0, abs=1e-12)


def test_pdf_integrates_to_one():
    total, _ = integrate.quad(lambda x: order_stat_pdf(x, 2, 5), -12.0, 12.0, epsabs=1e-12, epsrel=0.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_pdf_upper_tail_is_finite():
    # The minimum of many normals far in the upper tail: Phi(-x)^(lam-1) underflows gracefully
    values = order_stat_pdf(np.array([8.0, 10.0, 12.0]), 1, 50)
    assert np.all(np.isfinite(values))
    assert np.all(values >= 0.0)


def test_pdf_rejects_rank_out_of_range():
    with pytest.raises(ValueError):
        order_stat_pdf(0.0, 0, 3)
    with pytest.raises(ValueError):
        order_stat_pdf(0.0, 4, 3)


@pytest.mark.parametrize('rank, lam, power, expected', [
    (1, 1, 2, 1.0),
    (1, 2, 2, 1.0),
    (1, 2, 1, -1.0 / math.sqrt(math.pi)),
    (1, 3, 1, -1.5 / math.sqrt(math.pi)),
    (1, 3, 2, 1.0 + math.sqrt(3.0) / (2.0 * math.pi)),
])
def test_known_moments(rank, lam, power, expected):
    assert moment(rank, lam, power).value == pytest.approx(expected, abs=1e-9)


def test_moment_reports_error_estimate():
    result = moment(1, 8, 4)
    assert result.lam == 8 and result.rank == 1 and result.power == 4
    assert 0.0 <= result.abs_error_estimate <= 1e-10


def test_moment_rejects_bad_power():
    with pytest.raises(ValueError):
        moment(1, 3, 0)
    with pytest.raises(ValueError):
        moment(1, 3, 5)


def test_moment_cache_returns_same_object():
    clear_cache()
    first = moment(2, 6, 3)
    assert moment(2, 6, 3) is first


def test_moment_cache_is_thread_safe():
    clear_cache()
    results = []

    def worker():
        results.append(moment(1, 17, 2).value)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert len(set(results)) == 1


def test_quadrature_error_is_arithmetic_error():
    error = QuadratureError("too large", 1e-6)
    assert isinstance(error, ArithmeticError)
    assert error.achieved_error == 1e-6


@pytest.mark.parametrize('lam, power', [(2, 2), (5, 2), (4, 4), (10, 1), (32, 3)])
def test_recurrence_holds(lam, power):
    assert abs(recurrence_residual(lam, power)) <= 1e-8


def test_recurrence_needs_two_offspring():
    with pytest.raises(ValueError):
        recurrence_residual(1, 2)


@pytest.mark.parametrize('lam', [2, 3, 8, 12])
def test_first_moments_of_minimum_and_maximum_are_symmetric(lam):
    assert moment(1, lam, 1).value == pytest.approx(-moment(lam, lam, 1).value, abs=1e-9)


def test_second_moment_increases_with_lambda():
    second = [min_moment(lam, 2) for lam in range(2, 20)]
    assert all(b > a for a, b in zip(second[:-1], second[1:]))


def test_sample_min_of_one_is_standard_normal_draw():
    assert sample_min(1, substream(3, 0)) == substream(3, 0).standard_normal(1)[0]


@pytest.mark.slow
def test_sample_min_matches_quadrature():
    samples = sample_min(2, substream(11, 0), size=2_000_000)
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    assert abs(samples.mean() - min_moment(2, 1)) < 4 * se
    squared = samples ** 2
    assert abs(squared.mean() - 1.0) < 4 * squared.std(ddof=1) / math.sqrt(samples.size)


def test_sample_min_shape():
    assert sample_min(5, substream(0, 0), size=(3, 4)).shape == (3, 4)


@pytest.mark.slow
@pytest.mark.parametrize('lam', [2, 8])
@pytest.mark.parametrize('power', [1, 2, 3, 4])
def test_sample_min_moments_match_quadrature(lam, power):
    powered = sample_min(lam, substream(23, lam), size=1_000_000) ** power
    se = powered.std(ddof=1) / math.sqrt(powered.size)
    assert abs(powered.mean() - min_moment(lam, power)) < 4 * se
