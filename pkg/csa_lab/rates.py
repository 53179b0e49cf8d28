"""
Closed-form divergence rates of the (1,lambda)-CSA-ES on linear functions and
the variance of its log step-size change.

Every E[N^k] below is E[N_{1:lambda}^k] taken from order_stats; nothing here
draws random numbers.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from order_stats import min_moment
from params import AlgorithmParams

# |2(1-c)E(N)^2 + c(E(N^2) - 1)| below this means the expected change is zero
ZERO_RATE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class VarianceBreakdown:
    """
    Stationary moments of the first path coordinate and the resulting variance
    of ln(sigma_{t+1}/sigma_t)

    Attributes:
        a: float - 1 - c
        k4, k31, k22, k211, k1111: float - Terms of the fourth-moment expansion
        fourth_moment_limit: float - lim E[p_1^4]
        second_moment_limit: float - lim E[p_1^2]
        variance: float - Var ln(sigma_{t+1}/sigma_t) at stationarity
        rel_std: float - sqrt(variance) / expected change; inf when that is zero
        rate_is_zero: bool - True when the expected change vanishes
    """
    a: float
    k4: float
    k31: float
    k22: float
    k211: float
    k1111: float
    fourth_moment_limit: float
    second_moment_limit: float = math.nan
    variance: float = math.nan
    rel_std: float = math.nan
    rate_is_zero: bool = False


@dataclass(frozen=True)
class RateReport:
    params: AlgorithmParams
    rate_no_cumulation: float
    rate_with_cumulation: float
    variance: VarianceBreakdown
    # lambda = 1 lies outside the hypothesis (lambda >= 2) of the cumulation result
    outside_hypothesis: bool = False


def _check_c(c):
    if not 0.0 < c <= 1.0:
        raise ValueError("c must be in (0, 1], got {}".format(c))


def _rate_numerator(lam, c):
    m1 = min_moment(lam, 1)
    m2 = min_moment(lam, 2)
    return 2.0 * (1.0 - c) * m1 ** 2 + c * (m2 - 1.0)


def rate_no_cumulation(params):
    """Delta_sigma = (E(N^2) - 1) / (2 d_sigma n); c is ignored"""
    return (min_moment(params.lam, 2) - 1.0) / (2.0 * params.d_sigma * params.n)


def rate_with_cumulation(params):
    """
    Limit of (1/t) ln(sigma_t/sigma_0) with cumulation:

        (2(1-c) E(N)^2 + c (E(N^2) - 1)) / (2 d_sigma n)

    The first term vanishes at c = 1, leaving rate_no_cumulation.
    """
    return _rate_numerator(params.lam, params.c) / (2.0 * params.d_sigma * params.n)


def path_second_moment_limit(lam, c):
    """lim E[p_1^2] = E(N^2) + (2 - 2c)/c * E(N)^2"""
    _check_c(c)
    return min_moment(lam, 2) + (2.0 - 2.0 * c) / c * min_moment(lam, 1) ** 2


def path_fourth_moment_limit(lam, c):
    """
    lim E[p_1^4] and the five terms of its expansion, with a = 1 - c

    Args:
        lam: int - Population size
        c: float - Cumulation parameter in (0, 1]

    Returns:
        VarianceBreakdown with a, the k-terms and fourth_moment_limit set;
        the remaining fields are NaN

    Raises:
        ValueError: c outside (0, 1] (the geometric sums diverge for a >= 1)
    """
    _check_c(c)
    a = 1.0 - c
    m1, m2, m3, m4 = (min_moment(lam, k) for k in (1, 2, 3, 4))

    # 1 - a^k written in c so tiny c keeps its precision
    one_minus_a = c
    one_minus_a2 = c * (2.0 - c)
    one_minus_a3 = c * (3.0 - 3.0 * c + c * c)

    k4 = m4
    k31 = 4.0 * a * (1.0 + a + 2.0 * a ** 2) / one_minus_a3 * m3 * m1
    k22 = 6.0 * a ** 2 / one_minus_a2 * m2 ** 2
    k211 = 12.0 * a ** 3 * (1.0 + 2.0 * a + 3.0 * a ** 2) / (one_minus_a2 * one_minus_a3) * m2 * m1 ** 2
    k1111 = 24.0 * a ** 6 / (one_minus_a * one_minus_a2 * one_minus_a3) * m1 ** 4

    # (1 - a^2)^2 / (1 - a^4) = (1 - a^2) / (1 + a^2)
    prefactor = one_minus_a2 / (1.0 + a ** 2)
    fourth = prefactor * (k4 + k31 + k22 + k211 + k1111)
    return VarianceBreakdown(a=a, k4=k4, k31=k31, k22=k22, k211=k211, k1111=k1111, fourth_moment_limit=fourth)


def _variance(n, c, d_sigma, fourth, second):
    return c ** 2 / (4.0 * d_sigma ** 2 * n ** 2) * (fourth - second ** 2 + 2.0 * (n - 1))


def log_step_variance(params):
    """
    Stationary variance of ln(sigma_{t+1}/sigma_t):

        c^2 / (4 d_sigma^2 n^2) * (E[p_1^4] - E[p_1^2]^2 + 2(n - 1))

    rel_std is sqrt(variance) / rate_with_cumulation, or inf with rate_is_zero
    set when the expected change is zero (lambda in {1, 2} at c = 1, lambda = 1).
    """
    breakdown = path_fourth_moment_limit(params.lam, params.c)
    second = path_second_moment_limit(params.lam, params.c)
    variance = _variance(params.n, params.c, params.d_sigma, breakdown.fourth_moment_limit, second)
    variance = max(variance, 0.0)

    rate_is_zero = abs(_rate_numerator(params.lam, params.c)) <= ZERO_RATE_TOLERANCE
    if rate_is_zero:
        rel_std = math.inf
    else:
        rel_std = math.sqrt(variance) / rate_with_cumulation(params)
    return replace(
        breakdown,
        second_moment_limit=second,
        variance=variance,
        rel_std=rel_std,
        rate_is_zero=rate_is_zero,
    )


def relative_std(lam, n, c, d_sigma=1.0):
    """Relative standard deviation for one (lambda, n, c) point"""
    params = AlgorithmParams(lam=lam, n=int(n), c=float(c), d_sigma=d_sigma)
    return log_step_variance(params).rel_std


def rel_std_curve(lam, d_sigma, c_policy, n_grid):
    """
    Relative standard deviation along a grid of dimensions

    Args:
        lam: int - Population size
        d_sigma: float - Damping
        c_policy: object with c_for(n) (ConstantPolicy or PowerPolicy)
        n_grid: iterable of int - Dimensions

    Returns:
        list of (n, rel_std) tuples; rel_std is inf where the rate is zero
    """
    return [(int(n), relative_std(lam, int(n), c_policy.c_for(int(n)), d_sigma)) for n in n_grid]


def rel_std_by_c(lam, d_sigma, n, c_grid):
    """Relative standard deviation against c at a fixed dimension"""
    return [(float(c), relative_std(lam, n, float(c), d_sigma)) for c in c_grid]


def log_grid(n_min, n_max, points):
    """Distinct integer dimensions spaced evenly on a log scale"""
    grid = np.unique(np.round(np.geomspace(n_min, n_max, points)).astype(int))
    return [int(n) for n in grid]


def rate_report(params):
    """Every closed-form quantity for one parameter set"""
    return RateReport(
        params=params,
        rate_no_cumulation=rate_no_cumulation(params),
        rate_with_cumulation=rate_with_cumulation(params),
        variance=log_step_variance(params),
        outside_hypothesis=params.lam == 1,
    )
