import logging
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from mathutils import log_normal_cdf, log_normal_sf, normal_pdf, normal_raw_moment

logger = logging.getLogger(__name__)

# Outside [-12, 12] the density mass is below 1e-30 for every lambda <= 1e4
DOMAIN = (-12.0, 12.0)
PANEL_WIDTH = 1.0
PANEL_TOLERANCE = 1e-12
TOTAL_TOLERANCE = 1e-10
MAX_POWER = 4


class QuadratureError(ArithmeticError):
    """Raised when the panel quadrature cannot reach the requested accuracy"""

    def __init__(self, message, achieved_error):
        super().__init__(message)
        self.achieved_error = achieved_error


@dataclass(frozen=True)
class OrderStatMoment:
    """
    k-th raw moment of the i-th smallest of lambda standard normals

    Attributes:
        lam: int - Population size lambda
        rank: int - Rank i in [1, lambda] (1 is the minimum)
        power: int - Moment order k in [1, 4]
        value: float - E[N_{i:lambda}^k]
        abs_error_estimate: float - Aggregate quadrature error bound
    """
    lam: int
    rank: int
    power: int
    value: float
    abs_error_estimate: float


def _check_rank(rank, lam):
    if lam < 1:
        raise ValueError("lambda must be >= 1, got {}".format(lam))
    if not 1 <= rank <= lam:
        raise ValueError("rank must be in [1, {}], got {}".format(lam, rank))


def _log_density(x, rank, lam):
    log_coefficient = special.gammaln(lam + 1) - special.gammaln(rank) - special.gammaln(lam - rank + 1)
    log_phi = -0.5 * np.square(x) - 0.5 * np.log(2.0 * np.pi)
    return (
        log_coefficient
        + log_phi
        + (rank - 1) * log_normal_cdf(x)
        + (lam - rank) * log_normal_sf(x)
    )


def order_stat_pdf(x, rank, lam):
    """
    Density of N_{rank:lam}, the rank-th smallest of lam i.i.d. standard normals

        lam! / ((rank-1)! (lam-rank)!) * phi(x) * Phi(x)^(rank-1) * (1 - Phi(x))^(lam-rank)

    Evaluated in log form; the upper tail uses log Phi(-x) directly, so large x
    does not go through 1 - Phi(x).

    Args:
        x: float or numpy array - Evaluation point(s)
        rank: int - Rank i, 1 <= rank <= lam
        lam: int - Number of normals

    Returns:
        Density value(s), same shape as x
    """
    _check_rank(rank, lam)
    if lam == 1:
        return normal_pdf(x)
    return np.exp(_log_density(x, rank, lam))


def _integrate(rank, lam, power):
    edges = np.arange(DOMAIN[0], DOMAIN[1] + PANEL_WIDTH / 2, PANEL_WIDTH)
    total = 0.0
    total_error = 0.0
    for left, right in zip(edges[:-1], edges[1:]):
        value, error = integrate.quad(
            lambda x: x ** power * order_stat_pdf(x, rank, lam),
            left,
            right,
            epsabs=PANEL_TOLERANCE,
            epsrel=0.0,
            limit=200,
        )
        total += value
        total_error += error
    return total, total_error


_cache = {}
_cache_lock = threading.Lock()


def moment(rank, lam, power):
    """
    E[N_{rank:lam}^power] by adaptive panel quadrature, cached per (rank, lam, power)

    Args:
        rank: int - Rank i in [1, lam]
        lam: int - Population size lambda
        power: int - Moment order in [1, 4]

    Returns:
        OrderStatMoment with abs_error_estimate <= 1e-10

    Raises:
        ValueError: rank or power out of range
        QuadratureError: the aggregate error bound exceeds 1e-10
    """
    _check_rank(rank, lam)
    if not 1 <= power <= MAX_POWER:
        raise ValueError("power must be in [1, {}], got {}".format(MAX_POWER, power))

    key = (rank, lam, power)
    with _cache_lock:
        cached = _cache.get(key)
    if cached is not None:
        return cached

    if lam == 1:
        result = OrderStatMoment(lam, rank, power, normal_raw_moment(power), 0.0)
    else:
        value, error = _integrate(rank, lam, power)
        if error > TOTAL_TOLERANCE:
            raise QuadratureError(
                "E[N_{}:{}^{}] reached error {:.3g} > {:.0e}".format(rank, lam, power, error, TOTAL_TOLERANCE),
                error,
            )
        result = OrderStatMoment(lam, rank, power, value, error)
        logger.debug("moment rank=%d lambda=%d power=%d -> %.17g (err %.2g)", rank, lam, power, value, error)

    with _cache_lock:
        # Two threads may race on a miss; both computed the same value.
        return _cache.setdefault(key, result)


def min_moment(lam, power):
    """Shorthand for E[N_{1:lam}^power] as a float"""
    return moment(1, lam, power).value


def recurrence_residual(lam, power):
    """
    Residual of the order statistics recurrence with g(x) = x^power:

        (lam + 1) E[g(N_{1:lam})] - E[g(N_{2:lam+1})] - lam E[g(N_{1:lam+1})]

    Zero for every lam >= 2 when the moments are right.
    """
    if lam < 2:
        raise ValueError("recurrence needs lambda >= 2, got {}".format(lam))
    return (
        (lam + 1) * moment(1, lam, power).value
        - moment(2, lam + 1, power).value
        - lam * moment(1, lam + 1, power).value
    )


def sample_min(lam, rng, size=None):
    """
    Draw N_{1:lam}: the minimum of lam independent standard normals

    Args:
        lam: int - Number of normals per draw
        rng: numpy Generator
        size: optional int or tuple - Number/shape of independent draws

    Returns:
        float when size is None, numpy array of shape size otherwise
    """
    if lam < 1:
        raise ValueError("lambda must be >= 1, got {}".format(lam))
    if size is None:
        return float(rng.standard_normal(lam).min())
    shape = (size,) if np.isscalar(size) else tuple(size)
    return rng.standard_normal(shape + (lam,)).min(axis=-1)


def clear_cache():
    with _cache_lock:
        _cache.clear()
