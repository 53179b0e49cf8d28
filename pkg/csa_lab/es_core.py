import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from order_stats import min_moment, sample_min
from selection import evaluate_offspring, find_best_offspring, select_first_coordinate

SAMPLING_MODES = ("full", "marginal")

# Offspring lie within this many step-sizes of the parent (|N(0, 1)| > 10 has probability 1.5e-23)
OFFSPRING_REACH = 10.0


@dataclass
class EsState:
    """
    Markov state (X_t, sigma_t, p_t) of the (1,lambda)-CSA-ES

    Attributes:
        x: numpy array [n] - Parent X_t
        sigma: float - Step-size sigma_t (> 0)
        path: numpy array [n] - Cumulative path p_t
        t: int - Iteration counter
    """
    x: np.ndarray
    sigma: float
    path: np.ndarray
    t: int = 0


@dataclass
class SelectedStep:
    """
    Outcome of one selection

    Attributes:
        xi: numpy array [n] - Selected standard step xi*_t
        eta: float - Step-size multiplier applied to sigma_t
        index: int or None - Offspring index that won (None when sampled marginally)
    """
    xi: np.ndarray
    eta: float
    index: int = None


@dataclass(frozen=True)
class ZChainState:
    """
    Scalar chain Z_t = (x_{t+1,1} - x_{0,1}) / sigma_t of the c = 1 algorithm

    eta is the multiplier eta*(xi*_t) of the draw that produced z; the next
    value divides z by it. The chain starts at Z_{-1} = 0.
    """
    z: float = 0.0
    eta: float = 1.0


@dataclass
class RunRecord:
    """
    One simulated trajectory

    Attributes:
        log_sigma: numpy array [steps + 1] - ln(sigma_t / sigma_0), starts at 0
        log_absx: numpy array [steps + 1] or None - ln|x_{t,1} / x_{0,1}|, NaN where x_{t,1} underflows to 0
        path: numpy array [steps + 1, n] or None - p_0 .. p_steps
        selected_index: numpy array [steps] or None - Winning offspring per iteration (full mode)
    """
    log_sigma: np.ndarray
    log_absx: np.ndarray = None
    path: np.ndarray = None
    selected_index: np.ndarray = None


def _check_mode(mode):
    if mode not in SAMPLING_MODES:
        raise ValueError("Unknown sampling mode: {}".format(mode))


def step_size_factor(path, params):
    """eta = exp(c / (2 d_sigma) * (||p||^2 / n - 1))"""
    return math.exp(params.c / (2.0 * params.d_sigma) * (float(np.dot(path, path)) / params.n - 1.0))


def init_state(params, rng):
    """
    Initial state: x_0 = (1, 0, ..., 0), sigma_0 = 1, p_0 ~ N(0, I_n)

    x_{0,1} is nonzero so ln|x_{t,1} / x_{0,1}| is defined from t = 0.
    """
    x = np.zeros(params.n)
    x[0] = 1.0
    path = rng.standard_normal(params.n)
    return EsState(x=x, sigma=1.0, path=path, t=0)


def draw_marginal_step(lam, n, rng):
    """
    Selected step sampled directly: (N_{1:lambda}, N_2, ..., N_n)

    Draws lambda + n - 1 normals in that order; the first lambda give the minimum.
    """
    xi = np.empty(n)
    xi[0] = sample_min(lam, rng)
    xi[1:] = rng.standard_normal(n - 1)
    return xi


def step(state, params, rng, transform=None, mode="full"):
    """
    One iteration of the (1,lambda)-CSA-ES on f(x) = x_1

    Args:
        state: EsState - Current state (not modified)
        params: AlgorithmParams
        rng: numpy Generator
        transform: optional strictly increasing map applied to f-values before selection
        mode: "full" samples and ranks all lambda offspring; "marginal" samples
              the selected step directly from its law

    Returns:
        (EsState, SelectedStep) for iteration t + 1
    """
    _check_mode(mode)
    if mode == "full":
        offspring = rng.standard_normal((params.lam, params.n))
        values = evaluate_offspring(state.x, state.sigma, offspring, transform=transform)
        index = find_best_offspring(values)
        xi = offspring[index]
    else:
        index = None
        xi = draw_marginal_step(params.lam, params.n, rng)

    path = (1.0 - params.c) * state.path + params.path_weight * xi
    eta = step_size_factor(path, params)
    new_state = EsState(
        x=state.x + state.sigma * xi,
        sigma=state.sigma * eta,
        path=path,
        t=state.t + 1,
    )
    return new_state, SelectedStep(xi=xi, eta=eta, index=index)


def trace_selection(params, rng, steps, transform=None, floor=-math.inf):
    """
    Full-mode steps from init_state, recording the winning offspring

    Stops early once an offspring could land below floor (every offspring lies
    within OFFSPRING_REACH step-sizes of the parent), so a transform that
    underflows there is only applied where it is still strictly increasing.

    Returns:
        (numpy array of selected indices, final EsState)
    """
    state = init_state(params, rng)
    indices = []
    for _ in range(steps):
        if state.x[0] - OFFSPRING_REACH * state.sigma < floor:
            break
        state, selected = step(state, params, rng, transform=transform)
        indices.append(selected.index)
    return np.array(indices, dtype=int), state


def _draw_selected_steps(params, steps, rng, mode):
    if mode == "full":
        offspring = rng.standard_normal((steps, params.lam, params.n))
        return select_first_coordinate(offspring)
    # Same draw order as repeated draw_marginal_step calls
    block = rng.standard_normal((steps, params.lam + params.n - 1))
    xi = np.empty((steps, params.n))
    xi[:, 0] = block[:, :params.lam].min(axis=1)
    xi[:, 1:] = block[:, params.lam:]
    return xi, None


def simulate_run(params, steps, rng, mode="marginal", record_x=False, record_path=False):
    """
    Simulate a whole trajectory from init_state

    Selected steps on a linear function are i.i.d. and do not depend on the
    state, so all of them are drawn first and the path recurrence
    p_{t+1} = (1 - c) p_t + sqrt(c(2 - c)) xi*_t runs as a linear filter. The
    generator is consumed exactly as init_state followed by repeated step calls
    in the same mode.

    Args:
        params: AlgorithmParams
        steps: int - Number of iterations (>= 1)
        rng: numpy Generator
        mode: "marginal" or "full"
        record_x: bool - Also return ln|x_{t,1} / x_{0,1}|
        record_path: bool - Also return the full path history

    Returns:
        RunRecord
    """
    _check_mode(mode)
    if steps < 1:
        raise ValueError("steps must be >= 1, got {}".format(steps))
    path0 = rng.standard_normal(params.n)
    xi, indices = _draw_selected_steps(params, steps, rng, mode)

    if params.c == 1.0:
        paths = xi
    else:
        paths, _ = signal.lfilter(
            [params.path_weight], [1.0, -params.a], xi, axis=0, zi=(params.a * path0)[np.newaxis, :]
        )

    increments = params.c / (2.0 * params.d_sigma) * (np.sum(paths ** 2, axis=1) / params.n - 1.0)
    log_sigma = np.concatenate(([0.0], np.cumsum(increments)))
    record = RunRecord(log_sigma=log_sigma, selected_index=indices)

    if record_x:
        sigma_before = np.exp(log_sigma[:-1])
        x1 = 1.0 + np.concatenate(([0.0], np.cumsum(sigma_before * xi[:, 0])))
        with np.errstate(divide="ignore"):
            log_absx = np.log(np.abs(x1))
        log_absx[~np.isfinite(log_absx)] = np.nan
        record.log_absx = log_absx
    if record_path:
        record.path = np.vstack((path0, paths))
    return record


@dataclass(frozen=True)
class SelectionCheck:
    """Empirical moments of the selected step against their laws"""
    lam: int
    samples: int
    first_mean: float
    first_mean_se: float
    first_second_moment: float
    first_second_moment_se: float
    other_mean: float
    other_mean_se: float
    other_second_moment: float
    other_second_moment_se: float
    expected_first_mean: float
    expected_first_second_moment: float

    def z_scores(self):
        return {
            "first_mean": (self.first_mean - self.expected_first_mean) / self.first_mean_se,
            "first_second_moment": (self.first_second_moment - self.expected_first_second_moment)
            / self.first_second_moment_se,
            "other_mean": self.other_mean / self.other_mean_se,
            "other_second_moment": (self.other_second_moment - 1.0) / self.other_second_moment_se,
        }


def _mean_and_se(values):
    return float(np.mean(values)), float(np.std(values, ddof=1) / np.sqrt(values.size))


def selected_first_coordinate_distribution_check(lam, samples, rng, n=2):
    """
    Run full selection on random offspring and compare the selected step with
    its law: first coordinate ~ N_{1:lambda}, others ~ N(0, 1)

    Args:
        lam: int - Offspring per selection
        samples: int - Independent selections (>= 1e5)
        rng: numpy Generator
        n: int - Dimension of the offspring (>= 2)

    Returns:
        SelectionCheck
    """
    if samples < 100_000:
        raise ValueError("samples must be >= 1e5, got {}".format(samples))
    if n < 2:
        raise ValueError("n must be >= 2 to look at unselected coordinates, got {}".format(n))
    offspring = rng.standard_normal((samples, lam, n))
    selected, _ = select_first_coordinate(offspring)
    first = selected[:, 0]
    other = selected[:, 1]

    first_mean, first_mean_se = _mean_and_se(first)
    first_second, first_second_se = _mean_and_se(first ** 2)
    other_mean, other_mean_se = _mean_and_se(other)
    other_second, other_second_se = _mean_and_se(other ** 2)
    return SelectionCheck(
        lam=lam,
        samples=samples,
        first_mean=first_mean,
        first_mean_se=first_mean_se,
        first_second_moment=first_second,
        first_second_moment_se=first_second_se,
        other_mean=other_mean,
        other_mean_se=other_mean_se,
        other_second_moment=other_second,
        other_second_moment_se=other_second_se,
        expected_first_mean=min_moment(lam, 1),
        expected_first_second_moment=min_moment(lam, 2),
    )


def z_step(zstate, lam, n, d_sigma, rng):
    """
    One transition of the c = 1 chain: Z_{t+1} = Z_t / eta*(xi*_t) + [xi*_{t+1}]_1

    The selected step is sampled marginally (first coordinate from N_{1:lambda}).

    Returns:
        ZChainState holding Z_{t+1} and eta*(xi*_{t+1})
    """
    xi = draw_marginal_step(lam, n, rng)
    z = zstate.z / zstate.eta + xi[0]
    eta = math.exp(1.0 / (2.0 * d_sigma) * (float(np.dot(xi, xi)) / n - 1.0))
    return ZChainState(z=z, eta=eta)


def z_chain(lam, n, d_sigma, steps, rng):
    """Z_0 .. Z_{steps-1} starting from Z_{-1} = 0"""
    zstate = ZChainState()
    values = np.empty(steps)
    for t in range(steps):
        zstate = z_step(zstate, lam, n, d_sigma, rng)
        values[t] = zstate.z
    return values
