import numpy as np


def linear_objective(points):
    """f(x) = x_1 for each row of points"""
    return np.asarray(points)[..., 0]


def evaluate_offspring(parent, sigma, offspring_steps, objective=linear_objective, transform=None):
    """
    Evaluate all offspring x + sigma * xi of one iteration

    Args:
        parent: numpy array [n] - Parent X_t
        sigma: float - Step-size sigma_t
        offspring_steps: numpy array [lambda, n] - Standard steps xi_{t,i}
        objective: callable mapping [lambda, n] points to [lambda] values
        transform: optional strictly increasing scalar map applied to f-values

    Returns:
        numpy array [lambda] of (transform o f)-values
    """
    values = objective(parent + sigma * offspring_steps)
    if transform is not None:
        values = np.array([transform(v) for v in values], dtype=float)
    return values


def find_best_offspring(values):
    """
    Index of the selected offspring

    Args:
        values: numpy array [lambda] - f-values of the offspring

    Returns:
        int - Index of the smallest value; ties go to the lowest index
    """
    best_index = 0
    best_value = np.inf

    for index, value in enumerate(values):
        # Strict comparison keeps the earliest of equal values
        if value < best_value:
            best_value = value
            best_index = index

    return best_index


def select_first_coordinate(offspring_steps):
    """
    Vectorized selection on f(x) = x_1 for many iterations at once

    On a linear function x_1 + sigma * xi_1 orders offspring exactly as xi_1
    does (sigma > 0), so only the first coordinates are compared.

    Args:
        offspring_steps: numpy array [steps, lambda, n]

    Returns:
        (selected steps [steps, n], selected indices [steps])
    """
    indices = np.argmin(offspring_steps[:, :, 0], axis=1)
    selected = offspring_steps[np.arange(offspring_steps.shape[0]), indices]
    return selected, indices
