import numpy as np
from scipy import special

# Helper functions for the standard normal law and random streams

def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2.0 * np.pi)

def log_normal_cdf(x):
    return special.log_ndtr(x)

def log_normal_sf(x):
    # log(1 - Phi(x)) without forming 1 - Phi(x)
    return special.log_ndtr(-np.asarray(x, dtype=float))

def normal_raw_moment(power):
    """Raw moments E[N^k] of a standard normal, k = 0..4"""
    return (1.0, 0.0, 1.0, 0.0, 3.0)[power]

def substream(seed, run_index, stream=0):
    """
    Independent generator for one run of a batch

    Args:
        seed: int - Base seed of the experiment
        run_index: int - Index of the run inside the batch
        stream: int - Separates unrelated experiments sharing a seed (0 = main batch)

    Returns:
        numpy Generator over a Philox (counter-based) bit generator keyed by
        (seed, run_index), so a run's draws never depend on which worker ran it
    """
    key = [int(seed), int(run_index)]
    if stream:
        key.append(int(stream))
    sequence = np.random.SeedSequence(key)
    return np.random.Generator(np.random.Philox(sequence))
