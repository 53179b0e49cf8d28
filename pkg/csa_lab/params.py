import math
from dataclasses import dataclass


@dataclass(frozen=True)
class AlgorithmParams:
    """
    Configuration of one (1,lambda)-CSA-ES instance

    Attributes:
        lam: int - Offspring per iteration (lambda >= 1)
        n: int - Search space dimension (n >= 1)
        c: float - Cumulation parameter in (0, 1]; c = 1 disables cumulation
        d_sigma: float - Damping of the step-size update (> 0)
        seed: int - Base seed; run r of a batch draws from substream (seed, r)
    """
    lam: int
    n: int
    c: float
    d_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.lam) != self.lam or self.lam < 1:
            raise ValueError("lambda must be an integer >= 1, got {}".format(self.lam))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be an integer >= 1, got {}".format(self.n))
        if not 0.0 < self.c <= 1.0:
            raise ValueError("c must be in (0, 1], got {}".format(self.c))
        if not self.d_sigma > 0.0:
            raise ValueError("d_sigma must be > 0, got {}".format(self.d_sigma))
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a non-negative integer, got {}".format(self.seed))

    @property
    def a(self):
        """Path discount 1 - c"""
        return 1.0 - self.c

    @property
    def path_weight(self):
        """Normalization sqrt(c(2 - c)) of the selected step in the path update"""
        return math.sqrt(self.c * (2.0 - self.c))

    def default_burn_in(self):
        """Iterations until the path transient (1 - c)^t drops below e^-10"""
        return 0 if self.c == 1.0 else math.ceil(10.0 / self.c)
