import math
from dataclasses import dataclass

from experiments import DEFAULT_LEVELS, DEFAULT_MEMORY_BUDGET
from params import AlgorithmParams
from policies import FIGURE2_POLICIES, parse_policy

COMMANDS = ("rates", "simulate", "validate", "sweep")
FORMATS = ("csv", "json")
SWEEP_AXES = ("n", "c")


@dataclass
class RunConfig:
    """
    Everything one command needs

    c = None means 1/sqrt(n). fmt = None picks json for rates and csv otherwise.
    """
    command: str
    lam: int = 8
    n: int = 20
    c: float = None
    d_sigma: float = 1.0
    seed: int = 0
    runs: int = 5001
    steps: int = 5000
    workers: int = 1
    levels: tuple = DEFAULT_LEVELS
    policies: tuple = FIGURE2_POLICIES
    grid: tuple = (2, 1_000_000, 60)
    against: str = "n"
    out: str = None
    fmt: str = None
    mode: str = "marginal"
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    quick: bool = False
    perturb_dsigma: float = 1.0

    @property
    def cumulation(self):
        return 1.0 / math.sqrt(self.n) if self.c is None else self.c

    @property
    def output_format(self):
        if self.fmt is not None:
            return self.fmt
        return "json" if self.command == "rates" else "csv"

    def params(self):
        return AlgorithmParams(lam=self.lam, n=self.n, c=self.cumulation, d_sigma=self.d_sigma, seed=self.seed)

    def cumulation_policies(self):
        return [parse_policy(text) for text in self.policies]

    def validate(self):
        """
        Raises:
            ValueError: first invalid field
        """
        if self.command not in COMMANDS:
            raise ValueError("Unknown command: {}".format(self.command))
        self.params()
        if self.runs < 1 or self.steps < 1:
            raise ValueError("runs and steps must be >= 1, got {} and {}".format(self.runs, self.steps))
        if self.workers < 1:
            raise ValueError("workers must be >= 1, got {}".format(self.workers))
        if not self.levels or any(not 0.0 < level < 1.0 for level in self.levels):
            raise ValueError("quantile levels must lie in (0, 1), got {}".format(list(self.levels)))
        self.cumulation_policies()
        n_min, n_max, points = self.grid
        if not 1 <= n_min <= n_max or points < 2:
            raise ValueError("grid needs 1 <= n_min <= n_max and >= 2 points, got {}".format(self.grid))
        if self.against not in SWEEP_AXES:
            raise ValueError("sweep axis must be one of {}, got {}".format(SWEEP_AXES, self.against))
        if self.output_format not in FORMATS:
            raise ValueError("format must be csv or json, got {}".format(self.fmt))
        if self.mode not in ("marginal", "full"):
            raise ValueError("Unknown sampling mode: {}".format(self.mode))
        if self.memory_budget < 1:
            raise ValueError("memory budget must be >= 1 entry, got {}".format(self.memory_budget))
        if not self.perturb_dsigma > 0.0:
            raise ValueError("d_sigma perturbation must be > 0, got {}".format(self.perturb_dsigma))
        return self
