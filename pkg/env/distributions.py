"""
env/distributions.py
Demand, production and initial-inventory distributions used by network configs.

Text forms accepted by the config parser: normal(mu,sigma), uniform(a,b), const(v).
uniform is discrete and inclusive on both ends. Normal draws are turned into
units by rounding half up and taking the positive part.
"""
import math
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from env.errors import ConfigError

_DIST_RE = re.compile(r"^\s*(normal|uniform|const)\s*\(([^)]*)\)\s*$", re.IGNORECASE)


def discretize(value):
    """Round half up, then clamp at zero. Works on scalars and arrays."""
    return np.maximum(0, np.floor(np.asarray(value, dtype=float) + 0.5)).astype(np.int64)


class Distribution:
    """Common interface; subclasses are immutable value objects."""

    is_constant = False

    def draw(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def sample_units(self, rng: np.random.Generator, size=None):
        return discretize(self.draw(rng, size))

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, q):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def std(self) -> float:
        raise NotImplementedError

    def upper(self, q: float = 0.9999) -> float:
        """Upper bound in units covering all but a 1-q tail."""
        return float(discretize(self.ppf(q)))

    def support_max(self) -> float:
        return self.upper()


@dataclass(frozen=True)
class Normal(Distribution):
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"normal sigma must be positive, got {self.sigma}")

    def draw(self, rng, size=None):
        return rng.normal(self.mu, self.sigma, size)

    def cdf(self, x):
        return stats.norm.cdf(x, loc=self.mu, scale=self.sigma)

    def ppf(self, q):
        return stats.norm.ppf(q, loc=self.mu, scale=self.sigma)

    def pdf(self, x):
        return stats.norm.pdf(x, loc=self.mu, scale=self.sigma)

    def mean(self):
        return float(self.mu)

    def std(self):
        return float(self.sigma)

    def __str__(self):
        return f"normal({self.mu:g},{self.sigma:g})"


@dataclass(frozen=True)
class Uniform(Distribution):
    low: int
    high: int

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError(f"uniform bounds reversed: ({self.low},{self.high})")

    @property
    def _rv(self):
        return stats.randint(self.low, self.high + 1)

    def draw(self, rng, size=None):
        return rng.integers(self.low, self.high + 1, size=size)

    def cdf(self, x):
        return self._rv.cdf(x)

    def ppf(self, q):
        return self._rv.ppf(q)

    def pdf(self, x):
        return self._rv.pmf(np.floor(x))

    def mean(self):
        return (self.low + self.high) / 2.0

    def std(self):
        return float(self._rv.std())

    def upper(self, q=0.9999):
        return float(max(0, self.high))

    def __str__(self):
        return f"uniform({self.low},{self.high})"


@dataclass(frozen=True)
class Const(Distribution):
    value: float

    is_constant = True

    def draw(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))

    def cdf(self, x):
        return np.where(np.asarray(x) >= self.value, 1.0, 0.0)

    def ppf(self, q):
        raise ValueError("constant distribution has no invertible CDF")

    def pdf(self, x):
        raise ValueError("constant distribution has no density")

    def mean(self):
        return float(self.value)

    def std(self):
        return 0.0

    def upper(self, q=0.9999):
        return float(discretize(self.value))

    def __str__(self):
        return f"const({self.value:g})"


def parse_distribution(text: str, line: Optional[int] = None) -> Distribution:
    match = _DIST_RE.match(text)
    if not match:
        raise ConfigError(f"malformed distribution '{text}'", line)
    name = match.group(1).lower()
    try:
        args = [float(a) for a in match.group(2).split(",") if a.strip()]
    except ValueError:
        raise ConfigError(f"non-numeric distribution argument in '{text}'", line)

    expected = {"normal": 2, "uniform": 2, "const": 1}[name]
    if len(args) != expected:
        raise ConfigError(f"{name} takes {expected} argument(s), got {len(args)}", line)

    try:
        if name == "normal":
            return Normal(args[0], args[1])
        if name == "uniform":
            if not all(float(a).is_integer() for a in args):
                raise ValueError("uniform bounds must be integers")
            return Uniform(int(args[0]), int(args[1]))
        if math.isinf(args[0]) or math.isnan(args[0]):
            raise ValueError("const value must be finite")
        return Const(args[0])
    except ValueError as e:
        raise ConfigError(str(e), line)
