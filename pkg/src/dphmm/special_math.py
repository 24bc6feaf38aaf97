"""Special functions and seeded random-variate generation.

Everything stochastic in the package goes through :class:`RngStream` so that
runs are reproducible from a single ``(seed, stream_id)`` pair and replication
workers can draw from provably independent streams.

Parameterization conventions (used consistently across the package):

* ``Gamma(shape, rate)`` — density proportional to x^(shape-1) exp(-rate*x).
* ``Inverse-Gamma(a, b)`` is the distribution of 1/X with X ~ Gamma(shape=a,
  rate=b), so its mean is b/(a-1) for a > 1.
* ``scaled Inv-chi2(nu, s2)`` is Inverse-Gamma(nu/2, nu*s2/2).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp


def ln_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    if not (x > 0.0) or math.isinf(x):
        raise ValueError(f"ln_gamma requires finite x > 0, got {x!r}")
    return math.lgamma(x)


def digamma(x: float) -> float:
    """Digamma function psi(x) = d/dx ln Gamma(x), for x > 0."""
    if not (x > 0.0) or math.isinf(x):
        raise ValueError(f"digamma requires finite x > 0, got {x!r}")
    return float(_sp.digamma(x))


def trigamma(x: float) -> float:
    """Trigamma function psi'(x), for x > 0 (Newton-Raphson curvature)."""
    if not (x > 0.0) or math.isinf(x):
        raise ValueError(f"trigamma requires finite x > 0, got {x!r}")
    return float(_sp.polygamma(1, x))


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF Phi(x); saturates to 0/1 in the extreme tails."""
    if math.isnan(x):
        raise ValueError("std_normal_cdf requires finite x")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


class RngStream:
    """A seeded, independently addressable random stream.

    Built on the counter-based Philox generator: distinct ``(seed,
    stream_id)`` keys index statistically independent streams by construction
    (the key selects a block of the counter space), which is what makes
    parallel replications reproducible regardless of scheduling order.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._gen = np.random.Generator(
            np.random.Philox(key=np.array([self.seed, self.stream_id], dtype=np.uint64))
        )

    # -- elementary draws ---------------------------------------------------

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        if not high > low:
            raise ValueError("uniform requires high > low")
        return float(self._gen.uniform(low, high))

    def normal(self, mean: float = 0.0, sd: float = 1.0) -> float:
        if not sd > 0.0:
            raise ValueError("normal requires sd > 0")
        return float(self._gen.normal(mean, sd))

    def standard_normal(self, size: int) -> np.ndarray:
        return self._gen.standard_normal(size)

    def gamma(self, shape: float, rate: float) -> float:
        """Gamma(shape, rate) draw; valid for shape < 1 as well."""
        if not (shape > 0.0 and rate > 0.0):
            raise ValueError("gamma requires shape > 0 and rate > 0")
        return float(self._gen.gamma(shape, 1.0 / rate))

    def inv_gamma(self, a: float, b: float) -> float:
        """Inverse-Gamma(a, b) = 1 / Gamma(shape=a, rate=b)."""
        return 1.0 / self.gamma(a, b)

    def scaled_inv_chi2(self, nu: float, s2: float) -> float:
        """Scaled inverse chi-square(nu, s2) = Inv-Gamma(nu/2, nu*s2/2)."""
        if not (nu > 0.0 and s2 > 0.0):
            raise ValueError("scaled_inv_chi2 requires nu > 0 and s2 > 0")
        return self.inv_gamma(0.5 * nu, 0.5 * nu * s2)

    def poisson(self, lam: float) -> int:
        if not lam >= 0.0:
            raise ValueError("poisson requires lam >= 0")
        return int(self._gen.poisson(lam))

    def categorical(self, probs: np.ndarray) -> int:
        """Index draw from a normalized probability vector."""
        u = self.uniform()
        return int(np.searchsorted(np.cumsum(probs), u))


def draw(dist: tuple, rng: RngStream) -> float:
    """Draw one variate from a ``DistSpec`` tuple.

    Specs: ``("normal", mean, sd)``, ``("gamma", shape, rate)``,
    ``("inv_gamma", a, b)``, ``("scaled_inv_chi2", nu, s2)``,
    ``("uniform", low, high)``.
    """
    kind, *params = dist
    fn = {
        "normal": rng.normal,
        "gamma": rng.gamma,
        "inv_gamma": rng.inv_gamma,
        "scaled_inv_chi2": rng.scaled_inv_chi2,
        "uniform": rng.uniform,
    }.get(kind)
    if fn is None:
        raise ValueError(f"unknown distribution kind {kind!r}")
    return fn(*params)
