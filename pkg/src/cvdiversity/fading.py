"""Log-normal fading of the channel transmittivity.

``T = exp(mu + sigma * z)`` with ``z`` standard normal, truncated to the
physical range ``(floor, 1]`` and renormalised.  Expectations over one or
several i.i.d. channels are computed either with a tensor-product
Gauss-Legendre rule or by seeded Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfcx, log_ndtr, ndtr, ndtri_exp

from . import kernels
from .errors import DomainError

DEFAULT_FLOOR = 1e-6
DEFAULT_SIGMA = 0.5
#: quadrature is a tensor product; beyond this many channels use Monte Carlo
MAX_QUADRATURE_DIM = 3
#: upper end of the bracket searched by ``from_mean``
MU_UPPER = 60.0
_MC_CHUNK = 1 << 16
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
# nodes are kept where the density exceeds exp(-40) of its peak
_TAIL_EXPONENT = 80.0


@lru_cache(maxsize=None)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _mass_times_peak(zlo: float, zhi: float, peak: float) -> float:
    """Normal mass of [zlo, zhi] multiplied by exp(peak**2 / 2)."""
    s = math.sqrt(2.0)
    if zhi < 0 and peak == zhi:
        a = 0.5 * erfcx(-zhi / s)
        b = 0.5 * erfcx(-zlo / s) * math.exp(-0.5 * (zlo - zhi) * (zlo + zhi))
        return a - b
    if zlo > 0 and peak == zlo:
        a = 0.5 * erfcx(zlo / s)
        b = 0.5 * erfcx(zhi / s) * math.exp(-0.5 * (zhi - zlo) * (zhi + zlo))
        return a - b
    return float(ndtr(zhi) - ndtr(zlo))


@dataclass(frozen=True)
class FadingModel:
    """Truncated log-normal law for the transmittivity.

    ``mu`` and ``sigma`` are the mean and standard deviation of ``ln T``
    before truncation; ``sigma`` is the fading strength.
    """

    mu: float
    sigma: float = DEFAULT_SIGMA
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise DomainError(f"sigma must be a positive finite number, got {self.sigma}")
        if not 0.0 < self.floor < 1.0:
            raise DomainError(f"truncation floor must lie in (0, 1), got {self.floor}")
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu}")
        if not self.log_mass > -math.inf:
            raise DomainError(
                f"log-normal(mu={self.mu}, sigma={self.sigma}) has no mass on ({self.floor}, 1]"
            )

    @classmethod
    def from_mean(cls, target_mean: float, sigma: float = DEFAULT_SIGMA, floor: float = DEFAULT_FLOOR) -> "FadingModel":
        return from_mean(target_mean, sigma, floor)

    @property
    def z_bounds(self) -> tuple[float, float]:
        return (math.log(self.floor) - self.mu) / self.sigma, -self.mu / self.sigma

    @property
    def peak(self) -> float:
        """Location (in z) of the largest truncated density."""
        zlo, zhi = self.z_bounds
        return min(max(0.0, zlo), zhi)

    @cached_property
    def _peak_mass(self) -> float:
        zlo, zhi = self.z_bounds
        return _mass_times_peak(zlo, zhi, self.peak)

    @cached_property
    def log_mass(self) -> float:
        """Log of the untruncated probability of ``(floor, 1]``."""
        pm = self._peak_mass
        return math.log(pm) - 0.5 * self.peak**2 if pm > 0 else -math.inf

    @cached_property
    def mean(self) -> float:
        return float(expect(self, lambda t: t).value)


def pdf(model: FadingModel, T):
    """Truncated, renormalised density of the transmittivity."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise DomainError("transmittivity density is defined for T > 0 only")
    z = (np.log(T) - model.mu) / model.sigma
    logf = -0.5 * z * z - _LOG_SQRT_2PI - math.log(model.sigma) - np.log(T) - model.log_mass
    out = np.where((T > model.floor) & (T <= 1.0), np.exp(logf), 0.0)
    return out if out.ndim else float(out)


def from_mean(target_mean: float, sigma: float = DEFAULT_SIGMA, floor: float = DEFAULT_FLOOR) -> FadingModel:
    """Model with the given fading strength whose truncated mean is ``target_mean``."""
    if not 0.0 < target_mean < 1.0:
        raise DomainError(f"mean transmittivity must lie in (0, 1), got {target_mean}")

    def gap(mu):
        return FadingModel(mu, sigma, floor).mean - target_mean

    lo, hi = math.log(floor), MU_UPPER
    if gap(0.0) >= 0:
        hi = 0.0
    else:
        lo = 0.0
    if gap(lo) > 0 or gap(hi) < 0:
        raise DomainError(
            f"no mu in [{math.log(floor):.3g}, {MU_UPPER}] gives mean {target_mean} at sigma={sigma}"
        )
    mu = brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    model = FadingModel(mu, sigma, floor)
    if abs(model.mean - target_mean) > 1e-6:
        raise DomainError(f"could not match mean {target_mean} at sigma={sigma} (got {model.mean})")
    return model


def quadrature_rule(model: FadingModel, node_count: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes in ``T`` and weights that include the truncated density."""
    zlo, zhi = model.z_bounds
    m = model.peak
    reach = math.sqrt(m * m + _TAIL_EXPONENT)
    tail = _TAIL_EXPONENT / (reach + abs(m))  # reach - |m| without cancellation
    # offsets from the peak keep the weights free of cancellation in far tails
    ylo = max(zlo - m, -tail if m < 0 else -(reach + m))
    yhi = min(zhi - m, tail if m > 0 else reach - m)
    x, w = _leggauss(node_count)
    half = 0.5 * (yhi - ylo)
    y = half * x + 0.5 * (yhi + ylo)
    base = 0.0 if m == zhi and zhi < 0 else (math.log(model.floor) if m == zlo and zlo > 0 else model.mu)
    weights = w * half * np.exp(-0.5 * y * (2 * m + y) - _LOG_SQRT_2PI) / model._peak_mass
    return np.minimum(np.exp(base + model.sigma * y), 1.0), weights


def sample_block(model: FadingModel, seed: int, start: int, count: int, stream: int = 0) -> np.ndarray:
    """Transmittivities for indices ``start .. start+count-1`` of one stream.

    Draw ``k`` depends only on ``(seed, stream, k)``, so any partition of the
    index range gives the same values.
    """
    u = kernels.uniforms(seed, stream, start, count)
    zlo, zhi = model.z_bounds
    log_cdf = np.logaddexp(log_ndtr(zlo), np.log(u) + model.log_mass)
    log_sf = np.logaddexp(log_ndtr(-zhi), np.log1p(-u) + model.log_mass)
    z = np.where(log_cdf < -math.log(2.0), ndtri_exp(log_cdf), -ndtri_exp(log_sf))
    z = np.clip(z, zlo, zhi)
    return np.clip(np.exp(model.mu + model.sigma * z), model.floor, 1.0)


def sample(model: FadingModel, seed: int, index: int, stream: int = 0) -> float:
    return float(sample_block(model, seed, index, 1, stream)[0])


_METHOD_ALIASES = {"quad": "quadrature", "quadrature": "quadrature", "mc": "monte-carlo", "monte-carlo": "monte-carlo"}


@dataclass(frozen=True)
class ExpectationPlan:
    method: str = "quadrature"
    node_count: int = 64
    sample_count: int = 100_000
    seed: int = 0

    def __post_init__(self):
        method = _METHOD_ALIASES.get(self.method)
        if method is None:
            raise DomainError(f"unknown expectation method {self.method!r}")
        object.__setattr__(self, "method", method)
        if self.node_count < 2:
            raise DomainError(f"node_count must be >= 2, got {self.node_count}")
        if self.sample_count < 1:
            raise DomainError(f"sample_count must be >= 1, got {self.sample_count}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


class Expectation(NamedTuple):
    value: float | np.ndarray
    error: float | np.ndarray


def _scalar(a):
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


def _quadrature(models: Sequence[FadingModel], g: Callable, n: int):
    rules = [quadrature_rule(m, n) for m in models]
    nodes = np.meshgrid(*(r[0] for r in rules), indexing="ij")
    weights = rules[0][1]
    for r in rules[1:]:
        weights = np.multiply.outer(weights, r[1])
    vals = np.asarray(g(*(t.ravel() for t in nodes)), dtype=float)
    return vals @ weights.ravel()


def expect(models, g: Callable, plan: ExpectationPlan | None = None) -> Expectation:
    """Expectation of ``g(T1, ..., TN)`` over independent fading channels.

    ``g`` receives one 1-d array per channel and returns an array whose last
    axis matches them (leading axes are averaged independently).  With
    Monte Carlo the error is the standard error; with quadrature it is the
    change against a rule with half as many nodes.
    """
    plan = plan or ExpectationPlan()
    models = [models] if isinstance(models, FadingModel) else list(models)
    if not models:
        raise DomainError("need at least one fading model")
    if plan.method == "quadrature":
        if len(models) > MAX_QUADRATURE_DIM:
            raise DomainError(
                f"quadrature over {len(models)} channels is too costly; use method='monte-carlo'"
            )
        value = _quadrature(models, g, plan.node_count)
        coarse = _quadrature(models, g, max(2, plan.node_count // 2))
        return Expectation(_scalar(value), _scalar(np.abs(value - coarse)))

    total = total_sq = 0.0
    n = plan.sample_count
    for start in range(0, n, _MC_CHUNK):
        count = min(_MC_CHUNK, n - start)
        cols = [sample_block(m, plan.seed, start, count, stream=k) for k, m in enumerate(models)]
        vals = np.asarray(g(*cols), dtype=float)
        total = total + vals.sum(axis=-1)
        total_sq = total_sq + (vals * vals).sum(axis=-1)
    mean = total / n
    var = np.maximum(total_sq / n - mean * mean, 0.0) * (n / (n - 1) if n > 1 else 0.0)
    return Expectation(_scalar(mean), _scalar(np.sqrt(var / n)))
