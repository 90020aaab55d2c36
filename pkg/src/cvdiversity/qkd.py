"""Secret key rates of Gaussian-modulated coherent-state CV-QKD.

Direct reconciliation against a collective attack:
``K = beta * I(A:B) - chi(E:B)``, evaluated at an effective transmittance
that condenses the ``N`` diversity branches into one channel.

Quantities are in shot-noise units by default (vacuum variance 1,
environment variance ``W = 2 n_th + 1``).  ``Units.PAPER`` keeps the mixed
convention ``W = n_th + 1/2`` with entropies ``g(nu - 1/2)``; it is only
defined for ``n_th >= 1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import DomainError, UnphysicalStateError
from .fading import ExpectationPlan, FadingModel, expect
from .gaussian import PHYSICALITY_TOL, entropy_g, symplectic_spectrum


class Detection(IntEnum):
    HOMODYNE = 1
    HETERODYNE = 2

    @classmethod
    def parse(cls, value) -> "Detection":
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise DomainError(f"unknown detection {value!r}") from None
        return cls(value)


class Units(str, Enum):
    SHOT_NOISE = "shot-noise"
    PAPER = "paper"


class TEffRule(str, Enum):
    ARITHMETIC = "arithmetic"
    AMPLITUDE = "amplitude"


@dataclass(frozen=True)
class KeyRateConfig:
    v_in: float = 10.0
    n_th: float = 0.0
    beta: float = 1.0
    detection: Detection = Detection.HETERODYNE
    units: Units = Units.SHOT_NOISE
    t_eff_rule: TEffRule = TEffRule.ARITHMETIC

    def __post_init__(self):
        object.__setattr__(self, "detection", Detection.parse(self.detection))
        object.__setattr__(self, "units", Units(self.units))
        object.__setattr__(self, "t_eff_rule", TEffRule(self.t_eff_rule))
        if not self.v_in >= 1.0 or not math.isfinite(self.v_in):
            raise DomainError(f"modulation variance v_in must be >= 1, got {self.v_in}")
        if not self.n_th >= 0.0 or not math.isfinite(self.n_th):
            raise DomainError(f"n_th must be >= 0, got {self.n_th}")
        if not 0.0 <= self.beta <= 1.0:
            raise DomainError(f"reconciliation efficiency beta must lie in [0, 1], got {self.beta}")

    @property
    def nu(self) -> int:
        return int(self.detection)

    @property
    def paper_units(self) -> bool:
        return self.units is Units.PAPER

    @property
    def thermal_variance(self) -> float:
        return self.n_th + 0.5 if self.paper_units else 2.0 * self.n_th + 1.0

    @property
    def vacuum(self) -> float:
        return 0.5 if self.paper_units else 1.0


def effective_transmittance(transmittivities: Sequence[float], rule=TEffRule.ARITHMETIC) -> float:
    ts = np.asarray(transmittivities, dtype=float).ravel()
    if ts.size == 0:
        raise DomainError("need at least one transmittivity")
    if np.any(~(ts > 0)) or np.any(ts > 1):
        raise DomainError(f"transmittivities must lie in (0, 1], got {ts.tolist()}")
    if TEffRule(rule) is TEffRule.AMPLITUDE:
        return float(np.mean(np.sqrt(ts)) ** 2)
    return float(np.mean(ts))


@dataclass(frozen=True)
class EffectiveChannel:
    t_eff: float
    thermal_variance: float
    units: Units = Units.SHOT_NOISE

    def __post_init__(self):
        object.__setattr__(self, "units", Units(self.units))
        if not 0.0 < self.t_eff <= 1.0:
            raise DomainError(f"effective transmittance must lie in (0, 1], got {self.t_eff}")
        if self.units is Units.SHOT_NOISE and not self.thermal_variance >= 1.0:
            raise DomainError(f"thermal variance W must be >= 1 in shot-noise units, got {self.thermal_variance}")

    @classmethod
    def of(cls, cfg: KeyRateConfig, transmittivities: Sequence[float]) -> "EffectiveChannel":
        return cls(effective_transmittance(transmittivities, cfg.t_eff_rule), cfg.thermal_variance, cfg.units)


def _check_t(t_eff: float) -> float:
    if not 0.0 <= t_eff <= 1.0:
        raise DomainError(f"effective transmittance must lie in [0, 1], got {t_eff}")
    return float(t_eff)


def mutual_information(cfg: KeyRateConfig, t_eff: float) -> float:
    """Alice-Bob Shannon information in bits per use."""
    T = _check_t(t_eff)
    nu = cfg.nu
    denom = 1.0 + (1.0 / nu) * (1.0 - T) * (2.0 * cfg.n_th - 1.0)
    if denom <= 0:
        raise DomainError(
            f"SNR denominator {denom:.3g} <= 0 at T_eff={T}, n_th={cfg.n_th} ({cfg.detection.name.lower()})"
        )
    return 0.5 * nu * math.log2(1.0 + nu * T * (cfg.v_in - 1.0) / denom)


def environment_covariance(cfg: KeyRateConfig, t_eff: float) -> tuple[float, float, float]:
    """Blocks ``(a, b, c)`` of Eve's two-mode state ``[[a I, c Z], [c Z, b I]]``."""
    T = _check_t(t_eff)
    W = cfg.thermal_variance
    if W * W < 1.0:
        raise DomainError(
            f"W = {W} < 1 makes the correlation term imaginary; the paper-units convention "
            "needs n_th >= 1/2 (use shot-noise units)"
        )
    return (1.0 - T) * cfg.v_in + T * W, W, math.sqrt(T * (W * W - 1.0))


def environment_matrix(a: float, b: float, c: float) -> np.ndarray:
    I, Z = np.eye(2), np.diag([1.0, -1.0])
    return np.block([[a * I, c * Z], [c * Z, b * I]])


def environment_spectrum(cfg: KeyRateConfig, t_eff: float) -> tuple[float, float]:
    a, b, c = environment_covariance(cfg, t_eff)
    z = math.sqrt((a + b) ** 2 - 4.0 * c * c)
    return 0.5 * (z + (b - a)), 0.5 * (z - (b - a))


def conditional_eigenvalue(cfg: KeyRateConfig, t_eff: float) -> float:
    """Symplectic eigenvalue of Alice's mode conditioned on Bob's measurement."""
    T = _check_t(t_eff)
    k, W = cfg.v_in, cfg.thermal_variance
    h = T * (k - 1.0) + (W - 1.0) * (1.0 - T) + 1.0
    if h <= 0:
        raise DomainError(f"h = {h:.3g} <= 0 at T_eff={T}")
    g2 = T * (k * k - 1.0)
    if cfg.detection is Detection.HETERODYNE:
        return k - g2 / (h + 1.0)
    inner = k * (k - g2 / h)
    if inner < 0:
        raise DomainError(f"homodyne conditional variance is negative at T_eff={T}")
    return math.sqrt(inner)


def _entropy(cfg: KeyRateConfig, nu: float) -> float:
    vac = cfg.vacuum
    if nu < vac - PHYSICALITY_TOL:
        raise UnphysicalStateError(f"symplectic eigenvalue {nu} below vacuum value {vac}")
    x = max(nu - vac, 0.0)
    return entropy_g(x if cfg.paper_units else 0.5 * x)


def holevo_information(cfg: KeyRateConfig, t_eff: float) -> float:
    """Eve's Holevo information ``S(E) - S(E|B)`` in bits per use."""
    nu_p, nu_m = environment_spectrum(cfg, t_eff)
    nu_c = conditional_eigenvalue(cfg, t_eff)
    return _entropy(cfg, nu_p) + _entropy(cfg, nu_m) - _entropy(cfg, nu_c)


def environment_spectrum_numeric(cfg: KeyRateConfig, t_eff: float) -> np.ndarray:
    """Symplectic spectrum of the assembled environment matrix (eigen-solver route)."""
    return symplectic_spectrum(environment_matrix(*environment_covariance(cfg, t_eff)))


class KeyRate(NamedTuple):
    raw: float
    clamped: float


def key_rate_at(cfg: KeyRateConfig, t_eff: float) -> KeyRate:
    k = cfg.beta * mutual_information(cfg, t_eff) - holevo_information(cfg, t_eff)
    return KeyRate(k, max(0.0, k))


def key_rate_realization(cfg: KeyRateConfig, transmittivities: Sequence[float]) -> KeyRate:
    return key_rate_at(cfg, effective_transmittance(transmittivities, cfg.t_eff_rule))


class AverageKeyRate(NamedTuple):
    raw: float
    clamped: float
    raw_error: float
    clamped_error: float

    def scaled(self, factor: float) -> "AverageKeyRate":
        return AverageKeyRate(*(factor * v for v in self))


def _batched_rates(cfg: KeyRateConfig, t_eff: np.ndarray) -> np.ndarray:
    raw, min_excess = kernels.key_rates(t_eff, cfg.v_in, cfg.n_th, cfg.beta, cfg.nu, cfg.paper_units)
    bad = np.flatnonzero(~np.isfinite(raw))
    if bad.size:
        # the scalar reference raises the specific error for the offending point
        key_rate_at(cfg, float(t_eff[bad[0]]))
        raise DomainError(f"key rate undefined at T_eff={t_eff[bad[0]]}")
    if min_excess < -PHYSICALITY_TOL:
        raise UnphysicalStateError(f"symplectic eigenvalue {min_excess} below the vacuum value")
    return np.stack([raw, np.maximum(raw, 0.0)])


def average_key_rate_diversity(
    cfg: KeyRateConfig, fading, order: int, plan: ExpectationPlan | None = None
) -> AverageKeyRate:
    """Key rate averaged over ``order`` i.i.d. fading branches combined into one channel."""
    if int(order) != order or order < 1:
        raise DomainError(f"diversity order must be a positive integer, got {order}")
    models = [fading] * order if isinstance(fading, FadingModel) else list(fading)
    if len(models) != order:
        raise DomainError(f"need {order} fading models, got {len(models)}")
    amplitude = cfg.t_eff_rule is TEffRule.AMPLITUDE

    def rates(*ts):
        stacked = np.vstack(ts)
        t_eff = np.mean(np.sqrt(stacked), axis=0) ** 2 if amplitude else np.mean(stacked, axis=0)
        return _batched_rates(cfg, t_eff)

    res = expect(models, rates, plan)
    return AverageKeyRate(float(res.value[0]), float(res.value[1]), float(res.error[0]), float(res.error[1]))


def average_key_rate_multiplexing(
    cfg: KeyRateConfig, fading, order: int, plan: ExpectationPlan | None = None
) -> AverageKeyRate:
    """``order`` independent channels each carrying its own key."""
    if int(order) != order or order < 1:
        raise DomainError(f"multiplexing order must be a positive integer, got {order}")
    model = fading if isinstance(fading, FadingModel) else list(fading)[0]
    return average_key_rate_diversity(cfg, model, 1, plan).scaled(order)
