"""Spatial-mode diversity pipelines for a coherent input over fading channels.

A coherent state is split over ``N`` arms, each arm crosses an independent
lossy thermal channel (optionally amplified before or after it), adjacent
arms may leak into each other through a crosstalk beam splitter, and a tree
of beam splitters recombines the arms into one constructive output mode.

Three routes compute the same output:

* :func:`run_primitive` composes the phase-space maps of :mod:`.gaussian`
  on the full multi-mode state (any ``N``);
* :func:`run_closed_form` evaluates the explicit two-arm covariance blocks
  and mean formulas (``N = 2``);
* :func:`average_fidelity` uses the batched kernels over many channel
  realizations at once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import DomainError
from .fading import DEFAULT_FLOOR, DEFAULT_SIGMA, ExpectationPlan, Expectation, FadingModel, expect, from_mean
from .gaussian import (
    AmplifierParams,
    BeamSplitterParams,
    GaussianState,
    LossyChannelParams,
    apply_amplifier,
    apply_beamsplitter,
    apply_loss,
    discard_mode,
    rescale_mean,
    tensor,
)


class Placement(str, Enum):
    POSTPROCESSING = "postprocessing"
    POST_AMPLIFICATION = "post-amplification"
    PRE_AMPLIFICATION = "pre-amplification"
    NONE = "none"

    @property
    def active(self) -> bool:
        return self in (Placement.POST_AMPLIFICATION, Placement.PRE_AMPLIFICATION)


_KERNEL_MODE = {
    Placement.NONE: kernels.PASSIVE,
    Placement.POSTPROCESSING: kernels.PASSIVE,
    Placement.POST_AMPLIFICATION: kernels.POST_AMPLIFIED,
    Placement.PRE_AMPLIFICATION: kernels.PRE_AMPLIFIED,
}


@dataclass(frozen=True)
class SchemeConfig:
    """How the diversity pipeline is built.

    ``gains`` selects the fixed gain policy (one entry per arm: amplifier
    gains for active placements, output rescale factors for
    postprocessing).  Left as ``None``, gains invert the average channel
    loss.  ``combine_eta`` sets the receiver beam splitter for two arms;
    larger trees use splitters balanced by leaf count.
    """

    placement: Placement = Placement.POSTPROCESSING
    combine_eta: float = 0.5
    crosstalk_eta: float | None = None
    gains: tuple[float, ...] | None = None
    diversity_order: int = 2

    def __post_init__(self):
        object.__setattr__(self, "placement", Placement(self.placement))
        if not 0.0 <= self.combine_eta <= 1.0:
            raise DomainError(f"combine_eta must lie in [0, 1], got {self.combine_eta}")
        if self.crosstalk_eta is not None and not 0.0 <= self.crosstalk_eta <= 1.0:
            raise DomainError(f"crosstalk_eta must lie in [0, 1], got {self.crosstalk_eta}")
        if int(self.diversity_order) != self.diversity_order or self.diversity_order < 1:
            raise DomainError(f"diversity order must be a positive integer, got {self.diversity_order}")
        if self.gains is not None:
            gains = tuple(float(g) for g in self.gains)
            if len(gains) != self.diversity_order:
                raise DomainError(f"fixed gain list needs {self.diversity_order} entries, got {len(gains)}")
            if any(not g >= 1.0 for g in gains):
                raise DomainError("fixed gains must be >= 1")
            object.__setattr__(self, "gains", gains)

    @property
    def gain_policy(self) -> str:
        return "average-inverse" if self.gains is None else "fixed"

    def baseline(self) -> "SchemeConfig":
        """Single-channel scheme with the same compensation strategy."""
        return replace(
            self,
            diversity_order=1,
            crosstalk_eta=None,
            gains=None if self.gains is None else self.gains[:1],
        )


@dataclass(frozen=True)
class CoherentInput:
    x: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.p)):
            raise DomainError("coherent amplitude must be finite")

    def state(self) -> GaussianState:
        return GaussianState.coherent(self.x, self.p)


@dataclass(frozen=True)
class Realization:
    """One draw of the channel transmittivities plus the resolved gains."""

    transmittivities: tuple[float, ...]
    thermal_occupation: float
    gains: tuple[float, ...]

    def __post_init__(self):
        ts = tuple(float(t) for t in self.transmittivities)
        gs = tuple(float(g) for g in self.gains)
        if any(not 0.0 < t <= 1.0 for t in ts):
            raise DomainError(f"transmittivities must lie in (0, 1], got {ts}")
        if any(not g > 0 for g in gs):
            raise DomainError(f"gains must be positive, got {gs}")
        if len(gs) != len(ts):
            raise DomainError("need one gain per channel")
        if self.thermal_occupation < 0:
            raise DomainError(f"thermal occupation must be >= 0, got {self.thermal_occupation}")
        object.__setattr__(self, "transmittivities", ts)
        object.__setattr__(self, "gains", gs)


def resolve_gains(cfg: SchemeConfig, mean_transmittivities: Sequence[float]) -> tuple[float, ...]:
    """Per-arm amplifier gains, or per-output-mode rescale factors for postprocessing."""
    means = tuple(float(t) for t in mean_transmittivities)
    if len(means) != cfg.diversity_order:
        raise DomainError(f"need {cfg.diversity_order} mean transmittivities, got {len(means)}")
    if any(not 0.0 < t <= 1.0 for t in means):
        raise DomainError(f"mean transmittivities must lie in (0, 1], got {means}")
    if cfg.gains is not None:
        return cfg.gains
    if cfg.placement is Placement.NONE:
        return (1.0,) * len(means)
    if cfg.placement is Placement.POSTPROCESSING:
        return tuple(1.0 / math.sqrt(t) for t in means)
    return tuple(1.0 / t for t in means)


# -- combining network ------------------------------------------------------


def _split_ops(modes: list[int]) -> list[BeamSplitterParams]:
    # signal sits on modes[0]; each splitter sends a leaf-count share to each side
    if len(modes) == 1:
        return []
    k = (len(modes) + 1) // 2
    left, right = modes[:k], modes[k:]
    return [BeamSplitterParams(k / len(modes), left[0], right[0])] + _split_ops(left) + _split_ops(right)


def _combine_ops(modes: list[int], top_eta: float | None = None) -> tuple[list[BeamSplitterParams], int]:
    if len(modes) == 1:
        return [], modes[0]
    k = (len(modes) + 1) // 2
    ops_l, root_l = _combine_ops(modes[:k])
    ops_r, root_r = _combine_ops(modes[k:])
    eta = (len(modes) - k) / len(modes) if top_eta is None else top_eta
    return ops_l + ops_r + [BeamSplitterParams(eta, root_l, root_r)], root_r


def _crosstalk_ops(cfg: SchemeConfig) -> list[BeamSplitterParams]:
    if cfg.crosstalk_eta is None:
        return []
    n = cfg.diversity_order
    return [BeamSplitterParams(cfg.crosstalk_eta, i, i + 1) for i in range(0, n - 1, 2)]


def network(cfg: SchemeConfig):
    """Beam-splitter layout: (split ops, crosstalk ops, combine ops, kept mode)."""
    modes = list(range(cfg.diversity_order))
    combine, root = _combine_ops(modes, cfg.combine_eta if cfg.diversity_order == 2 else None)
    return _split_ops(modes), _crosstalk_ops(cfg), combine, root


def _mode_matrix(ops: Sequence[BeamSplitterParams], n: int) -> np.ndarray:
    M = np.eye(n)
    for op in ops:
        t, r = math.sqrt(op.transmittivity), math.sqrt(1.0 - op.transmittivity)
        R = np.eye(n)
        R[np.ix_([op.i, op.j], [op.i, op.j])] = [[t, -r], [r, t]]
        M = R @ M
    return M


def combining_weights(cfg: SchemeConfig) -> tuple[np.ndarray, np.ndarray, int]:
    """Arm amplitudes from the transmitter split and arm weights in the kept output.

    Returns ``(weights, split, kept_mode)``: the kept output's mean is
    ``sum(weights * arm_means)`` and its variance ``sum(weights**2 * arm_variances)``.
    """
    split, crosstalk, combine, root = network(cfg)
    n = cfg.diversity_order
    s = _mode_matrix(split, n)[:, 0]
    u = _mode_matrix(crosstalk + combine, n)[root, :]
    return u, s, root


# -- the three evaluation routes --------------------------------------------


def run_primitive(cfg: SchemeConfig, r: Realization, inp: CoherentInput, trace: list | None = None) -> GaussianState:
    """Kept output mode, built step by step from phase-space maps."""
    n = cfg.diversity_order
    if len(r.transmittivities) != n:
        raise DomainError(f"realization has {len(r.transmittivities)} channels, scheme needs {n}")

    def record(s):
        if trace is not None:
            trace.append(s)
        return s

    state = inp.state()
    if n > 1:
        state = tensor(state, GaussianState.vacuum(n - 1))
    record(state)
    split, crosstalk, combine, root = network(cfg)
    for op in split:
        state = record(apply_beamsplitter(state, op))
    for i, T in enumerate(r.transmittivities):
        if cfg.placement is Placement.PRE_AMPLIFICATION:
            state = record(apply_amplifier(state, i, AmplifierParams(r.gains[i])))
        state = record(apply_loss(state, i, LossyChannelParams(T, r.thermal_occupation)))
        if cfg.placement is Placement.POST_AMPLIFICATION:
            state = record(apply_amplifier(state, i, AmplifierParams(r.gains[i])))
    for op in crosstalk + combine:
        state = record(apply_beamsplitter(state, op))
    for mode in reversed(range(n)):
        if mode != root:
            state = record(discard_mode(state, mode))
    if cfg.placement is Placement.POSTPROCESSING:
        state = record(rescale_mean(state, [r.gains[root]]))
    return state


def _arm_noise(cfg: SchemeConfig, T: float, G: float, n_th: float) -> float:
    env = n_th + 0.5
    if cfg.placement is Placement.POST_AMPLIFICATION:
        return G * (T * (0.5 - env) + env) + (G - 1) / 2
    if cfg.placement is Placement.PRE_AMPLIFICATION:
        return (2 * G - 1) * T / 2 + (1 - T) * env
    return T * (0.5 - env) + env


def _arm_amplitude(cfg: SchemeConfig, T: float, G: float) -> float:
    return math.sqrt(G * T) if cfg.placement.active else math.sqrt(T)


def closed_form_two_mode(cfg: SchemeConfig, r: Realization, inp: CoherentInput) -> GaussianState:
    """Both receiver output modes of the two-arm scheme from the explicit block formulas."""
    if cfg.diversity_order != 2 or len(r.transmittivities) != 2:
        raise DomainError("the closed form covers two-arm diversity only")
    (T1, T2), (G1, G2), n = r.transmittivities, r.gains, r.thermal_occupation
    B1 = _arm_noise(cfg, T1, G1, n)
    B2 = _arm_noise(cfg, T2, G2, n)
    eta = cfg.combine_eta
    se, ce = math.sqrt(eta), math.sqrt(1 - eta)
    if cfg.crosstalk_eta is None:
        row1 = (se, -ce)
        row2 = (ce, se)
    else:
        st, ct = math.sqrt(cfg.crosstalk_eta), math.sqrt(1 - cfg.crosstalk_eta)
        row1 = (se * st - ce * ct, -se * ct - ce * st)
        row2 = (ce * st + se * ct, se * st - ce * ct)
    V1 = row1[0] ** 2 * B1 + row1[1] ** 2 * B2
    V2 = row1[0] * row2[0] * B1 + row1[1] * row2[1] * B2
    V3 = row2[0] ** 2 * B1 + row2[1] ** 2 * B2

    a1 = _arm_amplitude(cfg, T1, G1) / math.sqrt(2)
    a2 = _arm_amplitude(cfg, T2, G2) / math.sqrt(2)
    d1 = row1[0] * a1 + row1[1] * a2
    d2 = row2[0] * a1 + row2[1] * a2
    if cfg.placement is Placement.POSTPROCESSING:
        d1 *= G1
        d2 *= G2
    I2 = np.eye(2)
    cov = np.block([[V1 * I2, V2 * I2], [V2 * I2, V3 * I2]])
    return GaussianState(np.array([d1 * inp.x, d1 * inp.p, d2 * inp.x, d2 * inp.p]), cov)


def run_closed_form(cfg: SchemeConfig, r: Realization, inp: CoherentInput) -> GaussianState:
    """Kept (constructive) output mode of the two-arm scheme."""
    return discard_mode(closed_form_two_mode(cfg, r, inp), 0)


def kept_mode_moments(cfg: SchemeConfig, T: np.ndarray, gains: Sequence[float], n_th: float):
    """Batched kept-mode variance and mean scale factor for realizations ``T`` (samples x arms)."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    u, s, root = combining_weights(cfg)
    g = np.asarray(gains, dtype=float)
    env = n_th + 0.5
    lossy = 0.5 * T + (1 - T) * env
    if cfg.placement is Placement.POST_AMPLIFICATION:
        B = g * lossy + 0.5 * (g - 1)
    elif cfg.placement is Placement.PRE_AMPLIFICATION:
        B = (g - 0.5) * T + (1 - T) * env
    else:
        B = lossy
    amp = np.sqrt(g * T) if cfg.placement.active else np.sqrt(T)
    scale = g[root] if cfg.placement is Placement.POSTPROCESSING else 1.0
    return B @ (u * u), scale * (amp @ (u * s))


# -- fading averages ---------------------------------------------------------


def _models_for(cfg: SchemeConfig, fading) -> list[FadingModel]:
    if isinstance(fading, FadingModel):
        return [fading] * cfg.diversity_order
    models = list(fading)
    if len(models) != cfg.diversity_order:
        raise DomainError(f"need {cfg.diversity_order} fading models, got {len(models)}")
    return models


def average_fidelity(
    cfg: SchemeConfig,
    fading,
    n_th: float,
    inp: CoherentInput = CoherentInput(),
    plan: ExpectationPlan | None = None,
) -> Expectation:
    """Fidelity of the kept output with the input, averaged over i.i.d. fading."""
    if n_th < 0:
        raise DomainError(f"thermal occupation must be >= 0, got {n_th}")
    models = _models_for(cfg, fading)
    gains = np.asarray(resolve_gains(cfg, [m.mean for m in models]))
    u, s, root = combining_weights(cfg)
    arm_gains = gains if cfg.placement.active else np.ones_like(gains)
    rescale = float(gains[root]) if cfg.placement is Placement.POSTPROCESSING else 1.0
    mode = _KERNEL_MODE[cfg.placement]

    def fid(*ts):
        return kernels.diversity_fidelity(np.column_stack(ts), u, s, arm_gains, mode, n_th, rescale, inp.x, inp.p)

    return expect(models, fid, plan)


class FidelityComparison(NamedTuple):
    diversity: float
    baseline: float
    log10_ratio: float
    diversity_error: float
    baseline_error: float


def compare_fidelity(
    cfg: SchemeConfig,
    fading,
    n_th: float,
    inp: CoherentInput = CoherentInput(),
    plan: ExpectationPlan | None = None,
) -> FidelityComparison:
    """Average fidelity of the diversity scheme against its single-channel baseline."""
    div = average_fidelity(cfg, fading, n_th, inp, plan)
    models = _models_for(cfg, fading)
    base = average_fidelity(cfg.baseline(), models[:1], n_th, inp, plan)
    return FidelityComparison(
        div.value, base.value, math.log10(div.value / base.value), div.error, base.error
    )


def map_cells(fn, cells, workers: int = 1) -> list:
    """``[fn(c) for c in cells]``, optionally on a thread pool; order is preserved."""
    cells = list(cells)
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def fidelity_ratio_grid(
    placement,
    mean_grid: Sequence[float],
    nth_grid: Sequence[float],
    sigma: float = DEFAULT_SIGMA,
    crosstalk_eta: float | None = None,
    plan: ExpectationPlan | None = None,
    inp: CoherentInput = CoherentInput(),
    combine_eta: float = 0.5,
    floor: float = DEFAULT_FLOOR,
    workers: int = 1,
) -> np.ndarray:
    """log10 of the two-arm to single-channel average fidelity ratio over <T> x n_th."""
    cfg = SchemeConfig(placement, combine_eta=combine_eta, crosstalk_eta=crosstalk_eta)
    models = {t: from_mean(t, sigma, floor) for t in mean_grid}
    cells = [(t, n) for t in mean_grid for n in nth_grid]
    out = map_cells(lambda c: compare_fidelity(cfg, models[c[0]], c[1], inp, plan).log10_ratio, cells, workers)
    return np.array(out).reshape(len(mean_grid), len(nth_grid))


def crosstalk_ratio_grid(
    placement,
    mean_grid: Sequence[float],
    eta_grid: Sequence[float],
    n_th: float,
    sigma: float = DEFAULT_SIGMA,
    plan: ExpectationPlan | None = None,
    inp: CoherentInput = CoherentInput(),
    combine_eta: float = 0.5,
    floor: float = DEFAULT_FLOOR,
    workers: int = 1,
) -> np.ndarray:
    """log10 fidelity ratio over <T> x crosstalk transmittivity at fixed n_th."""
    models = {t: from_mean(t, sigma, floor) for t in mean_grid}
    cells = [(t, e) for t in mean_grid for e in eta_grid]

    def cell(c):
        cfg = SchemeConfig(placement, combine_eta=combine_eta, crosstalk_eta=c[1])
        return compare_fidelity(cfg, models[c[0]], n_th, inp, plan).log10_ratio

    return np.array(map_cells(cell, cells, workers)).reshape(len(mean_grid), len(eta_grid))
