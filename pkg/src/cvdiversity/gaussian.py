"""Gaussian phase-space algebra for bosonic modes.

States are stored as a mean vector and covariance matrix in the quadrature
ordering ``(x1, p1, x2, p2, ...)`` with the vacuum variance equal to 1/2
(natural units).  Every operation returns a new, validated state; nothing is
mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError, UnphysicalStateError

#: symmetry and symplectic-form checks
SYMMETRY_TOL = 1e-12
#: slack on the uncertainty bound, absorbs drift in long pipelines
PHYSICALITY_TOL = 1e-9
VACUUM_VARIANCE = 0.5


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianState:
    """An n-mode Gaussian state given by its first and second moments."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen(np.ravel(self.mean))
        cov = _frozen(self.cov)
        if mean.size == 0 or mean.size % 2:
            raise DomainError(f"mean vector must have even, non-zero length, got {mean.size}")
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise DomainError("state moments must be finite")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise DomainError("covariance matrix is not symmetric")
        nu = symplectic_spectrum(cov)
        if nu[-1] < VACUUM_VARIANCE - PHYSICALITY_TOL:
            raise UnphysicalStateError(
                f"smallest symplectic eigenvalue {nu[-1]:.3g} violates the uncertainty bound 1/2"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def num_modes(self) -> int:
        return self.mean.size // 2

    @classmethod
    def vacuum(cls, num_modes: int = 1) -> "GaussianState":
        return cls(np.zeros(2 * num_modes), VACUUM_VARIANCE * np.eye(2 * num_modes))

    @classmethod
    def coherent(cls, x: float, p: float) -> "GaussianState":
        return cls(np.array([x, p]), VACUUM_VARIANCE * np.eye(2))

    @classmethod
    def thermal(cls, n_th: float) -> "GaussianState":
        if n_th < 0:
            raise DomainError(f"thermal occupation must be >= 0, got {n_th}")
        return cls(np.zeros(2), (n_th + VACUUM_VARIANCE) * np.eye(2))

    def is_pure(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(symplectic_spectrum(self.cov) - VACUUM_VARIANCE) < tol))

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return (
            self.num_modes == other.num_modes
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )


@dataclass(frozen=True)
class LossyChannelParams:
    """Thermal-loss channel: transmittivity ``T`` and environment occupation ``n_th``."""

    transmittivity: float
    thermal_occupation: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.transmittivity <= 1.0:
            raise DomainError(f"transmittivity must lie in [0, 1], got {self.transmittivity}")
        if self.thermal_occupation < 0.0:
            raise DomainError(f"thermal occupation must be >= 0, got {self.thermal_occupation}")

    @property
    def scaling(self) -> np.ndarray:
        return np.sqrt(self.transmittivity) * np.eye(2)

    @property
    def noise(self) -> np.ndarray:
        return (1.0 - self.transmittivity) * (self.thermal_occupation + VACUUM_VARIANCE) * np.eye(2)


@dataclass(frozen=True)
class AmplifierParams:
    """Phase-insensitive amplifier with power gain ``G >= 1``.

    The added noise is ``(G - 1)/2`` per quadrature, the quantum limit in
    units where the vacuum variance is 1/2.
    """

    gain: float

    def __post_init__(self):
        if not self.gain >= 1.0:
            raise DomainError(f"amplifier gain must be >= 1, got {self.gain}")

    @property
    def scaling(self) -> np.ndarray:
        return np.sqrt(self.gain) * np.eye(2)

    @property
    def noise(self) -> np.ndarray:
        return 0.5 * (self.gain - 1.0) * np.eye(2)


@dataclass(frozen=True)
class BeamSplitterParams:
    """Beam splitter of transmittivity ``eta`` coupling modes ``i`` and ``j``.

    Output ``j`` carries ``sqrt(1-eta) d_i + sqrt(eta) d_j``.
    """

    transmittivity: float
    i: int = 0
    j: int = 1

    def __post_init__(self):
        if not 0.0 <= self.transmittivity <= 1.0:
            raise DomainError(f"beam splitter transmittivity must lie in [0, 1], got {self.transmittivity}")
        if self.i == self.j or self.i < 0 or self.j < 0:
            raise DomainError(f"beam splitter needs two distinct non-negative modes, got ({self.i}, {self.j})")

    @property
    def matrix(self) -> np.ndarray:
        return beamsplitter_matrix(self.transmittivity)


@lru_cache(maxsize=16)
def _omega(num_modes: int) -> np.ndarray:
    return _frozen(np.kron(np.eye(num_modes), np.array([[0.0, 1.0], [-1.0, 0.0]])))


def symplectic_form(num_modes: int) -> np.ndarray:
    return _omega(num_modes).copy()


def beamsplitter_matrix(eta: float) -> np.ndarray:
    """4x4 phase-space matrix of a beam splitter acting on (d_i, d_j)."""
    t, r = np.sqrt(eta), np.sqrt(1.0 - eta)
    return np.array([[t, 0, -r, 0], [0, t, 0, -r], [r, 0, t, 0], [0, r, 0, t]], dtype=float)


def symplectic_spectrum(cov) -> np.ndarray:
    """Symplectic eigenvalues of ``cov``, one per mode, sorted descending."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise DomainError(f"expected a square matrix of even dimension, got shape {cov.shape}")
    if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
        raise DomainError("covariance matrix is not symmetric")
    n = cov.shape[0] // 2
    # eigenvalues of Omega V come in pairs +-i nu
    ev = np.abs(np.linalg.eigvals(_omega(n) @ cov).imag)
    return np.sort(ev)[::-1][::2].copy()


def entropy_g(x):
    """Bosonic entropy function ``(x+1) log2(x+1) - x log2 x`` with g(0) = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("entropy function is defined for x >= 0 only")
    safe = np.where(x > 0, x, 1.0)
    out = (x + 1.0) * np.log2(x + 1.0) - np.where(x > 0, x * np.log2(safe), 0.0)
    return out if out.ndim else float(out)


def _check_mode(s: GaussianState, mode: int) -> None:
    if not 0 <= mode < s.num_modes:
        raise DomainError(f"mode {mode} out of range for a {s.num_modes}-mode state")


def _apply_local(s: GaussianState, mode: int, scale: float, noise: float) -> GaussianState:
    # X = scale * I on one mode, everything else identity
    _check_mode(s, mode)
    sl = slice(2 * mode, 2 * mode + 2)
    factor = np.ones(2 * s.num_modes)
    factor[sl] = scale
    cov = s.cov * np.outer(factor, factor)
    cov[sl, sl] += noise * np.eye(2)
    return GaussianState(s.mean * factor, cov)


def tensor(a: GaussianState, b: GaussianState) -> GaussianState:
    n = a.cov.shape[0]
    m = b.cov.shape[0]
    cov = np.zeros((n + m, n + m))
    cov[:n, :n] = a.cov
    cov[n:, n:] = b.cov
    return GaussianState(np.concatenate([a.mean, b.mean]), cov)


def apply_loss(s: GaussianState, mode: int, ch: LossyChannelParams) -> GaussianState:
    t = ch.transmittivity
    return _apply_local(s, mode, np.sqrt(t), (1.0 - t) * (ch.thermal_occupation + VACUUM_VARIANCE))


def apply_amplifier(s: GaussianState, mode: int, amp: AmplifierParams) -> GaussianState:
    return _apply_local(s, mode, np.sqrt(amp.gain), 0.5 * (amp.gain - 1.0))


def apply_beamsplitter(s: GaussianState, bs: BeamSplitterParams) -> GaussianState:
    _check_mode(s, bs.i)
    _check_mode(s, bs.j)
    idx = [2 * bs.i, 2 * bs.i + 1, 2 * bs.j, 2 * bs.j + 1]
    S = np.eye(2 * s.num_modes)
    S[np.ix_(idx, idx)] = bs.matrix
    return GaussianState(S @ s.mean, S @ s.cov @ S.T)


def discard_mode(s: GaussianState, mode: int) -> GaussianState:
    """Partial trace over ``mode``."""
    _check_mode(s, mode)
    if s.num_modes < 2:
        raise DomainError("cannot discard the last remaining mode")
    keep = np.delete(np.arange(2 * s.num_modes), [2 * mode, 2 * mode + 1])
    return GaussianState(s.mean[keep], s.cov[np.ix_(keep, keep)])


def keep_mode(s: GaussianState, mode: int) -> GaussianState:
    """Reduced single-mode state of ``mode`` (discard every other mode)."""
    _check_mode(s, mode)
    sl = slice(2 * mode, 2 * mode + 2)
    return GaussianState(s.mean[sl], s.cov[sl, sl])


def rescale_mean(s: GaussianState, factors: Sequence[float]) -> GaussianState:
    """Classical post-processing gain: multiply each mode's mean by its factor."""
    factors = np.asarray(factors, dtype=float).ravel()
    if factors.size != s.num_modes:
        raise DomainError(f"need one factor per mode ({s.num_modes}), got {factors.size}")
    if np.any(factors <= 0):
        raise DomainError("rescale factors must be positive")
    return GaussianState(s.mean * np.repeat(factors, 2), s.cov)


def fidelity(a: GaussianState, b: GaussianState) -> float:
    """Phase-space overlap of two single-mode Gaussian states.

    ``F = exp(-d^T (V1+V2)^-1 d / 2) / sqrt(det(V1+V2))`` with ``d`` the mean
    difference.  This is the Uhlmann fidelity whenever one of the states is
    pure, which covers every comparison against a coherent input.
    """
    if a.num_modes != b.num_modes:
        raise DomainError("fidelity needs states with equal numbers of modes")
    if a.num_modes != 1:
        raise DomainError("fidelity is implemented for single-mode states only")
    total = a.cov + b.cov
    det = np.linalg.det(total)
    if not det > 0:
        raise UnphysicalStateError("V1 + V2 is singular; fidelity undefined")
    delta = a.mean - b.mean
    quad = float(delta @ np.linalg.solve(total, delta))
    return float(np.exp(-0.5 * quad) / np.sqrt(det))
