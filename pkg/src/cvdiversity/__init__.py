"""Gaussian-state simulation of spatial-mode diversity over fading channels."""

__version__ = "0.1.0"

from .errors import DomainError, UnphysicalStateError
from .fading import ExpectationPlan, FadingModel
from .diversity import CoherentInput, Placement, SchemeConfig
from .qkd import Detection, KeyRateConfig, TEffRule, Units

__all__ = [
    "CoherentInput",
    "Detection",
    "DomainError",
    "ExpectationPlan",
    "FadingModel",
    "KeyRateConfig",
    "Placement",
    "SchemeConfig",
    "TEffRule",
    "UnphysicalStateError",
    "Units",
    "__version__",
]
