"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the domain where a formula or model is defined."""


class UnphysicalStateError(DomainError):
    """A covariance matrix violates the uncertainty bound, or a fidelity is undefined."""
