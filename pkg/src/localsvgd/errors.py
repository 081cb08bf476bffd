"""Exception types shared across the package."""


class DegenerateBandwidthError(ValueError):
    """All pairwise particle distances collapsed to zero; no bandwidth exists."""


class NonFiniteScoreError(FloatingPointError):
    """A score evaluation returned NaN or infinity at a known particle."""


class InvalidCoefficientError(ValueError):
    """A diffusion coefficient field is non-positive somewhere on the grid."""


class SingularModelError(ValueError):
    """The forward map is evaluated exactly at a singular input."""
