"""Local covariograms, pixel perimeters and realisability screening of two-point functions."""

__version__ = "0.1.0"

from .grid import PixelSet, Window  # noqa: E402
from .covariogram import (  # noqa: E402
    local_covariogram,
    perimeter_B,
    sigma,
    weighted_perimeter,
)
from .polytope import (  # noqa: E402
    Functional,
    S2Curve,
    minimize_functional,
    realisability_report,
)

__all__ = [
    "PixelSet",
    "Window",
    "local_covariogram",
    "perimeter_B",
    "sigma",
    "weighted_perimeter",
    "Functional",
    "S2Curve",
    "minimize_functional",
    "realisability_report",
]
