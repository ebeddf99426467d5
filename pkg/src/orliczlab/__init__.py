"""Numerical laboratory for Orlicz cochain and differential-form calculus."""

from orliczlab.orlicz import (
    MeasureSpace,
    NormResult,
    YoungFunction,
    luxemburg_norm,
    modular,
)

__all__ = [
    "MeasureSpace",
    "NormResult",
    "YoungFunction",
    "luxemburg_norm",
    "modular",
]

__version__ = "0.1.0"
