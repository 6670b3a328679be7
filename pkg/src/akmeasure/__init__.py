"""Gaussian symplectic toolkit and Arthurs-Kelly joint-measurement simulator."""

__version__ = "0.1.0"

from . import ak_model, estimation, formats, spectral, symplectic, wavefield  # noqa: E402,F401
from .ak_model import AKParams, SystemMoments  # noqa: E402,F401

__all__ = [
    "ak_model",
    "estimation",
    "formats",
    "spectral",
    "symplectic",
    "wavefield",
    "AKParams",
    "SystemMoments",
]
