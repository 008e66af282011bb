"""Numerical laboratory for transport-diffusion and Boussinesq systems with
logarithmically weakened fractional dissipation."""

__version__ = "0.1.0"

from .kernel import PhiParams, askey_check, kernel_eval, phi_derivatives  # noqa: E402
from .littlewood_paley import BesovSpec, besov_norm, build_filter_bank  # noqa: E402
from .spectral import Grid2D, SpectralField, lp_norm  # noqa: E402

__all__ = [
    "BesovSpec",
    "Grid2D",
    "PhiParams",
    "SpectralField",
    "askey_check",
    "besov_norm",
    "build_filter_bank",
    "kernel_eval",
    "lp_norm",
    "phi_derivatives",
]
