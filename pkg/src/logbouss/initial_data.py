"""
Initial data and prescribed velocities on the periodic grid.

Bumps are periodic (von Mises profile) so they stay exactly smooth across
the boundary; everything random takes an explicit seed.
"""

import numpy as np

from .spectral import Grid2D, SpectralField, random_bandlimited


def von_mises_bump(grid: Grid2D, center=(np.pi, np.pi), width: float = 0.5,
                   amplitude: float = 1.0) -> SpectralField:
    """Periodic Gaussian-like bump ``A exp((cos(x1-c1) + cos(x2-c2) - 2) / width^2)``.

    Coordinates are in units of the default ``2 pi`` period; other periods
    are handled by rescaling.
    """
    s = grid.scale
    c1, c2 = center

    def f(x1, x2):
        return amplitude * np.exp((np.cos(s * x1 - c1) + np.cos(s * x2 - c2) - 2.0) / width ** 2)

    return SpectralField.from_function(grid, f)


def shear_profile(grid: Grid2D, amplitude: float = 1.0, k: int = 1) -> SpectralField:
    """``A sin(k x2)``, a function of ``x2`` only."""
    s = grid.scale
    return SpectralField.from_function(grid, lambda x1, x2: amplitude * np.sin(k * s * x2) + 0 * x1)


def smooth_shear_layer(grid: Grid2D, thickness: float = 0.3, perturbation: float = 0.05,
                       k: int = 2) -> SpectralField:
    """Vorticity of a periodic double shear layer with a sinusoidal perturbation.

    The layers are von Mises ridges of the given ``thickness``; the mean is
    removed so the field is a valid vorticity.
    """
    s = grid.scale

    def w(x1, x2):
        y = s * x2
        up = np.exp((np.cos(y - np.pi / 2) - 1) / thickness ** 2)
        down = np.exp((np.cos(y - 3 * np.pi / 2) - 1) / thickness ** 2)
        return (up - down) * (1 + perturbation * np.cos(k * s * x1))

    f = SpectralField.from_function(grid, w)
    return f - f.mean()


def taylor_green_vorticity(grid: Grid2D, amplitude: float = 1.0, k: int = 1) -> SpectralField:
    """Vorticity ``2 A k sin(k x1) sin(k x2)`` of the Taylor-Green cell array."""
    s = grid.scale
    return SpectralField.from_function(
        grid, lambda x1, x2: 2 * amplitude * k * np.sin(k * s * x1) * np.sin(k * s * x2))


def random_field(grid: Grid2D, seed: int, kmax: float = 8.0, kmin: float = 1.0,
                 slope: float = 0.0, zero_mean: bool = False) -> SpectralField:
    """Seeded band-limited random field normalized to unit sup norm."""
    f = random_bandlimited(grid, kmax, np.random.default_rng(seed), kmin=kmin, slope=slope)
    return f - f.mean() if zero_mean else f


# --------------------------------------------------------------------------
# Velocities: each returns a pair of SpectralFields

def shear_velocity(grid: Grid2D, amplitude: float = 1.0, k: int = 1):
    """``v = (A sin(k x2), 0)``."""
    return shear_profile(grid, amplitude, k), SpectralField.zeros(grid)


def taylor_green_velocity(grid: Grid2D, amplitude: float = 1.0, k: int = 1):
    """``v = A (sin(k x1) cos(k x2), -cos(k x1) sin(k x2))``."""
    s = grid.scale
    v1 = SpectralField.from_function(grid, lambda x1, x2: amplitude * np.sin(k * s * x1) * np.cos(k * s * x2))
    v2 = SpectralField.from_function(grid, lambda x1, x2: -amplitude * np.cos(k * s * x1) * np.sin(k * s * x2))
    return v1, v2


def constant_velocity(grid: Grid2D, c1: float = 1.0, c2: float = 0.0):
    return SpectralField.zeros(grid) + c1, SpectralField.zeros(grid) + c2
