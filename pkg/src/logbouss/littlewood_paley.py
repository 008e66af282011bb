"""
Dyadic (Littlewood-Paley) blocks on the periodic grid and generalized Besov norms.

The low-pass profile ``chi`` equals 1 on ``|xi| <= 1/2`` and vanishes for
``|xi| >= 1``, with a C-infinity transition built from ``exp(-1/x)``. The
annulus profile is ``phi(xi) = chi(xi/2) - chi(xi)``, supported in
``1/2 <= |xi| <= 2`` with ``phi(1) = 1``, so the partition of unity holds by
telescoping.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .spectral import Grid2D, SpectralField, lp_norm


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xi = np.where(inside, x, 0.5)
    a = np.exp(-1.0 / xi)
    b = np.exp(-1.0 / (1.0 - xi))
    return np.where(x <= 0, 0.0, np.where(x >= 1, 1.0, a / (a + b)))


def chi_profile(rho):
    return 1.0 - _smooth_step(2.0 * np.asarray(rho, dtype=float) - 1.0)


def phi_profile(rho):
    rho = np.asarray(rho, dtype=float)
    return chi_profile(rho / 2.0) - chi_profile(rho)


@dataclass(frozen=True)
class DyadicFilterBank:
    """Filter bank bound to a grid; ``q`` ranges over ``-1 .. q_max``."""

    grid: Grid2D
    q_max: int

    chi = staticmethod(chi_profile)
    phi = staticmethod(phi_profile)

    @cached_property
    def _filters(self):
        k = self.grid.kmag
        out = {-1: chi_profile(k)}
        for q in range(0, self.q_max + 2):
            out[q] = phi_profile(k / 2.0 ** q)
        return out

    def filter(self, q: int) -> np.ndarray:
        """Grid multiplier of ``Delta_q``."""
        self._check_q(q, allow_past=True)
        if q > self.q_max + 1:
            return phi_profile(self.grid.kmag / 2.0 ** q)
        return self._filters[q]

    def low_pass_filter(self, q: int) -> np.ndarray:
        """Grid multiplier of ``S_q = sum_{j < q} Delta_j`` (equals ``chi(2^-q xi)``)."""
        if q < 0:
            return np.zeros(self.grid.spectral_shape)
        return chi_profile(self.grid.kmag / 2.0 ** q)

    @property
    def blocks(self):
        return range(-1, self.q_max + 1)

    @property
    def resolved_radius(self) -> float:
        """Frequencies with ``|xi|`` up to this value are covered by the partition."""
        return 2.0 ** self.q_max

    def _check_q(self, q, allow_past=False):
        if not isinstance(q, (int, np.integer)) or q < -1 or (q > self.q_max and not allow_past):
            raise ValueError(f"block index must lie in [-1, {self.q_max}], got {q!r}")


@dataclass(frozen=True)
class BesovSpec:
    """Indices of the generalized Besov norm ``B^{s, s_log}_{p, r}``."""

    s: float = 0.0
    s_log: float = 0.0
    p: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        for name in ("p", "r"):
            v = float(getattr(self, name))
            if not (v >= 1 or math.isinf(v)):
                raise ValueError(f"Besov index {name} must lie in [1, inf], got {v}")
        for name in ("s", "s_log"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Besov index {name} must be finite")


def q_max_for(grid: Grid2D) -> int:
    top = grid.dealias_fraction * grid.n / 2 * grid.scale
    return int(math.floor(math.log2(top))) - 1


def build_filter_bank(grid: Grid2D) -> DyadicFilterBank:
    q_max = q_max_for(grid)
    if q_max < 1:
        raise ValueError(f"grid n={grid.n} too small to host 3 dyadic blocks (q_max={q_max})")
    return DyadicFilterBank(grid, q_max)


def dyadic_block(f: SpectralField, q: int, bank: DyadicFilterBank) -> SpectralField:
    bank._check_q(q)
    _check_grid(f, bank)
    return SpectralField(f.grid, coeffs=f.coeffs * bank.filter(q))


def low_pass(f: SpectralField, q: int, bank: DyadicFilterBank) -> SpectralField:
    """``S_q f``; for ``q > q_max`` this is ``S_{q_max + 1} f``."""
    _check_grid(f, bank)
    if not isinstance(q, (int, np.integer)) or q < -1:
        raise ValueError(f"low-pass index must be >= -1, got {q!r}")
    return SpectralField(f.grid, coeffs=f.coeffs * bank.low_pass_filter(min(q, bank.q_max + 1)))


def _check_grid(f, bank):
    if f.grid != bank.grid:
        raise ValueError("field and filter bank live on different grids")


def block_norms(f: SpectralField, p, bank: DyadicFilterBank, refine: int = 1) -> np.ndarray:
    """``||Delta_q f||_{L^p}`` for ``q = -1 .. q_max``."""
    _check_grid(f, bank)
    c = f.coeffs
    return np.array([lp_norm(SpectralField(f.grid, coeffs=c * bank.filter(q)), p, refine)
                     for q in bank.blocks])


def besov_weights(spec: BesovSpec, bank: DyadicFilterBank) -> np.ndarray:
    q = np.arange(-1, bank.q_max + 1, dtype=float)
    return 2.0 ** (q * spec.s) * (np.abs(q) + 1.0) ** spec.s_log


def lr_aggregate(seq, r) -> float:
    seq = np.abs(np.asarray(seq, dtype=float))
    r = float(r)
    if seq.size == 0:
        return 0.0
    if math.isinf(r):
        return float(seq.max())
    if r == 1:
        return float(seq.sum())
    top = seq.max()
    if top == 0:
        return 0.0
    return float(top * np.sum((seq / top) ** r) ** (1.0 / r))


def besov_norm(f: SpectralField, spec: BesovSpec, bank: DyadicFilterBank, refine: int = 1) -> float:
    """``|| (2^{qs} (|q|+1)^{s'} ||Delta_q f||_p)_q ||_{l^r}`` over ``q = -1 .. q_max``."""
    return lr_aggregate(besov_weights(spec, bank) * block_norms(f, spec.p, bank, refine), spec.r)
