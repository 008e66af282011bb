"""
Periodic pseudo-spectral core.

Fields live on an ``n x n`` periodic grid of side ``period``. Arrays are
indexed ``values[i, j]`` with ``i`` along ``x1`` and ``j`` along ``x2``; the
spectral representation uses the real-to-complex layout of ``rfft2`` (full
``k1`` axis, non-negative ``k2`` axis).

Fourier multipliers are described by :class:`MultiplierSymbol`. Radial
symbols depend on ``|xi|`` only; ``x1_odd`` symbols carry the factor
``i xi1 / |xi|`` and are zeroed on the Nyquist row and column so that the
output of every multiplier stays exactly real.
"""

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft


def fft_workers() -> int:
    """Worker count for the FFT backend, capped by ``LOGBOUSS_THREADS``."""
    env = os.environ.get("LOGBOUSS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid.

    Parameters
    ----------
    n : int
        Points per axis, a power of two with ``n >= 16``.
    period : float
        Side length of the periodic box.
    dealias_fraction : float
        Fraction of the index range kept by the dealiasing mask
        (2/3 rule by default).
    """

    n: int
    period: float = 2 * math.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 16, got {n!r}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period!r}")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction!r}")

    @property
    def dx(self) -> float:
        return self.period / self.n

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @property
    def scale(self) -> float:
        """Wavenumber unit ``2 pi / period``."""
        return 2 * math.pi / self.period

    @property
    def spectral_shape(self):
        return (self.n, self.n // 2 + 1)

    @cached_property
    def coords(self):
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    @cached_property
    def index1(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, 1.0 / self.n).reshape(-1, 1)

    @cached_property
    def index2(self) -> np.ndarray:
        return np.fft.rfftfreq(self.n, 1.0 / self.n).reshape(1, -1)

    @cached_property
    def k1(self) -> np.ndarray:
        return np.broadcast_to(self.index1 * self.scale, self.spectral_shape)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(self.index2 * self.scale, self.spectral_shape)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.hypot(self.k1, self.k2)

    @cached_property
    def nyquist(self) -> np.ndarray:
        """Mask of the Nyquist row (``k1 = -n/2``) and column (``k2 = n/2``)."""
        h = self.n // 2
        return (np.abs(self.index1) == h) | (self.index2 == h)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.dealias_fraction * self.n / 2
        return (np.abs(self.index1) <= cut) & (self.index2 <= cut)

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each stored ``rfft2`` coefficient in the full spectrum."""
        w = np.full(self.spectral_shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    @property
    def max_resolved_wavenumber(self) -> float:
        """Largest per-axis wavenumber kept by the dealiasing mask."""
        return self.dealias_fraction * self.n / 2 * self.scale


class SpectralField:
    """Real scalar field with paired physical and spectral representations.

    Either representation may be supplied; the other is computed on first
    access and cached. Treat instances as immutable.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: Grid2D, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("need values or coeffs")
        self.grid = grid
        if values is not None:
            values = np.asarray(values, dtype=float)
            if values.shape != (grid.n, grid.n):
                raise ValueError(f"values shape {values.shape} does not match grid n={grid.n}")
        if coeffs is not None:
            coeffs = np.asarray(coeffs, dtype=complex)
            if coeffs.shape != grid.spectral_shape:
                raise ValueError(f"coeffs shape {coeffs.shape} does not match grid n={grid.n}")
        self._values = values
        self._coeffs = coeffs

    @classmethod
    def zeros(cls, grid: Grid2D) -> "SpectralField":
        return cls(grid, values=np.zeros((grid.n, grid.n)))

    @classmethod
    def from_function(cls, grid: Grid2D, func: Callable) -> "SpectralField":
        x1, x2 = grid.coords
        return cls(grid, values=np.broadcast_to(func(x1, x2), (grid.n, grid.n)).astype(float))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = inverse(self._coeffs, self.grid.n)
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = forward(self._values)
        return self._coeffs

    def mean(self) -> float:
        return float(self.coeffs[0, 0].real) / self.grid.n ** 2

    def _check(self, other):
        if isinstance(other, SpectralField) and other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        if isinstance(other, SpectralField):
            return SpectralField(self.grid, values=self.values + other.values)
        return SpectralField(self.grid, values=self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        self._check(other)
        if isinstance(other, SpectralField):
            return SpectralField(self.grid, values=self.values - other.values)
        return SpectralField(self.grid, values=self.values - other)

    def __neg__(self):
        return SpectralField(self.grid, values=-self.values)

    def __mul__(self, other):
        self._check(other)
        if isinstance(other, SpectralField):
            return SpectralField(self.grid, values=self.values * other.values)
        return SpectralField(self.grid, values=self.values * other)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(n={self.grid.n}, period={self.grid.period:g})"


def forward(values: np.ndarray) -> np.ndarray:
    return sfft.rfft2(values, workers=fft_workers())


def inverse(coeffs: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfft2(coeffs, s=(n, n), workers=fft_workers())


# --------------------------------------------------------------------------
# Multipliers

@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier multiplier ``m(xi)``.

    ``func(k1, k2)`` returns the multiplier on arrays of wavenumbers. For
    ``kind == "radial"`` the value is real and depends on ``|xi|``; for
    ``"x1_odd"`` it is purely imaginary and odd in ``xi1``. Products of
    symbols of mixed kinds have kind ``"general"``.
    """

    kind: str
    func: Callable = field(repr=False, compare=False)
    params: dict = field(default_factory=dict)
    name: str = ""

    def __call__(self, k1, k2):
        return self.func(np.asarray(k1, dtype=float), np.asarray(k2, dtype=float))

    def radial(self, rho):
        """Evaluate along ``xi = (rho, 0)``."""
        rho = np.asarray(rho, dtype=float)
        return self(rho, np.zeros_like(rho))

    def on_grid(self, grid: Grid2D) -> np.ndarray:
        m = np.array(self(grid.k1, grid.k2), dtype=complex if self.kind != "radial" else float)
        m = np.broadcast_to(m, grid.spectral_shape).copy()
        if self.kind != "radial":
            m[np.broadcast_to(grid.nyquist, grid.spectral_shape)] = 0.0
        return m

    def __mul__(self, other: "MultiplierSymbol") -> "MultiplierSymbol":
        f, g = self.func, other.func
        if self.kind == other.kind == "radial":
            kind = "radial"
        elif {self.kind, other.kind} == {"radial", "x1_odd"}:
            kind = "x1_odd"
        else:
            kind = "general"
        return MultiplierSymbol(kind, lambda k1, k2: f(k1, k2) * g(k1, k2),
                                name=f"({self.name})*({other.name})")


def _check_log_params(alpha, lam):
    if not lam > 1:
        raise ValueError(f"lambda must exceed 1 (log base degenerate), got {lam!r}")
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha!r}")


def log_dissipation_symbol(alpha: float, beta: float, lam: float) -> MultiplierSymbol:
    """Radial symbol ``|xi|**beta / log(lam + |xi|)**alpha``."""
    _check_log_params(alpha, lam)
    if not 0 < beta <= 2:
        raise ValueError(f"beta must lie in (0, 2], got {beta!r}")

    def m(k1, k2):
        rho = np.hypot(k1, k2)
        return rho ** beta / np.log(lam + rho) ** alpha

    return MultiplierSymbol("radial", m, dict(alpha=alpha, beta=beta, lam=lam),
                            name=f"|D|^{beta:g}/log^{alpha:g}({lam:g}+|D|)")


def riesz_log_symbol(alpha: float, lam: float) -> MultiplierSymbol:
    """Symbol of ``d1/|D| log(lam+|D|)**alpha``, i.e. ``i xi1/|xi| log^alpha``; 0 at the origin."""
    _check_log_params(alpha, lam)

    def m(k1, k2):
        rho = np.hypot(k1, k2)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 1j * np.where(rho > 0, k1 / np.where(rho > 0, rho, 1.0), 0.0)
        return out * np.log(lam + rho) ** alpha

    return MultiplierSymbol("x1_odd", m, dict(alpha=alpha, lam=lam),
                            name=f"R_{alpha:g}(lambda={lam:g})")


def derivative_symbol(axis: int) -> MultiplierSymbol:
    if axis == 0:
        return MultiplierSymbol("x1_odd", lambda k1, k2: 1j * k1 + 0 * k2, name="d1")
    if axis == 1:
        return MultiplierSymbol("general", lambda k1, k2: 1j * k2 + 0 * k1, name="d2")
    raise ValueError(f"axis must be 0 or 1, got {axis}")


def identity_symbol() -> MultiplierSymbol:
    return MultiplierSymbol("radial", lambda k1, k2: np.ones(np.broadcast(k1, k2).shape), name="1")


def apply_multiplier(f: SpectralField, m) -> SpectralField:
    """Multiply the coefficients of ``f`` by ``m`` (a symbol or a precomputed grid array)."""
    if isinstance(m, MultiplierSymbol):
        arr = m.on_grid(f.grid)
    else:
        arr = np.asarray(m)
        if arr.shape != f.grid.spectral_shape:
            raise ValueError(f"multiplier shape {arr.shape} incompatible with grid n={f.grid.n}")
    return SpectralField(f.grid, coeffs=f.coeffs * arr)


def partial(f: SpectralField, axis: int) -> SpectralField:
    return apply_multiplier(f, derivative_symbol(axis))


def gradient(f: SpectralField):
    return partial(f, 0), partial(f, 1)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, coeffs=f.coeffs * f.grid.dealias_mask)


def advect(v1: SpectralField, v2: SpectralField, f: SpectralField) -> SpectralField:
    """``v . grad f`` computed pseudo-spectrally with 2/3-rule dealiasing."""
    g = f.grid
    mask = g.dealias_mask
    return SpectralField(g, coeffs=advect_coeffs(v1.coeffs * mask, v2.coeffs * mask, f.coeffs, g))


def advect_coeffs(v1h, v2h, fh, grid: Grid2D):
    """Array-level kernel of :func:`advect`; inputs and output are rfft coefficients."""
    n = grid.n
    mask = grid.dealias_mask
    d1, d2 = _deriv_arrays(grid)
    fh = fh * mask
    u1 = inverse(v1h * mask, n)
    u2 = inverse(v2h * mask, n)
    fx = inverse(d1 * fh, n)
    fy = inverse(d2 * fh, n)
    return forward(u1 * fx + u2 * fy) * mask


_DERIV_CACHE = {}


def _deriv_arrays(grid: Grid2D):
    key = (grid.n, grid.period)
    if key not in _DERIV_CACHE:
        _DERIV_CACHE[key] = (derivative_symbol(0).on_grid(grid), derivative_symbol(1).on_grid(grid))
    return _DERIV_CACHE[key]


def biot_savart(omega: SpectralField, mean_tol: float = 1e-10):
    """Divergence-free velocity with ``curl v = omega`` (``v = grad^perp Delta^-1 omega``).

    Raises
    ------
    ValueError
        If ``omega`` has a nonzero mean beyond ``mean_tol`` (relative to its
        sup norm).
    """
    mean = omega.mean()
    scale = max(1.0, float(np.max(np.abs(omega.values))))
    if abs(mean) > mean_tol * scale:
        raise ValueError(f"vorticity must have zero mean, got mean {mean:.3e}")
    v1h, v2h = biot_savart_coeffs(omega.coeffs, omega.grid)
    return SpectralField(omega.grid, coeffs=v1h), SpectralField(omega.grid, coeffs=v2h)


def biot_savart_coeffs(wh, grid: Grid2D):
    k1, k2 = grid.k1, grid.k2
    k2sq = k1 ** 2 + k2 ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k2sq > 0, 1.0 / np.where(k2sq > 0, k2sq, 1.0), 0.0)
    inv = inv * ~grid.nyquist
    return 1j * k2 * inv * wh, -1j * k1 * inv * wh


def curl(v1: SpectralField, v2: SpectralField) -> SpectralField:
    return partial(v2, 0) - partial(v1, 1)


def divergence(v1: SpectralField, v2: SpectralField) -> SpectralField:
    return partial(v1, 0) + partial(v2, 1)


# --------------------------------------------------------------------------
# Norms

def refined_values(f: SpectralField, factor: int) -> np.ndarray:
    """Trigonometric interpolant of ``f`` sampled on a grid ``factor`` times finer.

    The Nyquist row and column are dropped.
    """
    if factor == 1:
        return f.values
    g = f.grid
    n, m = g.n, g.n * factor
    h = n // 2
    big = np.zeros((m, m // 2 + 1), dtype=complex)
    c = f.coeffs
    big[:h, :h] = c[:h, :h]
    big[m - h + 1:, :h] = c[h + 1:, :h]
    return inverse(big * (m / n) ** 2, m)


def lp_norm(f: SpectralField, p, refine: int = 1, polish: bool = False) -> float:
    """Discrete ``L^p`` norm by uniform quadrature; ``p = inf`` gives the max.

    ``refine > 1`` evaluates on the spectrally interpolated finer grid, which
    sharpens ``p = 1`` for fields that change sign. With ``polish`` the sup
    norm is the maximum of the trigonometric interpolant, located by Newton
    steps from the best sample.
    """
    p = float(p)
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vals = refined_values(f, refine)
    a = np.abs(vals)
    if math.isinf(p):
        if polish:
            return polished_max_abs(f, vals)
        return float(a.max())
    area = (f.grid.period / vals.shape[0]) ** 2
    if p == 1:
        return float(a.sum() * area)
    if p == 2:
        return float(math.sqrt(np.sum(a * a) * area))
    amax = a.max()
    if amax == 0:
        return 0.0
    return float(amax * (np.sum((a / amax) ** p) * area) ** (1.0 / p))


def _point_jet(f: SpectralField, x):
    """Value, gradient and Hessian of the trigonometric interpolant at ``x``."""
    g = f.grid
    w = g.rfft_weights * ~g.nyquist * f.coeffs / g.n ** 2
    k1, k2 = g.k1, g.k2
    e = w * np.outer(np.exp(1j * k1[:, 0] * x[0]), np.exp(1j * k2[0, :] * x[1]))
    val = e.sum().real
    grad = np.array([(1j * k1 * e).sum().real, (1j * k2 * e).sum().real])
    h11 = -(k1 * k1 * e).sum().real
    h12 = -(k1 * k2 * e).sum().real
    h22 = -(k2 * k2 * e).sum().real
    return val, grad, np.array([[h11, h12], [h12, h22]])


def polished_max_abs(f: SpectralField, refined: np.ndarray, iters: int = 8) -> float:
    """``max |f|`` of the interpolant: refined-grid argmax sharpened by Newton steps."""
    m = refined.shape[0]
    i, j = np.unravel_index(np.argmax(np.abs(refined)), refined.shape)
    h = f.grid.period / m
    x = np.array([i * h, j * h])
    best = abs(refined[i, j])
    for _ in range(iters):
        val, grad, hess = _point_jet(f, x)
        best = max(best, abs(val))
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.max(np.abs(step)) > h:
            break
        x = x - step
        if np.max(np.abs(step)) < 1e-14 * f.grid.period:
            best = max(best, abs(_point_jet(f, x)[0]))
            break
    return float(best)


def parseval_l2(f: SpectralField) -> float:
    g = f.grid
    c = f.coeffs
    total = np.sum(g.rfft_weights * (c.real ** 2 + c.imag ** 2))
    return float(math.sqrt(total) * g.period / g.n ** 2)


def grad_norm_field(v1: SpectralField, v2: SpectralField) -> np.ndarray:
    """Pointwise Frobenius norm of the velocity gradient."""
    a, b = gradient(v1)
    c, d = gradient(v2)
    return np.sqrt(a.values ** 2 + b.values ** 2 + c.values ** 2 + d.values ** 2)


def array_lp(values: np.ndarray, grid: Grid2D, p) -> float:
    f = SpectralField(grid, values=values)
    return lp_norm(f, p)


# --------------------------------------------------------------------------
# Test-field helpers

def pure_mode(grid: Grid2D, k1: int, k2: int = 0, phase: float = 0.0) -> SpectralField:
    """``cos(k . x + phase)`` with integer wavenumber indices."""
    s = grid.scale
    return SpectralField.from_function(grid, lambda x1, x2: np.cos(s * (k1 * x1 + k2 * x2) + phase))


def random_bandlimited(grid: Grid2D, kmax: float, rng: Optional[np.random.Generator] = None,
                       kmin: float = 1.0, slope: float = 0.0) -> SpectralField:
    """Random real field with Fourier support ``kmin <= |xi| <= kmax``.

    Amplitudes are complex Gaussian times ``|xi|**(-slope)``, drawn on an
    array sized by ``kmax`` alone, so a given generator state yields the same
    function on every grid that resolves the band. The result is normalized
    to unit sup norm.
    """
    rng = np.random.default_rng() if rng is None else rng
    K = int(math.floor(kmax / grid.scale))
    if K >= grid.n // 2:
        raise ValueError(f"band kmax={kmax} not resolved on grid n={grid.n}")
    raw = rng.standard_normal((2 * K + 1, K + 1)) + 1j * rng.standard_normal((2 * K + 1, K + 1))
    i1 = np.arange(-K, K + 1)[:, None]
    i2 = np.arange(0, K + 1)[None, :]
    k = grid.scale * np.hypot(i1, i2)
    band = (k >= kmin) & (k <= kmax)
    # the k2 = 0 column holds each pair once: keep i1 > 0 and mirror
    band &= ~((i2 == 0) & (i1 <= 0))
    with np.errstate(divide="ignore"):
        amp = np.where(band, np.where(k > 0, k, 1.0) ** (-slope), 0.0)
    c = np.zeros(grid.spectral_shape, dtype=complex)
    c[i1.ravel() % grid.n, :K + 1] = raw * amp
    col = c[:, 0].copy()
    c[:, 0] = col + np.conj(col[(-np.arange(grid.n)) % grid.n])
    c *= grid.n ** 2
    f = SpectralField(grid, coeffs=c)
    return SpectralField(grid, values=f.values / polished_max_abs(f, f.values))
