"""
Kernel laboratory for the semigroup generated by ``|D|^beta / log^alpha(lambda + |D|)``.

* closed-form derivatives of ``phi(r) = r^beta / log^alpha(lambda + r)`` and
  the Askey sign conditions ``phi' >= 0, phi'' <= 0, phi''' >= 0``;
* the radial kernel ``K_t`` whose Fourier transform is ``exp(-t phi(|xi|))``,
  for ``d = 1, 2, 3``, together with its mass and minimum;
* the contraction probe for ``exp(-t L)`` on the periodic grid.

Kernel inversion
----------------
The radial inversion integrals are written as ``Re``/``Im`` of integrals of
``F(rho) e^{i rho r}`` (or ``F(rho) H_0^(1)(rho r)`` in 2D) and the contour is
rotated onto the ray ``rho = u e^{i theta}``. ``F`` is analytic and bounded
in the sector swept by the rotation, so the value is unchanged while the
oscillating factor becomes exponentially damped. ``theta = 0`` recovers the
plain real-axis quadrature with panels aligned to half oscillation periods.
For ``r`` beyond the kernel core the constant part of ``F`` is subtracted:
its contribution is exactly zero and the remainder ``F - 1`` vanishes at the
origin, which keeps the far tail accurate in relative terms.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np
from scipy import optimize, special

from .quadrature import QuadratureError, adaptive_panels
from .spectral import SpectralField, apply_multiplier, log_dissipation_symbol, lp_norm

SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}
_PREFACTOR = {1: 1.0 / math.pi, 2: 1.0 / (2.0 * math.pi), 3: 1.0 / (2.0 * math.pi ** 2)}


@dataclass(frozen=True)
class PhiParams:
    """Parameters of ``phi(r) = r^beta / log^alpha(lam + r)``.

    ``beta`` up to 2 is accepted so the lab can scan beyond the range where
    the sign conditions are known to be sufficient; :attr:`admissible` flags
    the range ``beta <= 1, lam >= exp((3 + 2 alpha) / beta)``.
    """

    alpha: float
    beta: float
    lam: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")
        if not 0 < self.beta <= 2:
            raise ValueError(f"beta must lie in (0, 2], got {self.beta!r}")
        if not self.lam > 1:
            raise ValueError(f"lambda must exceed 1, got {self.lam!r}")

    @classmethod
    def at_threshold(cls, alpha: float, beta: float) -> "PhiParams":
        return cls(alpha, beta, threshold_lambda(alpha, beta))

    @property
    def threshold(self) -> float:
        return threshold_lambda(self.alpha, self.beta)

    @property
    def above_threshold(self) -> bool:
        return self.lam >= self.threshold * (1 - 1e-12)

    @property
    def admissible(self) -> bool:
        return self.beta <= 1 and self.above_threshold


def threshold_lambda(alpha: float, beta: float) -> float:
    """Sufficient lower bound ``exp((3 + 2 alpha) / beta)`` on ``lambda``."""
    return math.exp((3.0 + 2.0 * alpha) / beta)


# --------------------------------------------------------------------------
# phi and its derivatives

def _radii(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise ValueError("radii must be strictly positive")
    return r


def phi(r, p: PhiParams):
    r = np.asarray(r, dtype=float)
    return r ** p.beta / np.log(p.lam + r) ** p.alpha


def phi_third_terms(r, p: PhiParams):
    """The four pieces ``I1 .. I4`` whose sum is ``phi'''``.

    ``I3`` and ``I4`` are nonnegative for ``beta <= 1``; ``I1 + I2`` is the
    part whose sign needs the lower bound on ``lambda``.
    """
    r = _radii(r)
    a, b, lam = p.alpha, p.beta, p.lam
    s = lam + r
    L = np.log(s)
    i1 = a * (a + 1) * r ** (b - 1) * L ** (-a - 3) / s ** 3 * (3 * lam * b * L + r * (3 * b * L - (2 + a)))
    pref = a * r ** (b - 2) * L ** (-2 - a) / s ** 3
    i2 = pref * r ** 2 * (-3 * (1 + a) + (-3 * b ** 2 + 6 * b - 2) * L)
    i3 = pref * L * (lam * b * (9 - 6 * b) * r + 3 * lam ** 2 * b * (1 - b))
    i4 = (2 - b) * (1 - b) * b * r ** (b - 3) * L ** (-a)
    return i1, i2, i3, i4


def phi_derivatives(r, p: PhiParams):
    """``(phi, phi', phi'', phi''')`` at ``r > 0`` from closed-form expressions."""
    r = _radii(r)
    a, b, lam = p.alpha, p.beta, p.lam
    s = lam + r
    L = np.log(s)
    f0 = r ** b / L ** a
    f1 = r ** (b - 1) / (s * L ** (a + 1)) * (b * lam * L + r * (b * L - a))
    f2 = r ** (b - 2) / L ** a * (
        -b * (1 - b)
        - 2 * a * b * r / (s * L)
        + a * r ** 2 / (s ** 2 * L)
        + a * (a + 1) * r ** 2 / (s ** 2 * L ** 2))
    f3 = sum(phi_third_terms(r, p))
    return f0, f1, f2, f3


def phi_derivatives_fd(r, p: PhiParams, dps: int = 80, rel_step: float = 1e-15):
    """Central finite differences of ``phi`` in ``dps``-digit arithmetic.

    Independent of the closed forms; truncation error is ``O(rel_step^2)``.
    """
    out = []
    with mpmath.workdps(dps):
        a, b, lam = mpmath.mpf(p.alpha), mpmath.mpf(p.beta), mpmath.mpf(p.lam)

        def f(x):
            return x ** b / mpmath.log(lam + x) ** a

        for x in np.atleast_1d(np.asarray(r, dtype=float)):
            x = mpmath.mpf(float(x))
            h = x * mpmath.mpf(rel_step)
            fp2, fp1, f00, fm1, fm2 = f(x + 2 * h), f(x + h), f(x), f(x - h), f(x - 2 * h)
            d1 = (fp1 - fm1) / (2 * h)
            d2 = (fp1 - 2 * f00 + fm1) / h ** 2
            d3 = (fp2 - 2 * fp1 + 2 * fm1 - fm2) / (2 * h ** 3)
            out.append((float(f00), float(d1), float(d2), float(d3)))
    arr = np.array(out)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def f_third_derivative(r, p: PhiParams, t: float = 1.0):
    """``F'''`` for ``F = exp(-t phi)`` via ``[-t phi''' + 3t^2 phi' phi'' - t^3 phi'^3] F``."""
    f0, f1, f2, f3 = phi_derivatives(r, p)
    return (-t * f3 + 3 * t ** 2 * f1 * f2 - t ** 3 * f1 ** 3) * np.exp(-t * f0)


def f_third_derivative_fd(r, p: PhiParams, t: float = 1.0, dps: int = 80, rel_step: float = 1e-15):
    out = []
    with mpmath.workdps(dps):
        a, b, lam, tt = (mpmath.mpf(v) for v in (p.alpha, p.beta, p.lam, t))

        def F(x):
            return mpmath.exp(-tt * x ** b / mpmath.log(lam + x) ** a)

        for x in np.atleast_1d(np.asarray(r, dtype=float)):
            x = mpmath.mpf(float(x))
            h = x * mpmath.mpf(rel_step)
            out.append(float((F(x + 2 * h) - 2 * F(x + h) + 2 * F(x - h) - F(x - 2 * h)) / (2 * h ** 3)))
    return np.array(out)


@dataclass
class AskeyVerdict:
    """Outcome of the three sign conditions on a radial grid."""

    params: PhiParams
    phi1_ok: bool
    phi2_ok: bool
    phi3_ok: bool
    first_violation: dict
    f3_max: float
    f3_max_fd: float
    f3_ok: bool

    @property
    def passed(self) -> bool:
        return self.phi1_ok and self.phi2_ok and self.phi3_ok

    @property
    def first_violation_r(self) -> Optional[float]:
        hits = [v for v in self.first_violation.values() if v is not None]
        return min(hits) if hits else None


def default_askey_grid(n: int = 200):
    return np.logspace(-3, 6, n)


def askey_check(p: PhiParams, r_grid=None, t: float = 1.0, f3_tol: float = 1e-10,
                fd_check: bool = True) -> AskeyVerdict:
    """Check ``phi' >= 0``, ``phi'' <= 0``, ``phi''' >= 0`` on ``r_grid``.

    Sign tests allow rounding-level slack (``1e-12`` relative to ``phi/r^k``).
    ``F''' <= f3_tol`` is evaluated both through the product identity and,
    when ``fd_check`` is set, by high-precision finite differences of ``F``.
    """
    r = default_askey_grid() if r_grid is None else _radii(r_grid)
    if r.size == 0:
        raise ValueError("empty radial grid")
    if np.any(np.diff(r) <= 0):
        raise ValueError("radial grid must be strictly increasing")
    f0, f1, f2, f3 = phi_derivatives(r, p)
    slack = 1e-12 * np.abs(f0)
    tests = {
        "phi1": f1 >= -slack / r,
        "phi2": f2 <= slack / r ** 2,
        "phi3": f3 >= -slack / r ** 3,
    }
    first = {k: (float(r[np.argmin(v)]) if not v.all() else None) for k, v in tests.items()}
    f3F = f_third_derivative(r, p, t)
    f3F_fd = f_third_derivative_fd(r, p, t) if fd_check else f3F
    f3_max = float(np.max(f3F))
    f3_max_fd = float(np.max(f3F_fd))
    return AskeyVerdict(p, bool(tests["phi1"].all()), bool(tests["phi2"].all()),
                        bool(tests["phi3"].all()), first, f3_max, f3_max_fd,
                        bool(f3_max <= f3_tol and f3_max_fd <= f3_tol))


# --------------------------------------------------------------------------
# Kernel inversion

def _phi_complex(w, p: PhiParams):
    return w ** p.beta / np.log(p.lam + w) ** p.alpha


def core_frequency(t: float, p: PhiParams) -> float:
    """Frequency ``rho*`` with ``t phi(rho*) = 1``; ``1/rho*`` is the kernel width."""
    grid = np.logspace(-15, 30, 901)
    g = t * phi(grid, p) - 1.0
    idx = np.nonzero(g >= 0)[0]
    if idx.size == 0:
        raise QuadratureError("t*phi never reaches 1; kernel scale undefined")
    i = idx[0]
    if i == 0:
        return float(grid[0])
    return float(optimize.brentq(lambda x: t * phi(x, p) - 1.0, grid[i - 1], grid[i], xtol=1e-300, rtol=1e-14))


def _default_angle(p: PhiParams) -> float:
    return min(math.pi / 4, 0.9 * math.pi / (2 * p.beta))


def _decay_cutoff(t, p, d, theta, rho_star, margin=42.0):
    """Smallest ``U`` with ``|F(u e^{i theta})| (u/rho*)^d <= e^{-margin}`` for all ``u >= U``."""
    z = np.exp(1j * theta)
    u = rho_star * np.logspace(-1, 30, 3101)
    with np.errstate(over="ignore", invalid="ignore"):
        g = t * _phi_complex(u * z, p).real - d * np.log(np.maximum(u / rho_star, 1.0))
    bad = np.nonzero(~(g >= margin))[0]
    if bad.size == 0:
        return float(u[0])
    if bad[-1] + 1 >= u.size:
        raise QuadratureError(
            f"tail bound unreachable: exp(-t phi) does not decay below e^-{margin:g} by rho={u[-1]:.1e}")
    return float(u[bad[-1] + 1])


def _edges(U, r, theta, real_axis, max_edges):
    lo = U * 1e-14
    k = int(math.ceil(math.log(U / lo) / math.log(4.0)))
    e = [0.0] + list(U * 4.0 ** -np.arange(k, -1, -1))
    if r > 0:
        # half-period alignment of e^{i rho r}
        step = math.pi / (r * max(math.cos(theta), 1e-3))
        count = U / step
        if count > max_edges:
            raise QuadratureError(
                f"oscillatory range needs {count:.2e} half-period panels at r={r:.3g}; "
                "use the rotated contour")
        e.extend(np.arange(1, int(count) + 1) * step)
    e = np.unique(np.asarray(e))
    return e[e <= U]


def kernel_values(t: float, p: PhiParams, d: int, radii, method: str = "ray",
                  rtol: float = 1e-11, max_edges: int = 200_000) -> np.ndarray:
    """``K_t(r)`` for the given radii (``r >= 0``) in dimension ``d``.

    ``method="ray"`` integrates along the rotated contour; ``method="real"``
    along the real axis with half-period panels up to the tail cutoff.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d!r}")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii < 0):
        raise ValueError("radii must be nonnegative")
    if method == "ray":
        theta = _default_angle(p)
    elif method == "real":
        theta = 0.0
    else:
        raise ValueError(f"unknown method {method!r}")
    real_axis = theta == 0.0
    z = np.exp(1j * theta)
    rho_star = core_frequency(t, p)
    UF = _decay_cutoff(t, p, d, theta, rho_star)

    tiny = radii * rho_star < 1e-7
    out = np.empty_like(radii)
    k0 = None
    if tiny.any():
        k0 = _integrate(t, p, d, np.array([0.0]), theta, z, rho_star, UF, real_axis, rtol, max_edges)[0]
        out[tiny] = k0
    rest = ~tiny
    if rest.any():
        out[rest] = _integrate(t, p, d, radii[rest], theta, z, rho_star, UF, real_axis, rtol, max_edges)
    return out


def _integrate(t, p, d, radii, theta, z, rho_star, UF, real_axis, rtol, max_edges):
    n = radii.size
    subtract = (~np.full(n, real_axis)) & (radii * rho_star >= 1.0)
    a_list, b_list, own = [], [], []
    sin_t = math.sin(theta)
    for i, r in enumerate(radii):
        if subtract[i]:
            U = (50.0 + 3 * d) / (r * sin_t)
        elif r > 0 and not real_axis:
            U = min(UF, (50.0 + 3 * d) / (r * sin_t))
        else:
            U = UF
        e = _edges(U, r, theta, real_axis, max_edges)
        a_list.append(e[:-1])
        b_list.append(e[1:])
        own.append(np.full(e.size - 1, i))
    a = np.concatenate(a_list)
    b = np.concatenate(b_list)
    owner = np.concatenate(own)
    rr = radii
    sub = subtract

    def integrand(u, o):
        w = u * z
        x = -t * _phi_complex(w, p)
        g = np.where(sub[o], np.expm1(x), np.exp(x))
        r_o = rr[o]
        if d == 1:
            return g * np.exp(1j * w * r_o)
        if d == 2:
            with np.errstate(invalid="ignore"):
                h = np.where(r_o > 0, special.hankel1(0, w * np.where(r_o > 0, r_o, 1.0)), 1.0)
            return u * g * h
        return np.where(r_o > 0, u * g * np.exp(1j * w * r_o), u * u * g)

    vals, _ = adaptive_panels(integrand, a, b, owner, n, rtol=rtol, max_panels=4 * max_edges + 400_000)
    pref = _PREFACTOR[d]
    if d == 1:
        return pref * (z * vals).real
    if d == 2:
        return pref * (z * z * vals).real
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = pref * (z * z * vals).imag / np.where(radii > 0, radii, 1.0)
    return np.where(radii > 0, pos, pref * (z ** 3 * vals).real)


def tail_coefficient(t: float, p: PhiParams, d: int) -> float:
    """``c`` in the far-field law ``K_t(r) ~ c r^{-d-beta}``."""
    b = p.beta
    return (t / math.log(p.lam) ** p.alpha * 2 ** b * special.gamma((d + b) / 2)
            * abs(special.rgamma(-b / 2)) / math.pi ** (d / 2))


@dataclass
class KernelMass:
    mass: float
    l1_norm: float
    tail: float
    min_value: float
    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def kernel_mass(t: float, p: PhiParams, d: int, method: str = "ray", panel_width: float = 1.0,
                order: int = 16, lo: float = 1e-10, hi: float = 1e14, rtol: float = 1e-11) -> KernelMass:
    """``int K_t`` and ``int |K_t|`` over ``R^d`` from kernel values.

    Integrates ``|S^{d-1}| K(r) r^{d-1}`` in ``s = log r`` with Gauss-Legendre
    panels on ``[lo/rho*, hi/rho*]``; the far tail beyond uses the
    leading-order law ``c r^{-d-beta}`` and the core below uses ``K(0)``.
    """
    rho_star = core_frequency(t, p)
    s0, s1 = math.log(lo / rho_star), math.log(hi / rho_star)
    npan = int(math.ceil((s1 - s0) / panel_width))
    edges = np.linspace(s0, s1, npan + 1)
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    s = (0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * x[None, :]
    weights = (half[:, None] * w[None, :]).ravel()
    r = np.exp(s.ravel())
    vals = kernel_values(t, p, d, np.concatenate([[0.0], r]), method=method, rtol=rtol)
    k0, vals = vals[0], vals[1:]
    area = SPHERE_AREA[d]
    jac = area * r ** d
    R0, R1 = math.exp(s0), math.exp(s1)
    core = area * k0 * R0 ** d / d
    tail = area * tail_coefficient(t, p, d) * R1 ** (-p.beta) / p.beta
    mass = float(np.sum(weights * vals * jac) + core + tail)
    l1 = float(np.sum(weights * np.abs(vals) * jac) + abs(core) + tail)
    return KernelMass(mass, l1, tail, float(min(k0, vals.min())), r, vals)


def default_radii(t: float, p: PhiParams, n: int = 241) -> np.ndarray:
    """Zero plus ``n`` log-spaced radii spanning ``[1e-4, 1e8]`` kernel widths."""
    w = 1.0 / core_frequency(t, p)
    return np.concatenate([[0.0], w * np.logspace(-4, 8, n)])


@dataclass
class KernelReport:
    t: float
    d: int
    params: PhiParams
    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    mass: float
    l1_norm: float
    min_value: float
    askey: AskeyVerdict

    def row(self) -> dict:
        a = self.askey
        fv = a.first_violation_r
        return {
            "alpha": self.params.alpha, "beta": self.params.beta, "lambda": self.params.lam,
            "d": self.d, "t": self.t, "mass": self.mass, "min_value": self.min_value,
            "askey_phi1": a.phi1_ok, "askey_phi2": a.phi2_ok, "askey_phi3": a.phi3_ok,
            "first_violation_r": "" if fv is None else fv,
        }


def kernel_eval(t: float, p: PhiParams, d: int, radii=None, method: str = "ray",
                askey_grid=None, fd_check: bool = False) -> KernelReport:
    """Kernel samples, mass, minimum and Askey verdicts for one parameter point.

    ``min_value`` is taken over the supplied radii and the internal mass
    quadrature nodes. ``mass`` is the signed integral; ``l1_norm`` integrates
    ``|K_t|``.
    """
    radii = default_radii(t, p) if radii is None else np.asarray(radii, dtype=float)
    if radii.ndim != 1 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    values = kernel_values(t, p, d, radii, method=method)
    km = kernel_mass(t, p, d, method=method)
    verdict = askey_check(p, askey_grid, fd_check=fd_check)
    return KernelReport(t, d, p, radii, values, km.mass, km.l1_norm,
                        float(min(values.min(), km.min_value)), verdict)


def poisson_kernel_1d(r, t):
    r = np.asarray(r, dtype=float)
    return t / (math.pi * (t * t + r * r))


# --------------------------------------------------------------------------
# Semigroup on the torus

def semigroup_contraction_probe(p: PhiParams, f: SpectralField, t_list, lp, refine: int = 1):
    """``||exp(-t L) f||_{L^p}`` for each ``t`` in ``t_list`` (applied spectrally).

    The sup norm is the polished maximum of the trigonometric interpolant.
    """
    m = log_dissipation_symbol(p.alpha, p.beta, p.lam).on_grid(f.grid)
    out = []
    for t in t_list:
        g = f if t == 0 else apply_multiplier(f, np.exp(-t * m))
        out.append(lp_norm(g, lp, refine, polish=True))
    return np.array(out)
