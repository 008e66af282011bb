"""
Pseudo-spectral time integration.

Two problems are supported on the periodic square:

* transport-diffusion ``d_t theta + v . grad theta + kappa L theta = f`` with
  a prescribed divergence-free velocity;
* the Boussinesq system in vorticity form,
  ``d_t omega + v . grad omega = d_1 theta``,
  ``d_t theta + v . grad theta + L theta = 0``, ``v = grad^perp Delta^-1 omega``,
  where ``L`` has ``beta = 1``.

Both use a second-order integrating-factor Runge-Kutta scheme (Heun form):
the dissipation is applied exactly through ``E = exp(-kappa m dt)``, the
advection is explicit and dealiased with the 2/3 rule.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .kernel import PhiParams
from .littlewood_paley import BesovSpec, besov_norm, block_norms, build_filter_bank
from .spectral import (
    Grid2D,
    SpectralField,
    advect,
    advect_coeffs,
    apply_multiplier,
    biot_savart,
    biot_savart_coeffs,
    curl,
    divergence,
    grad_norm_field,
    inverse,
    log_dissipation_symbol,
    lp_norm,
    partial,
    refined_values,
    riesz_log_symbol,
    polished_max_abs,
)

SCHEME = "IF-RK2 (Heun), 2/3 dealiasing"


class SimulationError(RuntimeError):
    """Integration aborted; carries the step number and the state norms."""

    def __init__(self, message, step=None, time=None, norms=None):
        detail = []
        if step is not None:
            detail.append(f"step={step}")
        if time is not None:
            detail.append(f"t={time:.6g}")
        if norms:
            detail.append(", ".join(f"{k}={v:.6g}" for k, v in norms.items()))
        super().__init__(message + (f" [{'; '.join(detail)}]" if detail else ""))
        self.step = step
        self.time = time
        self.norms = norms or {}


class CFLError(SimulationError):
    pass


VelocityLike = Union[Tuple[SpectralField, SpectralField], Callable]


class PrescribedVelocity:
    """Divergence-free velocity, steady (a pair of fields) or ``t -> (v1, v2)``."""

    def __init__(self, velocity: VelocityLike, sup_bound: Optional[float] = None):
        if callable(velocity):
            self._func = velocity
            self.steady = False
        else:
            v1, v2 = velocity
            self._pair = (v1, v2)
            self._func = lambda t: self._pair
            self.steady = True
        self._sup_bound = sup_bound

    def __call__(self, t: float):
        return self._func(t)

    def sup(self, t: float) -> float:
        if self._sup_bound is not None:
            return self._sup_bound
        v1, v2 = self(t)
        return float(np.max(np.hypot(v1.values, v2.values)))

    def check_divergence(self, times, tol: float = 1e-10):
        for t in times:
            v1, v2 = self(t)
            scale = max(1.0, float(np.max(np.abs(v1.values))), float(np.max(np.abs(v2.values))))
            div = float(np.max(np.abs(divergence(v1, v2).values)))
            if div > tol * scale:
                raise ValueError(f"velocity is not divergence-free at t={t:g} (max |div v| = {div:.3e})")


@dataclass
class TDProblem:
    """Transport-diffusion problem with prescribed velocity.

    ``forcing`` is ``t -> SpectralField`` or None. ``cfl`` is the advective
    Courant number bound ``dt <= cfl dx / |v|_inf``.
    """

    theta0: SpectralField
    velocity: VelocityLike
    params: PhiParams
    kappa: float = 1.0
    forcing: Optional[Callable] = None
    cfl: float = 0.5
    check_times: Sequence[float] = (0.0,)

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa!r}")
        if not isinstance(self.velocity, PrescribedVelocity):
            self.velocity = PrescribedVelocity(self.velocity)
        self.velocity.check_divergence(self.check_times)
        self.grid = self.theta0.grid
        self._symbol = log_dissipation_symbol(self.params.alpha, self.params.beta, self.params.lam)
        self._m = self._symbol.on_grid(self.grid)
        self._factor_cache = {}

    @property
    def dissipation(self):
        return self._symbol

    def propagator(self, dt: float) -> np.ndarray:
        if dt not in self._factor_cache:
            self._factor_cache = {dt: np.exp(-self.kappa * self._m * dt)}
        return self._factor_cache[dt]


@dataclass
class BoussinesqProblem:
    """Boussinesq system with ``L = |D| / log^alpha(lam + |D|)``.

    ``params.beta`` must be 1. Well-posedness is covered for
    ``alpha`` in ``[0, 1/2]``; larger ``alpha`` runs but is flagged.
    """

    omega0: SpectralField
    theta0: SpectralField
    params: PhiParams
    dt: float
    t_end: float
    cfl: float = 0.5

    def __post_init__(self):
        if self.params.beta != 1:
            raise ValueError(f"the Boussinesq system uses beta = 1, got {self.params.beta!r}")
        if self.omega0.grid != self.theta0.grid:
            raise ValueError("omega0 and theta0 live on different grids")
        if not (self.dt > 0 and self.t_end >= 0):
            raise ValueError("need dt > 0 and t_end >= 0")
        biot_savart(self.omega0)
        self.grid = self.omega0.grid
        self._m = log_dissipation_symbol(self.params.alpha, 1.0, self.params.lam).on_grid(self.grid)
        self._d1 = 1j * self.grid.k1 * ~self.grid.nyquist

    @property
    def alpha_in_theory_range(self) -> bool:
        return 0 <= self.params.alpha <= 0.5

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


# --------------------------------------------------------------------------
# Steppers

def _check_cfl(vmax, dt, grid, cfl, step, t):
    if vmax * dt > cfl * grid.dx * (1 + 1e-12):
        raise CFLError(
            f"CFL violated: dt={dt:.4g} exceeds {cfl:g}*dx/|v|_inf={cfl * grid.dx / vmax:.4g}",
            step=step, time=t, norms={"v_inf": vmax})


def _check_finite(arrays, step, t, names):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            norms = {}
            for nm, b in zip(names, arrays):
                with np.errstate(invalid="ignore", over="ignore"):
                    norms[nm] = float(np.sqrt(np.nansum(np.abs(b) ** 2)))
            raise SimulationError("non-finite state encountered", step=step, time=t, norms=norms)


def step_td(state: SpectralField, problem: TDProblem, dt: float, t: float = 0.0,
            step: Optional[int] = None) -> SpectralField:
    """One integrating-factor RK2 step of the transport-diffusion equation."""
    g = problem.grid
    if state.grid != g:
        raise ValueError("state lives on a different grid than the problem")
    vel = problem.velocity
    _check_cfl(max(vel.sup(t), vel.sup(t + dt)), dt, g, problem.cfl, step, t)
    E = problem.propagator(dt)

    def rhs(fh, tau):
        v1, v2 = vel(tau)
        out = -advect_coeffs(v1.coeffs, v2.coeffs, fh, g)
        if problem.forcing is not None:
            out = out + problem.forcing(tau).coeffs
        return out

    th = state.coeffs
    n0 = E * rhs(th, t)
    lin = E * th
    a = lin + dt * n0
    new = lin + 0.5 * dt * (n0 + rhs(a, t + dt))
    _check_finite([new], step, t + dt, ["theta_hat"])
    return SpectralField(g, coeffs=new)


def step_boussinesq(omega: SpectralField, theta: SpectralField, problem: BoussinesqProblem,
                    dt: Optional[float] = None, t: float = 0.0, step: Optional[int] = None):
    """One coupled step; the vorticity has no dissipation, theta uses ``E``."""
    g = problem.grid
    dt = problem.dt if dt is None else dt
    E = np.exp(-problem._m * dt)
    d1 = problem._d1

    def rhs(wh, th):
        v1h, v2h = biot_savart_coeffs(wh, g)
        nw = -advect_coeffs(v1h, v2h, wh, g) + d1 * th
        nt = -advect_coeffs(v1h, v2h, th, g)
        return nw, nt, v1h, v2h

    wh, th = omega.coeffs, theta.coeffs
    nw0, nt0, v1h, v2h = rhs(wh, th)
    n = g.n
    vmax = float(np.max(np.hypot(inverse(v1h, n), inverse(v2h, n))))
    _check_cfl(vmax, dt, g, problem.cfl, step, t)
    aw = wh + dt * nw0
    at = E * th + dt * E * nt0
    nw1, nt1, _, _ = rhs(aw, at)
    w_new = wh + 0.5 * dt * (nw0 + nw1)
    t_new = E * th + 0.5 * dt * (E * nt0 + nt1)
    w_new[0, 0] = 0.0
    _check_finite([w_new, t_new], step, t + dt, ["omega_hat", "theta_hat"])
    return SpectralField(g, coeffs=w_new), SpectralField(g, coeffs=t_new)


# --------------------------------------------------------------------------
# Gamma residual

def gamma_field(omega: Optional[SpectralField], theta: SpectralField, alpha: float, lam: float):
    """``Gamma = omega + R_alpha theta`` (``omega`` may be None for pure transport)."""
    r = apply_multiplier(theta, riesz_log_symbol(alpha, lam))
    return r if omega is None else omega + r


def gamma_residual(prev, curr, nxt, dt: float, alpha: float, lam: float,
                   velocity=None, kappa: float = 1.0) -> float:
    """``|| d_t Gamma + v . grad Gamma + [R_alpha, v . grad] theta ||_{L^2}``.

    ``prev``, ``curr``, ``nxt`` are ``(omega, theta)`` snapshots ``dt`` apart;
    ``d_t`` is the centered difference. With ``omega = None`` (transport mode,
    ``beta = 1``) the mixed unknown is ``R_alpha theta`` and the dissipation
    leaves the source ``kappa d_1 theta``, which is added back so that the
    residual measures the same cancellation. ``velocity`` defaults to the
    Biot-Savart velocity of ``curr``.
    """
    w0, th0 = prev
    w1, th1 = curr
    w2, th2 = nxt
    if velocity is None:
        if w1 is None:
            raise ValueError("velocity required when omega is None")
        velocity = biot_savart(w1)
    v1, v2 = velocity
    R = riesz_log_symbol(alpha, lam)
    g0 = gamma_field(w0, th0, alpha, lam)
    g2 = gamma_field(w2, th2, alpha, lam)
    g1 = gamma_field(w1, th1, alpha, lam)
    dgdt = SpectralField(th1.grid, coeffs=(g2.coeffs - g0.coeffs) / (2 * dt))
    rth = apply_multiplier(th1, R)
    comm = apply_multiplier(advect(v1, v2, th1), R) - advect(v1, v2, rth)
    res = dgdt + advect(v1, v2, g1) + comm
    if w1 is None:
        res = res + kappa * partial(th1, 0)
    return lp_norm(res, 2)


# --------------------------------------------------------------------------
# Monitors and trajectory log

@dataclass(frozen=True)
class MonitorSpec:
    """What to record.

    ``refine`` sets the spectral oversampling of the ``L^p`` quadrature (the
    sup norm is always the polished interpolant maximum); ``besov_p`` is the exponent of
    the dyadic-block, smoothing and ``B^0_{p,1}`` monitors; ``every`` thins
    the stored rows (integrals are still accumulated at every step).
    """

    p_list: Tuple[float, ...] = (1.0, 2.0, 4.0, math.inf)
    refine: int = 1
    besov_p: float = 2.0
    every: int = 1
    blocks: bool = True
    gamma: bool = False


def _norms_from(f: SpectralField, p_list, refine):
    vals = refined_values(f, refine)
    a = np.abs(vals)
    area = (f.grid.period / vals.shape[0]) ** 2
    out = []
    for p in p_list:
        if math.isinf(p):
            out.append(polished_max_abs(f, vals))
        elif p == 1:
            out.append(float(a.sum() * area))
        else:
            amax = a.max()
            out.append(0.0 if amax == 0 else float(amax * (np.sum((a / amax) ** p) * area) ** (1 / p)))
    return out


@dataclass
class TrajectoryLog:
    """Time series recorded by :func:`run_td` and :func:`run_boussinesq`."""

    p_list: Tuple[float, ...]
    q_list: Tuple[int, ...]
    alpha: float
    besov_p: float
    times: list = field(default_factory=list)
    theta_lp: list = field(default_factory=list)
    omega_lp: list = field(default_factory=list)
    theta_blocks: list = field(default_factory=list)
    smoothing: list = field(default_factory=list)
    smoothing_ratio: list = field(default_factory=list)
    besov_ratio: list = field(default_factory=list)
    gamma_residual: list = field(default_factory=list)
    V: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str, p=None) -> np.ndarray:
        if name in ("theta_lp", "omega_lp"):
            idx = list(self.p_list).index(p)
            return np.array([row[idx] for row in getattr(self, name)])
        return np.array(getattr(self, name), dtype=float)

    def header(self):
        ps = [_pname(p) for p in self.p_list]
        cols = ["t"] + [f"theta_L{p}" for p in ps] + [f"omega_L{p}" for p in ps]
        cols += [f"theta_block_q{q}" for q in self.q_list]
        cols += [f"smoothing_q{q}" for q in self.q_list if q >= 0]
        cols += ["smoothing_ratio", "besov_ratio", "V", "gamma_residual"]
        return cols

    def rows(self):
        nq = len([q for q in self.q_list if q >= 0])
        for i, t in enumerate(self.times):
            blocks = self.theta_blocks[i] if self.theta_blocks else [float("nan")] * len(self.q_list)
            sm = self.smoothing[i] if self.smoothing else [float("nan")] * nq
            gr = self.gamma_residual[i] if i < len(self.gamma_residual) else float("nan")
            yield ([t] + list(self.theta_lp[i]) + list(self.omega_lp[i]) + list(blocks) + list(sm)
                   + [self.smoothing_ratio[i], self.besov_ratio[i], self.V[i], gr])

    def write_csv(self, path, config_hash: str = ""):
        from .io import write_csv
        write_csv(path, self.header(), self.rows(), config_hash)

    def write_json(self, path, config_hash: str = ""):
        from .io import write_json
        write_json(path, dict(self.meta, samples=len(self.times)), config_hash)


def _pname(p):
    return "inf" if math.isinf(p) else f"{p:g}"


class _Recorder:
    """Accumulates monitors at every step; stores every ``spec.every``-th sample."""

    def __init__(self, grid: Grid2D, alpha: float, spec: MonitorSpec, theta0, omega0):
        self.grid = grid
        self.spec = spec
        self.bank = build_filter_bank(grid)
        self.qs = tuple(self.bank.blocks)
        self.pos = np.array([q >= 0 for q in self.qs])
        qpos = np.array([q for q in self.qs if q >= 0], dtype=float)
        self.weights = 2.0 ** qpos * (1.0 + qpos) ** (-alpha)
        self.log = TrajectoryLog(tuple(spec.p_list), self.qs, alpha, spec.besov_p)
        bp = spec.besov_p
        self.besov = BesovSpec(0.0, 0.0, bp, 1.0)
        self.theta0_p = lp_norm(theta0, bp, spec.refine)
        self.theta0_inf = lp_norm(theta0, math.inf, spec.refine, polish=True)
        self.besov0 = besov_norm(theta0, self.besov, self.bank)
        self.int_blocks = np.zeros(len(qpos))
        self.int_omega = 0.0
        self.V = 0.0
        self.prev = None

    def record(self, step, t, theta, omega, v1, v2):
        spec = self.spec
        bp = spec.besov_p
        blocks = block_norms(theta, bp, self.bank) if spec.blocks else None
        omega_p = lp_norm(omega, bp, spec.refine)
        grad = float(np.max(grad_norm_field(v1, v2)))
        if self.prev is not None:
            t0, b0, w0, g0 = self.prev
            h = t - t0
            if blocks is not None:
                self.int_blocks += 0.5 * h * (b0[self.pos] + blocks[self.pos])
            self.int_omega += 0.5 * h * (w0 + omega_p)
            self.V += 0.5 * h * (g0 + grad)
        self.prev = (t, blocks, omega_p, grad)
        if step % spec.every:
            return
        log = self.log
        log.times.append(t)
        log.theta_lp.append(_norms_from(theta, spec.p_list, spec.refine))
        log.omega_lp.append(_norms_from(omega, spec.p_list, spec.refine))
        sm = self.weights * self.int_blocks
        denom = self.theta0_p + self.theta0_inf * self.int_omega
        if blocks is not None:
            log.theta_blocks.append(list(blocks))
            log.smoothing.append(list(sm))
        log.smoothing_ratio.append(float(sm.max() / denom) if denom > 0 else 0.0)
        # B^0_{p,1}: unweighted sum of block norms
        bnow = float(np.sum(blocks)) if blocks is not None else besov_norm(theta, self.besov, self.bank)
        log.besov_ratio.append(bnow / (self.besov0 * (1 + self.V)) if self.besov0 > 0 else 0.0)
        log.V.append(self.V)


def run_td(problem: TDProblem, t_end: float, dt: float, monitors: Optional[MonitorSpec] = None,
           gamma: Optional[bool] = None) -> TrajectoryLog:
    """Integrate ``problem`` to ``t_end`` with step ``dt``, recording monitors.

    When ``gamma`` is set (requires ``beta = 1``) the transport-mode Gamma
    residual is evaluated at each interior stored time.
    """
    spec = monitors or MonitorSpec()
    gamma = spec.gamma if gamma is None else gamma
    steps = _step_count(t_end, dt)
    g = problem.grid
    vel = problem.velocity
    theta = problem.theta0
    v1, v2 = vel(0.0)
    rec = _Recorder(g, problem.params.alpha, spec, theta, curl(v1, v2))
    rec.record(0, 0.0, theta, curl(v1, v2), v1, v2)
    history = [theta]
    residuals = []
    p = problem.params
    for k in range(1, steps + 1):
        t = (k - 1) * dt
        theta = step_td(theta, problem, dt, t, step=k)
        v1, v2 = vel(k * dt)
        rec.record(k, k * dt, theta, curl(v1, v2), v1, v2)
        if gamma:
            history = (history + [theta])[-3:]
            if len(history) == 3:
                residuals.append(gamma_residual((None, history[0]), (None, history[1]), (None, history[2]),
                                                dt, p.alpha, p.lam, velocity=vel(t), kappa=problem.kappa))
    log = rec.log
    if gamma:
        log.gamma_residual = _align_residuals(residuals, steps, spec.every)
    log.meta = dict(problem="transport-diffusion", grid=g.n, period=g.period, dt=dt, t_end=steps * dt,
                    kappa=problem.kappa, alpha=p.alpha, beta=p.beta, lam=p.lam, scheme=SCHEME)
    return log


def run_boussinesq(problem: BoussinesqProblem, monitors: Optional[MonitorSpec] = None,
                   gamma: Optional[bool] = None, callback=None) -> TrajectoryLog:
    """Integrate the Boussinesq system, recording monitors and the Gamma residual."""
    spec = monitors or MonitorSpec()
    gamma = spec.gamma if gamma is None else gamma
    g = problem.grid
    p = problem.params
    dt = problem.dt
    steps = problem.n_steps
    omega, theta = problem.omega0, problem.theta0
    v1, v2 = biot_savart(omega)
    rec = _Recorder(g, p.alpha, spec, theta, omega)
    rec.record(0, 0.0, theta, omega, v1, v2)
    history = [(omega, theta)]
    residuals = []
    for k in range(1, steps + 1):
        omega, theta = step_boussinesq(omega, theta, problem, dt, (k - 1) * dt, step=k)
        v1, v2 = biot_savart(omega)
        rec.record(k, k * dt, theta, omega, v1, v2)
        if callback is not None:
            callback(k, omega, theta)
        if gamma:
            history = (history + [(omega, theta)])[-3:]
            if len(history) == 3:
                residuals.append(gamma_residual(*history, dt, p.alpha, p.lam))
    log = rec.log
    if gamma:
        log.gamma_residual = _align_residuals(residuals, steps, spec.every)
    log.meta = dict(problem="boussinesq", grid=g.n, period=g.period, dt=dt, t_end=steps * dt,
                    alpha=p.alpha, beta=1.0, lam=p.lam, alpha_in_theory_range=problem.alpha_in_theory_range,
                    scheme=SCHEME)
    return log


def _step_count(t_end, dt):
    if not (dt > 0 and t_end >= 0):
        raise ValueError("need dt > 0 and t_end >= 0")
    return int(round(t_end / dt))


def _align_residuals(residuals, steps, every):
    """Residual ``i`` belongs to step ``i + 1``; endpoints have none."""
    full = [float("nan")] + list(residuals) + [float("nan")] * (steps + 1 - 1 - len(residuals))
    return full[::every]
