"""
Named simulation setups used by the ``simulate`` subcommand and the tests.

Each preset maps ``(n, seed)`` to a :class:`Preset` holding a ready problem
and the run length; time steps are tied to the grid spacing where the
preset is meant for refinement studies.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional

from .evolve import BoussinesqProblem, MonitorSpec, TDProblem, run_boussinesq, run_td
from .initial_data import (
    constant_velocity,
    random_field,
    shear_profile,
    shear_velocity,
    taylor_green_velocity,
    von_mises_bump,
)
from .kernel import PhiParams
from .spectral import Grid2D, SpectralField


@dataclass
class Preset:
    name: str
    description: str
    problem: object
    t_end: float
    dt: float
    monitors: MonitorSpec

    def run(self):
        if isinstance(self.problem, TDProblem):
            return run_td(self.problem, self.t_end, self.dt, self.monitors)
        return run_boussinesq(self.problem, self.monitors)


def _maxprinciple(name, velocity_name):
    def build(n, seed, alpha=1.0, beta=1.0, lam=None, steps=500, dt=0.01):
        g = Grid2D(n)
        prm = PhiParams(alpha, beta, lam) if lam else PhiParams.at_threshold(alpha, beta)
        vel = shear_velocity(g) if velocity_name == "shear" else taylor_green_velocity(g)
        prob = TDProblem(von_mises_bump(g, center=(2.0, 3.0), width=0.5), vel, prm, kappa=1.0)
        return Preset(name, f"transport-diffusion of a bump in a {velocity_name} flow", prob, steps * dt, dt,
                      MonitorSpec())
    return build


def _euler_check(n, seed, alpha=0.5, t_end=5.0, dt=0.01):
    g = Grid2D(n)
    w0 = random_field(g, seed, kmax=3.0, zero_mean=True)
    prob = BoussinesqProblem(w0, SpectralField.zeros(g), PhiParams.at_threshold(alpha, 1.0), dt=dt, t_end=t_end)
    return Preset("euler-check", "zero temperature: the 2D Euler limit", prob, t_end, dt, MonitorSpec(blocks=False))


def _boussinesq(n, seed, alpha=0.5, t_end=1.0, courant=0.25):
    g = Grid2D(n)
    dt = courant * g.dx
    w0 = random_field(g, seed, kmax=3.0, zero_mean=True)
    th0 = von_mises_bump(g, width=0.6)
    prob = BoussinesqProblem(w0, th0, PhiParams.at_threshold(alpha, 1.0), dt=dt, t_end=t_end)
    return Preset("boussinesq", "reference coupled run with Gamma residual (dt proportional to dx)",
                  prob, t_end, dt, MonitorSpec(gamma=True))


def _degenerate(n, seed, alpha=0.5, t_end=0.5, dt=0.01):
    g = Grid2D(n)
    prob = BoussinesqProblem(SpectralField.zeros(g), shear_profile(g), PhiParams.at_threshold(alpha, 1.0),
                             dt=dt, t_end=t_end)
    return Preset("degenerate", "omega0 = 0, theta0 = theta0(x2): velocity stays zero", prob, t_end, dt,
                  MonitorSpec(gamma=True))


def _galilean(n, seed, alpha=1.0, steps=4, dt=1e-5):
    g = Grid2D(n)
    prob = TDProblem(von_mises_bump(g), constant_velocity(g, 1.0, 0.5), PhiParams.at_threshold(alpha, 1.0),
                     kappa=1.0)
    return Preset("galilean", "constant velocity transport with Gamma residual", prob, steps * dt, dt,
                  MonitorSpec(gamma=True))


PRESETS: Dict[str, Callable] = {
    "maxprinciple": _maxprinciple("maxprinciple", "shear"),
    "maxprinciple-tg": _maxprinciple("maxprinciple-tg", "taylor-green"),
    "euler-check": _euler_check,
    "boussinesq": _boussinesq,
    "degenerate": _degenerate,
    "galilean": _galilean,
}


def build_preset(name: str, n: int = 256, seed: int = 0, overrides: Optional[dict] = None) -> Preset:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available presets: {', '.join(sorted(PRESETS))}")
    return PRESETS[name](n, seed, **(overrides or {}))
