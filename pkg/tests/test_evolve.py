import json
import math

import numpy as np
import pytest

from logbouss.evolve import (
    BoussinesqProblem,
    CFLError,
    MonitorSpec,
    PrescribedVelocity,
    SimulationError,
    TDProblem,
    gamma_residual,
    run_boussinesq,
    run_td,
    step_boussinesq,
    step_td,
)
from logbouss.initial_data import (
    random_field,
    shear_profile,
    shear_velocity,
    taylor_green_velocity,
    von_mises_bump,
)
from logbouss.kernel import PhiParams
from logbouss.presets import build_preset
from logbouss.spectral import Grid2D, SpectralField, log_dissipation_symbol, lp_norm

P_LIST = (1.0, 2.0, 4.0, math.inf)
ADMISSIBLE = PhiParams(1.0, 1.0, math.e ** 5)


@pytest.fixture(scope="module")
def g64():
    return Grid2D(64)


def n_steps(state, problem, dt, k):
    for i in range(k):
        state = step_td(state, problem, dt, i * dt)
    return state


# ---------------------------------------------------------------- transport-diffusion

@pytest.mark.parametrize("kappa", [0.3, 1.0])
def test_pure_dissipation_is_exact(g64, kappa):
    th0 = random_field(g64, 0, kmax=20)
    zero = (SpectralField.zeros(g64), SpectralField.zeros(g64))
    prob = TDProblem(th0, zero, PhiParams(0.5, 0.8, 10.0), kappa=kappa)
    out = n_steps(th0, prob, 0.01, 37)
    m = log_dissipation_symbol(0.5, 0.8, 10.0).on_grid(g64)
    exact = SpectralField(g64, coeffs=np.exp(-kappa * m * 0.37) * th0.coeffs)
    assert np.max(np.abs(out.values - exact.values)) <= 1e-12


def test_transport_conserves_l2(g64):
    th0 = random_field(g64, 1, kmax=3)
    prob = TDProblem(th0, taylor_green_velocity(g64), ADMISSIBLE, kappa=0.0)
    out = n_steps(th0, prob, 0.002, 1000)
    assert abs(lp_norm(out, 2) / lp_norm(th0, 2) - 1) <= 1e-6


@pytest.mark.parametrize("velocity", [shear_velocity, taylor_green_velocity])
def test_mean_is_conserved(g64, velocity):
    th0 = von_mises_bump(g64, center=(2.0, 1.0)) + 0.3
    prob = TDProblem(th0, velocity(g64), ADMISSIBLE, kappa=1.0)
    out = n_steps(th0, prob, 0.01, 100)
    assert abs(out.mean() - th0.mean()) <= 1e-12


@pytest.mark.parametrize("velocity", [shear_velocity, taylor_green_velocity])
def test_maximum_principle_small_grid(g64, velocity):
    prob = TDProblem(von_mises_bump(g64, center=(2.0, 3.0)), velocity(g64), ADMISSIBLE, kappa=1.0)
    log = run_td(prob, 1.0, 0.01)
    for p in P_LIST:
        c = log.column("theta_lp", p)
        assert np.all(np.diff(c) <= 1e-6), p


def test_td_second_order(g64):
    th0 = von_mises_bump(g64, center=(2.0, 3.0))
    prob = TDProblem(th0, taylor_green_velocity(g64), ADMISSIBLE, kappa=0.5)
    ref = n_steps(th0, prob, 0.5 / 512, 512)
    errs = [np.max(np.abs(n_steps(th0, prob, 0.5 / k, k).values - ref.values)) for k in (16, 32, 64)]
    rates = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.3 < r < 4.7 for r in rates), rates


def test_zero_data_gives_zero_norms(g64):
    prob = TDProblem(SpectralField.zeros(g64), shear_velocity(g64), ADMISSIBLE)
    log = run_td(prob, 0.1, 0.01)
    assert np.all(np.array(log.theta_lp) == 0)
    assert np.all(np.array(log.smoothing_ratio) == 0)


def test_forcing_enters(g64):
    src = von_mises_bump(g64)
    zero = (SpectralField.zeros(g64), SpectralField.zeros(g64))
    prob = TDProblem(SpectralField.zeros(g64), zero, ADMISSIBLE, kappa=0.0, forcing=lambda t: src)
    out = n_steps(SpectralField.zeros(g64), prob, 0.01, 10)
    assert np.max(np.abs(out.values - 0.1 * src.values)) <= 1e-13


def test_time_dependent_velocity(g64):
    base = shear_velocity(g64)
    vel = PrescribedVelocity(lambda t: (math.cos(t) * base[0], base[1]), sup_bound=1.0)
    prob = TDProblem(von_mises_bump(g64), vel, ADMISSIBLE, check_times=(0.0, 0.5, 1.0))
    log = run_td(prob, 0.5, 0.01)
    assert np.all(np.diff(log.column("theta_lp", math.inf)) <= 1e-6)


def test_cfl_violation(g64):
    prob = TDProblem(von_mises_bump(g64), shear_velocity(g64, amplitude=10.0), ADMISSIBLE)
    with pytest.raises(CFLError) as info:
        step_td(prob.theta0, prob, 0.1, step=3)
    assert info.value.step == 3
    assert "v_inf" in info.value.norms


def test_nan_detection(g64):
    bad = SpectralField(g64, values=np.full((64, 64), np.nan))
    zero = (SpectralField.zeros(g64), SpectralField.zeros(g64))
    prob = TDProblem(von_mises_bump(g64), zero, ADMISSIBLE, forcing=lambda t: bad)
    with pytest.raises(SimulationError, match="non-finite") as info:
        step_td(prob.theta0, prob, 0.01, step=7)
    assert info.value.step == 7


def test_rejects_divergent_velocity(g64):
    x1, _ = g64.coords
    v1 = SpectralField(g64, values=np.sin(x1))
    with pytest.raises(ValueError, match="divergence-free"):
        TDProblem(von_mises_bump(g64), (v1, SpectralField.zeros(g64)), ADMISSIBLE)


def test_rejects_negative_kappa(g64):
    with pytest.raises(ValueError):
        TDProblem(von_mises_bump(g64), shear_velocity(g64), ADMISSIBLE, kappa=-1.0)


def test_grid_mismatch(g64):
    prob = TDProblem(von_mises_bump(g64), shear_velocity(g64), ADMISSIBLE)
    with pytest.raises(ValueError):
        step_td(SpectralField.zeros(Grid2D(32)), prob, 0.01)


# ---------------------------------------------------------------- Boussinesq

def bous(g, alpha=0.5, dt=0.01, t_end=0.2, seed=2):
    w0 = random_field(g, seed, kmax=3, zero_mean=True)
    th0 = von_mises_bump(g, width=0.6)
    return BoussinesqProblem(w0, th0, PhiParams.at_threshold(alpha, 1.0), dt=dt, t_end=t_end)


def bous_run(prob, dt):
    w, t = prob.omega0, prob.theta0
    for k in range(int(round(prob.t_end / dt))):
        w, t = step_boussinesq(w, t, prob, dt, k * dt)
    return w, t


def test_boussinesq_second_order(g64):
    prob = bous(g64)
    ref = bous_run(prob, 0.2 / 256)
    errs = []
    for k in (10, 20, 40):
        w, t = bous_run(prob, 0.2 / k)
        errs.append(max(np.max(np.abs(w.values - ref[0].values)), np.max(np.abs(t.values - ref[1].values))))
    rates = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.3 < r < 4.7 for r in rates), rates


def test_vorticity_stays_zero_mean(g64):
    w, _ = bous_run(bous(g64), 0.01)
    assert abs(w.mean()) <= 1e-12


def test_euler_limit_small_grid(g64):
    log = build_preset("euler-check", 64, 0, {"t_end": 1.0}).run()
    for p in (2.0, math.inf):
        c = log.column("omega_lp", p)
        assert np.max(np.abs(c / c[0] - 1)) <= 1e-5
    assert np.all(log.column("theta_lp", 2.0) == 0)


def test_degenerate_state_stays_degenerate(g64):
    pre = build_preset("degenerate", 64)
    log = pre.run()
    res = np.array(log.gamma_residual)
    assert np.nanmax(res) <= 1e-10
    assert np.all(log.column("omega_lp", math.inf) == 0)
    m = log_dissipation_symbol(0.5, 1.0, pre.problem.params.lam).radial(1.0)
    c = log.column("theta_lp", 2.0)
    assert np.allclose(c, c[0] * np.exp(-m * np.array(log.times)), rtol=1e-12)


def test_gamma_residual_galilean():
    log = build_preset("galilean", 64).run()
    res = np.array(log.gamma_residual)
    assert np.isnan(res[0]) and np.isnan(res[-1])
    assert np.nanmax(res) <= 1e-8


def test_gamma_residual_needs_velocity(g64):
    th = von_mises_bump(g64)
    with pytest.raises(ValueError):
        gamma_residual((None, th), (None, th), (None, th), 0.01, 0.5, 10.0)


def test_gamma_residual_converges():
    res = {}
    for n in (64, 128):
        log = build_preset("boussinesq", n, 0, {"t_end": 0.25}).run()
        res[n] = float(np.nanmax(log.gamma_residual))
    assert res[64] / res[128] >= 2.0


def test_smoothing_and_besov_ratio_bounded(g64):
    log = run_boussinesq(bous(g64, t_end=0.5))
    sr = log.column("smoothing_ratio")
    br = log.column("besov_ratio")
    assert np.all(np.isfinite(sr)) and sr.max() > 0
    assert br.max() < 100
    assert np.all(np.diff(log.column("V")) >= 0)
    assert np.all(np.diff(log.times) > 0)


@pytest.mark.parametrize("alpha, flag", [(0.0, True), (0.5, True), (0.8, False)])
def test_alpha_range_flag(g64, alpha, flag):
    prob = bous(g64, alpha=alpha, t_end=0.02)
    assert prob.alpha_in_theory_range is flag
    log = run_boussinesq(prob)
    assert log.meta["alpha_in_theory_range"] is flag


def test_boussinesq_validation(g64):
    w0 = random_field(g64, 0, kmax=3, zero_mean=True)
    th0 = von_mises_bump(g64)
    with pytest.raises(ValueError, match="beta"):
        BoussinesqProblem(w0, th0, PhiParams(0.5, 0.5, 100.0), dt=0.01, t_end=1)
    with pytest.raises(ValueError, match="zero mean"):
        BoussinesqProblem(w0 + 1.0, th0, PhiParams(0.5, 1.0, 100.0), dt=0.01, t_end=1)
    with pytest.raises(ValueError):
        BoussinesqProblem(w0, von_mises_bump(Grid2D(32)), PhiParams(0.5, 1.0, 100.0), dt=0.01, t_end=1)


def test_boussinesq_cfl(g64):
    prob = bous(g64, dt=1.0, t_end=2.0)
    with pytest.raises(CFLError):
        run_boussinesq(prob)


# ---------------------------------------------------------------- log and presets

def test_log_serialization(tmp_path, g64):
    prob = TDProblem(von_mises_bump(g64), shear_velocity(g64), ADMISSIBLE)
    log = run_td(prob, 0.05, 0.01, MonitorSpec(every=2))
    assert log.times == pytest.approx([0.0, 0.02, 0.04])
    log.write_csv(tmp_path / "t.csv", "abc")
    log.write_json(tmp_path / "t.json", "abc")
    lines = (tmp_path / "t.csv").read_bytes().split(b"\r\n")
    assert lines[0].decode().split(",") == log.header() + ["config_hash", "tool_version"]
    assert len([x for x in lines if x]) == 4
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["grid"] == 64 and meta["config_hash"] == "abc" and meta["samples"] == 3


def test_unknown_preset():
    with pytest.raises(ValueError, match="available presets: .*maxprinciple"):
        build_preset("nope")


def test_shear_profile_has_no_x1_dependence(g64):
    f = shear_profile(g64)
    assert np.max(np.abs(f.values - f.values[:1, :])) == 0
