import math

import numpy as np
import pytest

from logbouss.littlewood_paley import (
    BesovSpec,
    besov_norm,
    block_norms,
    build_filter_bank,
    chi_profile,
    dyadic_block,
    low_pass,
    lr_aggregate,
    phi_profile,
    q_max_for,
)
from logbouss.spectral import Grid2D, SpectralField, lp_norm, partial, pure_mode, random_bandlimited


@pytest.fixture(scope="module")
def bank():
    return build_filter_bank(Grid2D(128))


def band_field(bank, seed):
    return random_bandlimited(bank.grid, bank.resolved_radius, np.random.default_rng(seed), kmin=0.0)


@pytest.mark.parametrize("n, expected", [(128, 4), (256, 5), (512, 6)])
def test_q_max(n, expected):
    assert q_max_for(Grid2D(n)) == expected


def test_bank_needs_three_blocks():
    assert build_filter_bank(Grid2D(16)).q_max == 1
    with pytest.raises(ValueError):
        build_filter_bank(Grid2D(16, period=16 * math.pi))


def test_profiles_support_and_normalization():
    rho = np.linspace(0, 4, 4001)
    chi = chi_profile(rho)
    assert np.all(chi[rho <= 0.5] == 1) and np.all(chi[rho >= 1] == 0)
    phi = phi_profile(rho)
    assert np.all(phi[(rho <= 0.5) | (rho >= 2)] == 0)
    assert phi_profile(1.0) == 1.0
    assert np.all(phi >= 0)


def test_partition_of_unity(bank):
    k = bank.grid.kmag
    total = bank.filter(-1) + sum(bank.filter(q) for q in range(0, bank.q_max + 1))
    resolved = k <= bank.resolved_radius
    assert np.max(np.abs(total[resolved] - 1)) <= 1e-12


def test_almost_orthogonality(bank):
    for j in range(-1, bank.q_max + 1):
        for k in range(j + 2, bank.q_max + 1):
            prod = bank.filter(j) * bank.filter(k)
            assert not np.any(prod), (j, k)


@pytest.mark.parametrize("q", [0, 2, 4])
def test_pure_mode_is_its_own_block(bank, q):
    f = pure_mode(bank.grid, 2 ** q)
    out = dyadic_block(f, q, bank)
    assert np.max(np.abs(out.values - f.values)) < 1e-13


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_blocks_sum_to_field(bank, seed):
    f = band_field(bank, seed)
    total = sum((dyadic_block(f, q, bank) for q in bank.blocks), SpectralField.zeros(bank.grid))
    assert np.max(np.abs(total.values - f.values)) <= 1e-10


def test_disjoint_block_is_zero(bank):
    f = pure_mode(bank.grid, 2 ** 4)
    assert np.max(np.abs(dyadic_block(f, 0, bank).values)) < 1e-15


def test_low_block_keeps_constant(bank):
    f = SpectralField.zeros(bank.grid) + 3.0
    assert np.allclose(dyadic_block(f, -1, bank).values, 3.0, atol=1e-13)


@pytest.mark.parametrize("q", [-2, 5, 1.5])
def test_block_index_checked(bank, q):
    with pytest.raises(ValueError):
        dyadic_block(SpectralField.zeros(bank.grid), q, bank)


def test_low_pass_identities(bank):
    f = band_field(bank, 7)
    assert np.allclose(low_pass(f, 0, bank).values, dyadic_block(f, -1, bank).values, atol=1e-14)
    for q in (bank.q_max + 1, bank.q_max + 3):
        assert np.max(np.abs(low_pass(f, q, bank).values - f.values)) <= 1e-10
    partial_sum = sum((dyadic_block(f, j, bank) for j in range(-1, 3)), SpectralField.zeros(bank.grid))
    assert np.max(np.abs(low_pass(f, 3, bank).values - partial_sum.values)) < 1e-12


def test_low_pass_derivative_bernstein(bank):
    f = band_field(bank, 3)
    consts = []
    for q in range(1, bank.q_max + 1):
        s = low_pass(f, q, bank)
        base = lp_norm(s, math.inf, polish=True)
        for k in (1, 2):
            d = nth_partial(s, 0, k)
            consts.append((lp_norm(d, math.inf, polish=True) / (2.0 ** (q * k) * base)) ** (1 / k))
    assert max(consts) < 4.0


def nth_partial(f, axis, k):
    for _ in range(k):
        f = partial(f, axis)
    return f


@pytest.mark.parametrize("p", [2.0, 4.0, math.inf])
def test_block_derivative_bounds(bank, p):
    f = band_field(bank, 9)
    for q in range(0, bank.q_max + 1):
        g = dyadic_block(f, q, bank)
        base = lp_norm(g, p)
        for k in (1, 2):
            top = max(lp_norm(nth_partial(g, 0, k), p), lp_norm(nth_partial(g, 1, k), p))
            r = top / (2.0 ** (q * k) * base)
            assert 1 / 64 <= r <= 64, (q, k, r)


def test_besov_zero(bank):
    assert besov_norm(SpectralField.zeros(bank.grid), BesovSpec(1.0, 0.5, 2, 1), bank) == 0


@pytest.mark.parametrize("q", [1, 3])
def test_besov_single_mode(bank, q):
    f = pure_mode(bank.grid, 2 ** q)
    got = besov_norm(f, BesovSpec(1.0, 0.0, 2, math.inf), bank)
    assert got == pytest.approx(2 ** q * lp_norm(f, 2), rel=1e-12)


def test_besov_r_monotone(bank):
    f = band_field(bank, 4)
    assert besov_norm(f, BesovSpec(0.5, 0.0, 2, 1), bank) >= besov_norm(f, BesovSpec(0.5, 0.0, 2, math.inf), bank)


def test_besov_log_weight_uses_literal_formula(bank):
    f = SpectralField.zeros(bank.grid) + 1.0
    got = besov_norm(f, BesovSpec(0.0, 1.0, 2, 1), bank)
    # only the q = -1 block is nonzero, with weight (|-1| + 1)^1 = 2
    assert got == pytest.approx(2 * lp_norm(f, 2), rel=1e-12)


@pytest.mark.parametrize("alpha, eps", [(0.5, 0.1), (1.0, 0.3)])
def test_log_weighted_norm_dominated_by_eps_norm(bank, alpha, eps):
    ratios = []
    for seed in range(4):
        f = band_field(bank, seed)
        a = besov_norm(f, BesovSpec(0.0, alpha, math.inf, 1), bank)
        b = besov_norm(f, BesovSpec(eps, 0.0, math.inf, 1), bank)
        ratios.append(a / b)
    assert max(ratios) < 20


@pytest.mark.parametrize("kwargs", [dict(p=0.5), dict(r=0.9), dict(s=math.inf)])
def test_besov_spec_validation(kwargs):
    with pytest.raises(ValueError):
        BesovSpec(**kwargs)


def test_lr_aggregate():
    seq = [3.0, 4.0]
    assert lr_aggregate(seq, 2) == pytest.approx(5.0)
    assert lr_aggregate(seq, 1) == 7.0
    assert lr_aggregate(seq, math.inf) == 4.0
    assert lr_aggregate([], 2) == 0.0


def test_block_norms_shape(bank):
    f = band_field(bank, 0)
    norms = block_norms(f, 2, bank)
    assert norms.shape == (bank.q_max + 2,)
    assert np.all(norms >= 0)
