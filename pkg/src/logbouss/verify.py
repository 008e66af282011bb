"""
Inequality harness: both sides of the dyadic estimates on test fields.

Each check returns an :class:`InequalityReport` holding per-case left and
right sides and their ratio. The constants in the estimates are existential,
so a report passes when every ratio is finite, nonnegative and below a
configurable ceiling; scale stability is assessed by rerunning a check on a
refined grid and comparing the largest ratios.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .initial_data import (
    random_field,
    shear_profile,
    shear_velocity,
    taylor_green_velocity,
    taylor_green_vorticity,
    von_mises_bump,
)
from .kernel import PhiParams
from .littlewood_paley import (
    BesovSpec,
    besov_norm,
    build_filter_bank,
    dyadic_block,
    low_pass,
)
from .spectral import (
    Grid2D,
    SpectralField,
    advect,
    apply_multiplier,
    curl,
    divergence,
    grad_norm_field,
    log_dissipation_symbol,
    lp_norm,
    pure_mode,
    riesz_log_symbol,
)

DEFAULT_CEILING = 1e3
EMPTY_BLOCK = 1e-12


@dataclass(frozen=True)
class Case:
    case_id: str
    q: int
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.lhs == 0 and self.rhs == 0:
            return 0.0
        if self.rhs == 0:
            return math.inf
        return self.lhs / self.rhs


@dataclass
class InequalityReport:
    """Per-case sides of one estimate plus its empirical constant."""

    name: str
    params: dict
    cases: List[Case] = field(default_factory=list)
    ceiling: float = DEFAULT_CEILING
    scale_drift: Optional[float] = None
    drift_limit: float = 0.25

    @property
    def ratios(self) -> np.ndarray:
        return np.array([c.ratio for c in self.cases])

    @property
    def max_ratio(self) -> float:
        r = self.ratios
        return float(r.max()) if r.size else 0.0

    @property
    def passed(self) -> bool:
        r = self.ratios
        if r.size and not (np.all(np.isfinite(r)) and np.all(r >= 0)):
            return False
        if self.max_ratio > self.ceiling:
            return False
        if self.scale_drift is not None and not self.scale_drift < self.drift_limit:
            return False
        return True

    def rows(self):
        for c in self.cases:
            yield [c.case_id, c.q, c.lhs, c.rhs, c.ratio]

    def summary(self) -> dict:
        return {
            "name": self.name, "params": self.params, "cases": len(self.cases),
            "max_ratio": self.max_ratio, "ceiling": self.ceiling,
            "scale_drift": self.scale_drift, "passed": self.passed,
        }


def _fields_items(fields):
    if isinstance(fields, dict):
        return list(fields.items())
    return [(f"f{i}", f) for i, f in enumerate(fields)]


def _pairing(g: SpectralField, lg: SpectralField, p: float) -> float:
    """``int L g |g|^{p-2} g`` by grid quadrature (``sign(0) = 0``)."""
    gv = g.values
    w = np.sign(gv) * np.abs(gv) ** (p - 1)
    return float(np.sum(lg.values * w) * g.grid.cell_area)


def _weight(q, alpha, beta):
    return 2.0 ** (q * beta) * (abs(q) + 1.0) ** (-alpha)


def check_generalized_bernstein(p: float, params: PhiParams, fields, q_range: Optional[Sequence[int]] = None,
                                ceiling: float = DEFAULT_CEILING, grid: Optional[Grid2D] = None
                                ) -> InequalityReport:
    """``2^{q beta} (q+1)^{-alpha} ||Delta_q f||_p^p`` against ``int (L Delta_q f)|Delta_q f|^{p-2} Delta_q f``.

    Blocks with ``||Delta_q f||_p`` below ``1e-12 ||f||_p`` are skipped.
    """
    p = float(p)
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if math.isinf(p):
        raise ValueError("p must be finite")
    report = InequalityReport("generalized_bernstein",
                              {"p": p, "alpha": params.alpha, "beta": params.beta, "lambda": params.lam},
                              ceiling=ceiling)
    items = _fields_items(fields)
    if not items:
        return report
    grid = grid or items[0][1].grid
    bank = build_filter_bank(grid)
    qs = range(0, bank.q_max + 1) if q_range is None else q_range
    m = log_dissipation_symbol(params.alpha, params.beta, params.lam).on_grid(grid)
    for name, f in items:
        fn = lp_norm(f, p)
        for q in qs:
            g = dyadic_block(f, q, bank)
            gn = lp_norm(g, p)
            if gn <= EMPTY_BLOCK * max(fn, 1e-300):
                if fn == 0:
                    report.cases.append(Case(name, q, 0.0, 0.0))
                continue
            lhs = _weight(q, params.alpha, params.beta) * gn ** p
            rhs = _pairing(g, apply_multiplier(g, m), p)
            report.cases.append(Case(name, q, lhs, rhs))
    return report


def bernstein_parseval_gap(params: PhiParams, f: SpectralField, q: int) -> float:
    """Relative gap between the quadrature pairing at ``p = 2`` and ``sum m |c|^2``."""
    grid = f.grid
    bank = build_filter_bank(grid)
    m = log_dissipation_symbol(params.alpha, params.beta, params.lam).on_grid(grid)
    g = dyadic_block(f, q, bank)
    quad = _pairing(g, apply_multiplier(g, m), 2.0)
    c = g.coeffs
    exact = float(np.sum(grid.rfft_weights * m * (c.real ** 2 + c.imag ** 2)) * grid.cell_area / grid.n ** 2)
    if exact == 0:
        return abs(quad)
    return abs(quad - exact) / abs(exact)


def check_multiplier_bernstein(params: PhiParams, p: float, fields, q_range: Optional[Sequence[int]] = None,
                               ceiling: float = DEFAULT_CEILING, low_pass_variant: bool = False
                               ) -> InequalityReport:
    """``||Delta_q L f||_p / (2^{q beta}(|q|+1)^{-alpha} ||Delta_q f||_p)`` (or with ``S_q``)."""
    if not params.lam >= 2:
        raise ValueError(f"lambda must be >= 2 for this estimate, got {params.lam}")
    name = "multiplier_bernstein_Sq" if low_pass_variant else "multiplier_bernstein"
    report = InequalityReport(name, {"p": float(p), "alpha": params.alpha, "beta": params.beta,
                                     "lambda": params.lam}, ceiling=ceiling)
    items = _fields_items(fields)
    if not items:
        return report
    grid = items[0][1].grid
    bank = build_filter_bank(grid)
    qs = range(0, bank.q_max + 1) if q_range is None else q_range
    sym = log_dissipation_symbol(params.alpha, params.beta, params.lam)
    proj = low_pass if low_pass_variant else dyadic_block
    for nm, f in items:
        fn = lp_norm(f, p)
        lf = apply_multiplier(f, sym)
        for q in qs:
            g = proj(f, q, bank)
            gn = lp_norm(g, p)
            if gn <= EMPTY_BLOCK * max(fn, 1e-300):
                if fn == 0:
                    report.cases.append(Case(nm, q, 0.0, 0.0))
                continue
            lhs = lp_norm(proj(lf, q, bank), p)
            report.cases.append(Case(nm, q, lhs, _weight(q, params.alpha, params.beta) * gn))
    return report


def single_mode_multiplier_ratio(q: int, alpha: float, lam: float) -> float:
    """Closed form ``((q+1) / log(lam + 2^q))^alpha`` of the multiplier ratio."""
    return ((q + 1) / math.log(lam + 2.0 ** q)) ** alpha


def commutator(v1: SpectralField, v2: SpectralField, theta: SpectralField, alpha: float, lam: float
               ) -> SpectralField:
    """``[R_alpha, v . grad] theta = R_alpha(v . grad theta) - v . grad(R_alpha theta)``."""
    R = riesz_log_symbol(alpha, lam)
    return apply_multiplier(advect(v1, v2, theta), R) - advect(v1, v2, apply_multiplier(theta, R))


def _check_div_free(v1, v2, tol=1e-10):
    scale = max(1.0, float(np.max(np.abs(v1.values))), float(np.max(np.abs(v2.values))))
    div = float(np.max(np.abs(divergence(v1, v2).values)))
    if div > tol * scale:
        raise ValueError(f"velocity is not divergence-free (max |div v| = {div:.3e})")


def commutator_sides(p: float, r: float, alpha: float, lam: float, v, theta: SpectralField,
                     variant: int = 1, eps: float = 0.1, rho: float = 2.0):
    """``(lhs, rhs)`` of the commutator estimate.

    variant 1: ``||C||_{B^0_{p,r}}`` vs ``||grad v||_p (||theta||_{B^{0,alpha}_{inf,r}} + ||theta||_p)``;
    variant 2: ``||C||_{B^0_{inf,r}}`` vs
    ``(||omega||_inf + ||omega||_rho)(||theta||_{B^eps_{inf,r}} + ||theta||_rho)``.
    """
    v1, v2 = v
    _check_div_free(v1, v2)
    bank = build_filter_bank(theta.grid)
    c = commutator(v1, v2, theta, alpha, lam)
    if variant == 1:
        if not (2 <= p < math.inf and 1 <= r):
            raise ValueError("variant 1 needs p in [2, inf) and r in [1, inf]")
        lhs = besov_norm(c, BesovSpec(0.0, 0.0, p, r), bank)
        gv = SpectralField(theta.grid, values=grad_norm_field(v1, v2))
        rhs = lp_norm(gv, p) * (besov_norm(theta, BesovSpec(0.0, alpha, math.inf, r), bank) + lp_norm(theta, p))
    elif variant == 2:
        if not (eps > 0 and 1 < rho < math.inf):
            raise ValueError("variant 2 needs eps > 0 and rho in (1, inf)")
        lhs = besov_norm(c, BesovSpec(0.0, 0.0, math.inf, r), bank)
        w = curl(v1, v2)
        rhs = ((lp_norm(w, math.inf, polish=True) + lp_norm(w, rho))
               * (besov_norm(theta, BesovSpec(eps, 0.0, math.inf, r), bank) + lp_norm(theta, rho)))
    else:
        raise ValueError(f"variant must be 1 or 2, got {variant}")
    return lhs, rhs


def check_commutator(p: float, r: float, alpha: float, lam: float, v, theta: SpectralField,
                     variant: int = 1, eps: float = 0.1, rho: float = 2.0, case_id: str = "case",
                     ceiling: float = DEFAULT_CEILING) -> InequalityReport:
    lhs, rhs = commutator_sides(p, r, alpha, lam, v, theta, variant, eps, rho)
    params = {"p": float(p), "r": float(r), "alpha": alpha, "lambda": lam, "variant": variant}
    if variant == 2:
        params.update(eps=eps, rho=rho)
    return InequalityReport(f"commutator_v{variant}", params, [Case(case_id, -1, lhs, rhs)], ceiling=ceiling)


# --------------------------------------------------------------------------
# Suite

@dataclass(frozen=True)
class SuiteConfig:
    """Parameter and field matrix of :func:`run_suite`.

    ``lambda`` sits at the sufficient threshold for each ``(alpha, beta)``.
    With ``refine_check`` every check is repeated on a grid of size ``2 n``
    and the relative change of the largest ratio is recorded.
    """

    n: int = 256
    seed: int = 0
    alphas: Sequence[float] = (0.0, 0.5, 1.0)
    betas: Sequence[float] = (0.5, 1.0)
    bernstein_p: Sequence[float] = (1.5, 2.0, 4.0)
    commutator_p: Sequence[float] = (2.0, 4.0)
    commutator_r: Sequence[float] = (1.0, math.inf)
    eps_list: Sequence[float] = (0.1, 0.3, 0.5)
    rho: float = 2.0
    n_random: int = 2
    random_kmax: float = 20.0
    ceiling: float = DEFAULT_CEILING
    drift_limit: float = 0.25
    refine_check: bool = True
    include_fields: bool = True
    checks: Sequence[str] = ("bernstein", "multiplier", "commutator")

    def __post_init__(self):
        unknown = set(self.checks) - {"bernstein", "multiplier", "commutator"}
        if unknown:
            raise ValueError(f"checks: unknown check names {sorted(unknown)}")


@lru_cache(maxsize=8)
def bernstein_corpus(grid: Grid2D, seed: int, n_random: int = 2, kmax: float = 20.0) -> Dict[str, SpectralField]:
    """Pure modes at each dyadic radius, seeded random fields and structured fields.

    Cached per grid; treat the returned fields as read-only.
    """
    bank = build_filter_bank(grid)
    out = {}
    for q in range(0, bank.q_max + 1):
        out[f"mode_2^{q}"] = pure_mode(grid, 2 ** q, 0)
    for i in range(n_random):
        out[f"random_{seed}_{i}"] = random_field(grid, seed * 1000 + i, kmax=kmax)
    out["shear"] = shear_profile(grid)
    out["taylor_green"] = taylor_green_vorticity(grid)
    out["bump"] = von_mises_bump(grid, center=(2.0, 3.0), width=0.5)
    return out


@lru_cache(maxsize=8)
def commutator_corpus(grid: Grid2D, seed: int):
    """``(case_id, velocity, theta)`` triples with divergence-free velocities."""
    bump = von_mises_bump(grid, center=(2.0, 3.0), width=0.5)
    rnd = random_field(grid, seed * 1000 + 7, kmax=12.0)
    return [
        ("taylor_green/bump", taylor_green_velocity(grid), bump),
        ("shear/bump", shear_velocity(grid), bump),
        ("taylor_green/random", taylor_green_velocity(grid), rnd),
    ]


@dataclass
class SuiteResult:
    reports: List[InequalityReport]
    config: SuiteConfig

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def summary(self) -> dict:
        return {"passed": self.passed, "reports": [r.summary() for r in self.reports]}

    def csv_rows(self):
        for i, rep in enumerate(self.reports):
            tag = _report_tag(i, rep)
            for row in rep.rows():
                yield [tag] + row

    def write(self, out_dir, config_hash: str = ""):
        from .io import write_csv, write_json
        out_dir = Path(out_dir)
        header = ["report", "case_id", "q", "lhs", "rhs", "ratio"]
        paths = [write_csv(out_dir / "verify_cases.csv", header, self.csv_rows(), config_hash)]
        summary_rows = ([_report_tag(i, r), r.name, r.max_ratio, r.ceiling,
                         "" if r.scale_drift is None else r.scale_drift, r.passed]
                        for i, r in enumerate(self.reports))
        paths.append(write_csv(out_dir / "verify_summary.csv",
                               ["report", "name", "max_ratio", "ceiling", "scale_drift", "passed"],
                               summary_rows, config_hash))
        paths.append(write_json(out_dir / "verify_summary.json", self.summary(), config_hash))
        return paths


def _report_tag(i, rep):
    keys = ",".join(f"{k}={_fmt(v)}" for k, v in sorted(rep.params.items()))
    return f"{i:03d}:{rep.name}[{keys}]"


def _fmt(v):
    return "inf" if isinstance(v, float) and math.isinf(v) else f"{v:g}" if isinstance(v, float) else str(v)


def thread_count() -> int:
    env = os.environ.get("LOGBOUSS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def _tasks(config: SuiteConfig):
    tasks = []
    for a in config.alphas:
        for b in config.betas:
            prm = PhiParams.at_threshold(a, b)
            if "bernstein" in config.checks:
                for p in config.bernstein_p:
                    tasks.append(("bernstein", prm, p))
            if "multiplier" in config.checks:
                tasks.append(("multiplier", prm, 2.0, False))
                tasks.append(("multiplier", prm, 2.0, True))
    if "commutator" not in config.checks:
        return tasks
    for a in config.alphas:
        lam = PhiParams.at_threshold(a, 1.0).lam
        for p in config.commutator_p:
            for r in config.commutator_r:
                tasks.append(("commutator1", a, lam, p, r))
        for eps in config.eps_list:
            tasks.append(("commutator2", a, lam, eps))
    return tasks


def _run_task(task, grid: Grid2D, config: SuiteConfig) -> InequalityReport:
    kind = task[0]
    corpus = bernstein_corpus(grid, config.seed, config.n_random, config.random_kmax) if config.include_fields else {}
    if kind == "bernstein":
        _, prm, p = task
        return check_generalized_bernstein(p, prm, corpus, ceiling=config.ceiling, grid=grid)
    if kind == "multiplier":
        _, prm, p, lowp = task
        return check_multiplier_bernstein(prm, p, corpus, ceiling=config.ceiling, low_pass_variant=lowp)
    if kind in ("commutator1", "commutator2"):
        a, lam = task[1], task[2]
        if kind == "commutator1":
            p, r, variant, eps = task[3], task[4], 1, 0.1
            params = {"p": float(p), "r": float(r), "alpha": a, "lambda": lam, "variant": 1}
        else:
            p, r, variant, eps = 2.0, 1.0, 2, task[3]
            params = {"r": 1.0, "alpha": a, "lambda": lam, "variant": 2, "eps": eps, "rho": config.rho}
        rep = InequalityReport(f"commutator_v{variant}", params, ceiling=config.ceiling)
        if config.include_fields:
            for cid, v, th in commutator_corpus(grid, config.seed):
                lhs, rhs = commutator_sides(p, r, a, lam, v, th, variant, eps, config.rho)
                rep.cases.append(Case(cid, -1, lhs, rhs))
        return rep
    raise ValueError(f"unknown task {kind!r}")


def _run_pair(task, config):
    try:
        rep = _run_task(task, Grid2D(config.n), config)
        if config.refine_check and config.include_fields:
            fine = _run_task(task, Grid2D(2 * config.n), config)
            base = rep.max_ratio
            rep.scale_drift = abs(fine.max_ratio - base) / base if base > 0 else abs(fine.max_ratio)
        rep.drift_limit = config.drift_limit
        return rep
    except Exception as exc:
        raise RuntimeError(f"check {task[0]} with {task[1:]} failed: {exc}") from exc


def run_suite(config: Optional[SuiteConfig] = None, threads: Optional[int] = None) -> SuiteResult:
    """Run every configured check; order of reports is fixed by the task list."""
    config = config or SuiteConfig()
    tasks = _tasks(config)
    threads = threads or thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(lambda t: _run_pair(t, config), tasks))
    else:
        reports = [_run_pair(t, config) for t in tasks]
    return SuiteResult(reports, config)
