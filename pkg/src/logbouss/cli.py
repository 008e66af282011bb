"""
Kernel scans, simulations and inequality checks for logarithmically
dissipative transport and Boussinesq systems.

    logbouss kernel | askey | simulate | verify | bernstein | commutator
             [--config PATH] [--out DIR] [--seed N] [--grid N] [--plots] [--json-only]

Exit status: 0 on success, 1 when a verification report fails, 2 on
invalid input or an aborted computation.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .config import SUBCOMMANDS, ConfigError, load_config
from .io import write_csv, write_dict_rows, write_json
from .quadrature import QuadratureError

KERNEL_COLUMNS = ["alpha", "beta", "lambda", "d", "t", "mass", "min_value",
                  "askey_phi1", "askey_phi2", "askey_phi3", "first_violation_r"]


def _pmap(func, items):
    from .verify import thread_count
    items = list(items)
    n = min(thread_count(), max(1, len(items)))
    if n == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(func, items))


def _param_points(cfg):
    from .kernel import PhiParams
    pts = []
    for a in cfg.alphas:
        for b in cfg.betas:
            lams = cfg.lambdas or (PhiParams.at_threshold(a, b).lam,)
            for lam in lams:
                pts.append(PhiParams(a, b, lam))
    return pts


def cmd_kernel(cfg, out: Path, h: str):
    from .kernel import default_radii, kernel_eval, poisson_kernel_1d
    tasks = [(p, d, t) for p in _param_points(cfg) for d in cfg.dims for t in cfg.times]
    if not tasks:
        raise ConfigError("alphas", "empty parameter range")

    def run(task):
        p, d, t = task
        return kernel_eval(t, p, d, default_radii(t, p, cfg.kernel_radii - 1))

    reports = _pmap(run, tasks)
    rows = [r.row() for r in reports]
    written = []
    if cfg.json_only:
        written.append(write_json(out / "kernel_scan.json", {"rows": rows}, h))
        return written, 0
    written.append(write_dict_rows(out / "kernel_scan.csv", rows, h, KERNEL_COLUMNS))
    vals = ([r.params.alpha, r.params.beta, r.params.lam, r.d, r.t, x, k]
            for r in reports for x, k in zip(r.radii, r.values))
    written.append(write_csv(out / "kernel_values.csv", ["alpha", "beta", "lambda", "d", "t", "r", "K"], vals, h))
    written.append(write_json(out / "kernel_summary.json", {
        "points": len(rows),
        "max_mass_error": max(abs(r["mass"] - 1) for r in rows),
        "min_value": min(r["min_value"] for r in rows),
    }, h))
    if cfg.plots:
        from . import plotting
        overlay = {i: (lambda r, t=rep.t: poisson_kernel_1d(r, t)) for i, rep in enumerate(reports)
                   if rep.d == 1 and rep.params.alpha == 0 and rep.params.beta == 1}
        written.append(plotting.kernel_curves(reports, out / "kernel_curves.svg", overlay))
        written.append(plotting.positivity_map(rows, out / "positivity_map.svg"))
    return written, 0


def cmd_askey(cfg, out: Path, h: str):
    import numpy as np
    from .kernel import askey_check
    grid = np.logspace(-3, 6, cfg.askey_radii)
    points = _param_points(cfg)
    verdicts = _pmap(lambda p: askey_check(p, grid, fd_check=False), points)
    rows = []
    for p, v in zip(points, verdicts):
        fv = v.first_violation_r
        rows.append({"alpha": p.alpha, "beta": p.beta, "lambda": p.lam, "threshold": p.threshold,
                     "above_threshold": p.above_threshold, "phi1": v.phi1_ok, "phi2": v.phi2_ok,
                     "phi3": v.phi3_ok, "first_violation_r": "" if fv is None else fv, "f3_max": v.f3_max})
    if cfg.json_only:
        return [write_json(out / "askey.json", {"rows": rows}, h)], 0
    written = [write_dict_rows(out / "askey.csv", rows, h)]
    if cfg.plots:
        from . import plotting
        written.append(plotting.askey_map(rows, out / "askey_map.svg"))
    return written, 0


def cmd_simulate(cfg, out: Path, h: str):
    from .presets import build_preset
    preset = build_preset(cfg.preset, cfg.grid, cfg.seed, cfg.preset_options)
    log = preset.run()
    log.meta.update(preset=preset.name, description=preset.description, seed=cfg.seed, version=__version__)
    written = [out / "trajectory.json"]
    log.write_json(out / "trajectory.json", h)
    if cfg.json_only:
        return written, 0
    log.write_csv(out / "trajectory.csv", h)
    written.append(out / "trajectory.csv")
    if cfg.plots:
        from . import plotting
        written.append(plotting.norm_history(log, out / "norms.svg"))
    return written, 0


def _suite(cfg, out: Path, h: str, checks):
    from .verify import SuiteConfig, run_suite
    sc = SuiteConfig(n=cfg.grid, seed=cfg.seed, alphas=tuple(cfg.alphas), betas=tuple(cfg.betas),
                     bernstein_p=tuple(cfg.p_list), eps_list=tuple(cfg.eps_list), ceiling=cfg.ceiling,
                     refine_check=cfg.refine_check, checks=checks)
    res = run_suite(sc)
    status = 0 if res.passed else 1
    if cfg.json_only:
        return [write_json(out / "verify_summary.json", res.summary(), h)], status
    written = res.write(out, h)
    if cfg.plots:
        from . import plotting
        written.append(plotting.ratio_bars(res.reports, out / "verify_ratios.svg"))
    return written, status


def cmd_verify(cfg, out, h):
    return _suite(cfg, out, h, ("bernstein", "multiplier", "commutator"))


def cmd_bernstein(cfg, out, h):
    return _suite(cfg, out, h, ("bernstein", "multiplier"))


def cmd_commutator(cfg, out, h):
    return _suite(cfg, out, h, ("commutator",))


COMMANDS = {
    "kernel": cmd_kernel,
    "askey": cmd_askey,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "bernstein": cmd_bernstein,
    "commutator": cmd_commutator,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="logbouss", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"logbouss {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    common.add_argument("--seed", type=int, metavar="N", help="random seed")
    common.add_argument("--grid", type=int, metavar="N", help="grid points per side")
    common.add_argument("--plots", action="store_true", default=None, help="also write SVG figures")
    common.add_argument("--json-only", action="store_true", default=None, help="write JSON only (no CSV, no SVG)")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "kernel": "kernel mass, minimum and Askey verdicts over a parameter matrix",
        "askey": "sign conditions on phi', phi'', phi''' over a parameter matrix",
        "simulate": "run a named simulation preset",
        "verify": "full inequality suite",
        "bernstein": "Bernstein-type inequalities only",
        "commutator": "commutator estimates only",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "simulate":
            sp.add_argument("--preset", help="preset name")
        if name in ("verify", "bernstein", "commutator"):
            sp.add_argument("--ceiling", type=float, help="ratio ceiling for the pass flag")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"out": args.out, "seed": args.seed, "grid": args.grid, "plots": args.plots,
                 "json_only": args.json_only, "preset": getattr(args, "preset", None),
                 "ceiling": getattr(args, "ceiling", None)}
    try:
        cfg = load_config(args.command, args.config, overrides)
        out = Path(cfg.out)
        h = cfg.config_hash()
        written, status = COMMANDS[args.command](cfg, out, h)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    if status:
        print("verification failed: at least one report exceeded its ceiling or drifted", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
