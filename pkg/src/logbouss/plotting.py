"""
Static SVG figures for the CLI reports.

matplotlib is an optional dependency and is imported on first use. Output
is deterministic: fixed SVG hash salt, no date metadata, Agg backend.
"""

import math
from pathlib import Path

import numpy as np

_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "logbouss",
    "svg.fonttype": "path",
    "figure.figsize": (6.0, 3.8),
}


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("plotting needs matplotlib; install the 'plots' extra") from exc
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    plt = _pyplot()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _figure():
    plt = _pyplot()
    import matplotlib as mpl
    mpl.rcParams.update(_STYLE)
    fig, ax = plt.subplots()
    return fig, ax


def kernel_curves(reports, path, overlay=None):
    """``|K_t(r)|`` on log-log axes, one curve per report.

    ``overlay`` maps a report index to a closed-form callable ``r -> K``;
    the maximum relative deviation over the plotted radii is annotated.
    """
    fig, ax = _figure()
    overlay = overlay or {}
    notes = []
    for i, rep in enumerate(reports):
        r, k = rep.radii, rep.values
        pos = r > 0
        label = (f"a={rep.params.alpha:g} b={rep.params.beta:g} d={rep.d} t={rep.t:g}")
        ax.loglog(r[pos], np.abs(k[pos]), lw=1.0, label=label)
        if i in overlay:
            exact = overlay[i](r)
            ax.loglog(r[pos], exact[pos], "k:", lw=1.0)
            dev = float(np.max(np.abs(k / exact - 1)))
            notes.append(f"max rel. deviation from closed form: {dev:.2e}")
    ax.set_xlabel("r")
    ax.set_ylabel("|K_t(r)|")
    if notes:
        ax.text(0.02, 0.03, "\n".join(notes), transform=ax.transAxes, fontsize=8)
    if len(reports) <= 8:
        ax.legend(fontsize=7, frameon=False)
    return _save(fig, path)


def positivity_map(rows, path):
    """Kernel minimum per ``(alpha, beta)``; markers show sign and Askey verdict."""
    fig, ax = _figure()
    for row in rows:
        ok = row["min_value"] >= -1e-8
        askey = row["askey_phi1"] and row["askey_phi2"] and row["askey_phi3"]
        marker = "o" if askey else "x"
        color = "tab:green" if ok else "tab:red"
        ax.scatter([row["alpha"]], [row["beta"]], marker=marker, c=color, s=30)
    ax.set_xlabel("alpha")
    ax.set_ylabel("beta")
    ax.set_title("kernel minimum >= -1e-8 (green); Askey conditions hold (o)", fontsize=8)
    return _save(fig, path)


def askey_map(rows, path):
    fig, ax = _figure()
    for row in rows:
        ok = row["phi1"] and row["phi2"] and row["phi3"]
        ax.scatter([row["alpha"]], [math.log(row["lambda"])], marker="o" if ok else "x",
                   c="tab:green" if ok else "tab:red", s=30)
    ax.set_xlabel("alpha")
    ax.set_ylabel("log lambda")
    ax.set_title("sign conditions on phi', phi'', phi''' (o: all hold)", fontsize=8)
    return _save(fig, path)


def norm_history(log, path):
    """Relative ``L^p`` norms of theta and omega against time."""
    fig, ax = _figure()
    t = np.asarray(log.times)
    for name, style in (("theta_lp", "-"), ("omega_lp", "--")):
        for p in log.p_list:
            c = log.column(name, p)
            if c[0] == 0:
                continue
            ax.plot(t, c / c[0], style, lw=1.0, label=f"{name.split('_')[0]} L{'inf' if math.isinf(p) else f'{p:g}'}")
    ax.set_xlabel("t")
    ax.set_ylabel("norm / initial norm")
    ax.legend(fontsize=7, frameon=False, ncol=2)
    return _save(fig, path)


def ratio_bars(reports, path):
    """Largest ratio per report on a log axis, with each ceiling marked."""
    fig, ax = _figure()
    vals = [max(r.max_ratio, 1e-300) for r in reports]
    ax.bar(range(len(vals)), vals, color=["tab:blue" if r.passed else "tab:red" for r in reports])
    if reports and reports[0].ceiling > 0:
        ax.axhline(reports[0].ceiling, color="k", lw=0.8, ls=":")
    ax.set_yscale("log")
    ax.set_xlabel("report index")
    ax.set_ylabel("max LHS/RHS")
    return _save(fig, path)
