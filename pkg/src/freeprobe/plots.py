"""Figure renderers for the report paths of the CLI.

Each function takes the already-computed data and a target path and writes
one PNG next to the delimited output.  Nothing here recomputes.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_SIZE = (6.4, 4.0)


def _new_axes(xlabel, ylabel):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def density_figure(solution, path, histogram=None):
    """Equilibrium density over its support, optionally with a sample histogram."""
    m = solution.measure
    x = np.linspace(m.a, m.b, 600)
    fig, ax = _new_axes("x", "density")
    if histogram is not None:
        ax.hist(histogram, bins=60, density=True, alpha=0.4, color="tab:gray",
                label="chain samples")
    ax.plot(x, m.density(x), color="tab:blue", label="equilibrium density")
    ax.axvline(m.a, color="k", lw=0.5, ls=":")
    ax.axvline(m.b, color="k", lw=0.5, ls=":")
    ax.legend(frameon=False)
    return _save(fig, path)


def omega_figure(rows, path):
    """omega(k) and the saddle trajectory, colored by branch."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 6.4), sharex=True)
    colors = {"small_k_g_branch": "tab:blue", "large_k_h_branch": "tab:red",
              "series": "tab:green"}
    for branch, color in colors.items():
        sel = [r for r in rows if r["branch"] == branch]
        if not sel:
            continue
        ks = [r["k"] for r in sel]
        ax1.plot(ks, [r["omega"] for r in sel], ".", ms=3, color=color, label=branch)
        ax2.plot(ks, [r["saddle_location"] for r in sel], ".", ms=3, color=color)
    ax1.set_ylabel("omega(k)")
    ax1.legend(frameon=False, fontsize=8)
    ax2.set_ylabel("saddle location")
    ax2.set_xlabel("k")
    for ax in (ax1, ax2):
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    return _save(fig, path)


def transform_figure(rows, path):
    """R(k) and the Blue's function on the evaluation grid."""
    ks = [r["k"] for r in rows]
    fig, ax = _new_axes("k", "value")
    ax.plot(ks, [r["r"] for r in rows], "-", color="tab:blue", label="R(k)")
    ax.plot(ks, [r["blue"] for r in rows], "--", color="tab:red", label="b(k)")
    ax.legend(frameon=False)
    lo, hi = np.percentile([r["blue"] for r in rows], [5, 95])
    if hi > lo:
        pad = 0.5 * (hi - lo)
        ax.set_ylim(lo - pad, hi + pad)  # keep the 1/k pole from flattening R
    return _save(fig, path)


def correlation_figure(rows_by_tag, path):
    """Correlation curves versus unfolded offset, one errorbar set per ensemble."""
    fig, ax = _new_axes("epsilon (spacings)", "Re C / |C|")
    for tag, rows in rows_by_tag.items():
        eps = [r["epsilon"] for r in rows]
        re = [r["re"] for r in rows]
        err = [r["stderr"] for r in rows]
        ax.errorbar(eps, re, yerr=err, fmt="o-", ms=3, capsize=2, label=str(tag))
    ax.legend(frameon=False)
    return _save(fig, path)


def charfn_figure(rows, path):
    """Finite-size estimates against the limit value, versus 1/N."""
    fig, ax = _new_axes("1/N", "estimate")
    ns = np.array([r["N"] for r in rows], dtype=float)
    est = [r["estimate"] for r in rows]
    err = [r["stderr"] for r in rows]
    ax.errorbar(1.0 / ns, est, yerr=err, fmt="o", capsize=3, label="finite-N estimate")
    ref = [r.get("reference") for r in rows if r.get("reference") is not None]
    if ref:
        ax.axhline(ref[0], color="tab:red", lw=1, label="R-integral limit")
    ax.legend(frameon=False)
    return _save(fig, path)
