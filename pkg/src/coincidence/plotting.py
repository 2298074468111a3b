"""Render sweep tables to image files next to their CSV output."""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 10,
}


def _finite(xs, ys):
    pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y) and y > 0]
    return [p[0] for p in pts], [p[1] for p in pts]


def _group(rows, *keys):
    out = defaultdict(list)
    for r in rows:
        out[tuple(r[k] for k in keys)].append(r)
    return out


def plot_capacity(rows, ax):
    for (n, p_d), grp in sorted(_group(rows, "n", "p_dark_count").items()):
        ax.plot([r["p_avalanche"] for r in grp], [r["capacity"] for r in grp], label=f"n={n}, p_D={p_d:g}")
    ax.set_xlabel("detection efficiency p_A")
    ax.set_ylabel("channel capacity (bits)")
    ax.legend(fontsize=7, ncol=2)


def plot_regimes(rows, ax):
    x = [r["p_s"] for r in rows]
    for key in ("snr", "car", "cdr"):
        ax.loglog(*_finite(x, [r[key] for r in rows]), label=key.upper())
    ax.axhline(1.0, color="k", lw=0.8, ls=":")
    ax.axvline(rows[0]["min_p_s_cdr"], color="grey", ls="--", lw=0.8)
    ax.axvline(_ir_crossing(rows), color="grey", ls="-.", lw=0.8)
    ax.set_xlabel("arrival probability p_S")
    ax.set_ylabel("ratio")
    ax.legend()


def _ir_crossing(rows):
    # first p_S exceeding its own inference ratio
    for r in rows:
        if r["p_s"] > r["ir"]:
            return r["p_s"]
    return rows[-1]["p_s"]


def plot_design(rows, ax):
    for (name,), grp in _group(rows, "preset").items():
        line = ax.loglog([r["pump_power_w"] * 1e3 for r in grp], [r["rate_hz"] for r in grp], label=name)
        r_min, p_min = grp[0]["r_min_hz"], grp[0]["pump_power_at_r_min_w"] * 1e3
        if math.isfinite(r_min) and r_min > 0:
            ax.plot([p_min], [r_min], "o", color=line[0].get_color())
    cap = [r for r in rows if r["over_cap"]]
    if cap:
        ax.axvline(min(r["pump_power_w"] for r in cap) * 1e3, color="k", ls=":", lw=0.8)
    ax.set_xlabel("pump power (mW)")
    ax.set_ylabel("triplet generation rate (Hz)")
    ax.legend()


def plot_detectors(rows, ax):
    for (p_d,), grp in sorted(_group(rows, "p_dark_count").items()):
        ax.semilogy(*_finite([r["p_avalanche"] for r in grp], [r["r_min_hz"] for r in grp]), label=f"p_D={p_d:.0e}")
    ax.set_xlabel("per-channel detection efficiency")
    ax.set_ylabel("minimum detectable rate (Hz)")
    ax.legend(fontsize=7)


def plot_axis(rows, ax):
    path = next(iter(rows[0]))
    x = [r[path] for r in rows]
    ax.semilogy(*_finite(x, [r["snr"] for r in rows]), label="SNR")
    ax.semilogy(*_finite(x, [r["cdr"] for r in rows]), label="CDR")
    ax2 = ax.twinx()
    ax2.semilogy(*_finite(x, [r["t_int_target"] / 3600 for r in rows]), "k--", label="T_int (h)")
    ax2.set_ylabel("integration time (h)")
    ax.set_xlabel(path)
    ax.legend(loc="upper left")


PLOTTERS = {
    "capacity": plot_capacity,
    "regimes": plot_regimes,
    "design": plot_design,
    "detectors": plot_detectors,
    "axis": plot_axis,
}


def render(kind: str, rows, path) -> Path:
    """Draw ``rows`` for figure ``kind`` and save it to ``path``."""
    path = Path(path)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        try:
            PLOTTERS[kind](rows, ax)
            fig.tight_layout()
            fig.savefig(path)
        finally:
            plt.close(fig)
    return path
