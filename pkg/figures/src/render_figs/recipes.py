"""Figure recipes over the documented nvmotion CSV schemas.

Rendering is fully deterministic: fixed style, fixed size, Agg backend,
no timestamps; identical inputs give identical image bytes.  Input
files are validated against the expected column schema before any
output is created, and images are written atomically (temp file +
rename), so a failed render never leaves a partial file.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_IDS = ("fig3", "fig4", "fig5", "fig6", "fig7")

_SCHEMAS: dict[str, list[str]] = {
    "fig3_msd.csv": ["tau_s", "msd_rad2", "fit_2drt"],
    "fig3_theta_hist.csv": ["theta_rad", "density", "zone_law"],
    "fig3_phi_hist.csv": ["phi_rad", "density", "uniform_law"],
    "fig4_fast.csv": ["tau_s", "p_mc", "p_mc_se", "p_fast"],
    "fig4_moderate.csv": ["tau_s", "p_mc", "p_mc_se", "p_fast"],
    "fig4_slow.csv": ["tau_s", "p_mc", "p_mc_se", "p_fast"],
    "fig4_analytic.csv": ["tau_s", "p_fast", "p_moderate", "p_slow"],
    "fig5_corr.csv": ["tau_s", "c_xx", "c_yy", "c_zz", "c_xy", "c_xz", "c_yz"],
    "fig6_sweep.csv": ["j_hz", "gamma_flip_hz", "tau_int_s", "total_time_s", "delta_p"],
    "fig6_map.csv": ["z_nv_m", "x_nv_m", "j_hz"],
    "fig7_corr.csv": ["tau_s", "c_xx", "c_yy", "c_zz", "c_xy", "c_xz", "c_yz"],
    "fig7_hist.csv": ["ax_fluctuation_rad_s", "density", "gaussian"],
}

_INPUTS: dict[str, list[str]] = {
    "fig3": ["fig3_msd.csv", "fig3_theta_hist.csv", "fig3_phi_hist.csv"],
    "fig4": ["fig4_fast.csv", "fig4_moderate.csv", "fig4_slow.csv", "fig4_analytic.csv"],
    "fig5": ["fig5_corr.csv"],
    "fig6": ["fig6_sweep.csv", "fig6_map.csv"],
    "fig7": ["fig7_corr.csv", "fig7_hist.csv"],
}


class RecipeError(Exception):
    """Missing input, unknown figure id, or CSV schema mismatch."""


@dataclass(frozen=True)
class FigureRecipe:
    figure_id: str
    inputs: dict[str, Path]
    output: Path

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise RecipeError(f"unknown figure id {self.figure_id!r}")
        for name, path in self.inputs.items():
            if not Path(path).exists():
                raise RecipeError(f"input file missing: {path}")


def recipe_for(figure_id: str, in_dir: Path | str, out_dir: Path | str) -> FigureRecipe:
    if figure_id not in FIGURE_IDS:
        raise RecipeError(f"unknown figure id {figure_id!r}")
    in_dir = Path(in_dir)
    inputs = {name: in_dir / name for name in _INPUTS[figure_id]}
    return FigureRecipe(figure_id, inputs, Path(out_dir) / f"{figure_id}.png")


def load_table(path: Path, name: str) -> dict[str, np.ndarray]:
    """Read one artifact CSV, enforcing its documented schema."""
    expected = _SCHEMAS[name]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecipeError(f"{name}: file is empty")
        for col in expected:
            if col not in header:
                raise RecipeError(f"{name}: missing column {col!r}")
        for col in header:
            if col not in expected:
                raise RecipeError(f"{name}: unexpected column {col!r}")
        rows = [row for row in reader if row]
    if not rows:
        raise RecipeError(f"{name}: no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise RecipeError(f"{name}: non-numeric data ({exc})")
    return {col: data[:, header.index(col)] for col in expected}


_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.3,
}


def render(recipe: FigureRecipe) -> Path:
    """Render one figure; returns the written image path."""
    tables = {
        name: load_table(path, name) for name, path in recipe.inputs.items()
    }
    with plt.rc_context(_STYLE):
        fig = _DRAWERS[recipe.figure_id](tables)
        recipe.output.parent.mkdir(parents=True, exist_ok=True)
        tmp = recipe.output.with_suffix(".png.tmp")
        try:
            fig.savefig(tmp, format="png", metadata={"Software": "render_figs"})
        finally:
            plt.close(fig)
        os.replace(tmp, recipe.output)
    return recipe.output


def _draw_fig3(t: dict) -> plt.Figure:
    fig, axes = plt.subplots(1, 3, figsize=(9.6, 2.9), constrained_layout=True)
    msd = t["fig3_msd.csv"]
    axes[0].plot(msd["tau_s"] * 1e12, msd["msd_rad2"], color="tab:blue", label="simulation")
    axes[0].plot(msd["tau_s"] * 1e12, msd["fit_2drt"], "k--", label="2 D_r t")
    axes[0].set_xlabel("t (ps)")
    axes[0].set_ylabel(r"$\langle\Delta\theta^2\rangle$ (rad$^2$)")
    axes[0].legend(frameon=False)
    th = t["fig3_theta_hist.csv"]
    axes[1].bar(th["theta_rad"], th["density"],
                width=np.diff(th["theta_rad"]).mean() if len(th["theta_rad"]) > 1 else 0.05,
                color="tab:orange", alpha=0.6)
    axes[1].plot(th["theta_rad"], th["zone_law"], "k:", label="zone law")
    axes[1].set_xlabel(r"$\theta$ (rad)")
    axes[1].set_ylabel(r"$p_\theta$")
    axes[1].legend(frameon=False)
    ph = t["fig3_phi_hist.csv"]
    axes[2].bar(ph["phi_rad"], ph["density"],
                width=np.diff(ph["phi_rad"]).mean() if len(ph["phi_rad"]) > 1 else 0.2,
                color="tab:green", alpha=0.6)
    axes[2].plot(ph["phi_rad"], ph["uniform_law"], "k:", label=r"$1/2\pi$")
    axes[2].set_xlabel(r"$\varphi$ (rad)")
    axes[2].set_ylabel(r"$p_\varphi$")
    axes[2].legend(frameon=False)
    return fig


def _draw_fig4(t: dict) -> plt.Figure:
    fig, axes = plt.subplots(3, 1, figsize=(4.6, 8.2), constrained_layout=True)
    an = t["fig4_analytic.csv"]
    panels = [
        ("fast", "p_fast", "tab:blue"),
        ("moderate", "p_moderate", "tab:orange"),
        ("slow", "p_slow", "tab:green"),
    ]
    for ax, (name, a_col, color) in zip(axes, panels):
        mc = t[f"fig4_{name}.csv"]
        ax.plot(an["tau_s"] * 1e3, an[a_col], color=color, label="analytic")
        ax.errorbar(
            mc["tau_s"][::5] * 1e3, mc["p_mc"][::5], yerr=mc["p_mc_se"][::5],
            fmt="o", ms=2.5, color=color, alpha=0.7, label="Monte Carlo",
        )
        ax.set_ylabel("P")
        ax.set_title(f"{name} diffusion", fontsize=9)
        ax.legend(frameon=False, fontsize=8)
    axes[-1].set_xlabel(r"$\tau_{int}$ (ms)")
    return fig


def _corr_panels(corr: dict, time_unit: float, unit_label: str) -> plt.Figure:
    fig, axes = plt.subplots(1, 2, figsize=(7.4, 3.0), constrained_layout=True)
    taus = corr["tau_s"] * time_unit
    for key in ("c_xx", "c_yy", "c_zz"):
        axes[0].plot(taus, corr[key], label=key.replace("c_", "C_"))
    for key in ("c_xy", "c_xz", "c_yz"):
        axes[1].plot(taus, corr[key], label=key.replace("c_", "C_"))
    for ax, title in zip(axes, ("autocorrelations", "cross-correlations")):
        ax.set_xlabel(f"tau ({unit_label})")
        ax.set_ylabel(r"$C_{ij}/\sigma_i\sigma_j$")
        ax.set_title(title, fontsize=9)
        ax.legend(frameon=False, fontsize=8)
    axes[1].set_ylim(-1.0, 1.0)
    return fig


def _draw_fig5(t: dict) -> plt.Figure:
    return _corr_panels(t["fig5_corr.csv"], 1e9, "ns")


def _draw_fig6(t: dict) -> plt.Figure:
    fig, axes = plt.subplots(1, 3, figsize=(9.9, 3.0), constrained_layout=True)
    sweep = t["fig6_sweep.csv"]
    for j in np.unique(sweep["j_hz"]):
        sel = sweep["j_hz"] == j
        label = f"J = {j/1e3:g} kHz"
        axes[0].loglog(sweep["gamma_flip_hz"][sel], sweep["tau_int_s"][sel] * 1e3, "o-", label=label)
        axes[1].loglog(sweep["gamma_flip_hz"][sel], sweep["total_time_s"][sel], "o-", label=label)
    axes[0].set_xlabel(r"$\gamma_{flip}$ (Hz)")
    axes[0].set_ylabel(r"$\tau_{int}$ (ms)")
    axes[1].set_xlabel(r"$\gamma_{flip}$ (Hz)")
    axes[1].set_ylabel("T (s)")
    for ax in axes[:2]:
        ax.legend(frameon=False, fontsize=8)
    cmap = t["fig6_map.csv"]
    for x in np.unique(cmap["x_nv_m"]):
        sel = cmap["x_nv_m"] == x
        axes[2].plot(cmap["z_nv_m"][sel] * 1e9, cmap["j_hz"][sel] / 1e3,
                     "o-", label=f"x = {x*1e9:g} nm")
    axes[2].set_xlabel(r"$z_{NV}$ (nm)")
    axes[2].set_ylabel("J (kHz)")
    axes[2].legend(frameon=False, fontsize=7)
    return fig


def _draw_fig7(t: dict) -> plt.Figure:
    fig, axes = plt.subplots(1, 2, figsize=(7.4, 3.0), constrained_layout=True)
    corr = t["fig7_corr.csv"]
    taus = corr["tau_s"] * 1e12
    for key in ("c_xx", "c_yy", "c_zz", "c_xy", "c_xz", "c_yz"):
        axes[0].plot(taus, corr[key], label=key.replace("c_", "C_"))
    axes[0].set_xlabel("tau (ps)")
    axes[0].set_ylabel(r"$C_{ij}/\sigma_i\sigma_j$")
    axes[0].legend(frameon=False, fontsize=7, ncols=2)
    hist = t["fig7_hist.csv"]
    width = (
        np.diff(hist["ax_fluctuation_rad_s"]).mean()
        if len(hist["ax_fluctuation_rad_s"]) > 1
        else 1.0
    )
    axes[1].bar(hist["ax_fluctuation_rad_s"], hist["density"], width=width,
                color="tab:blue", alpha=0.6, label="samples")
    axes[1].plot(hist["ax_fluctuation_rad_s"], hist["gaussian"], "k--", label="Gaussian")
    axes[1].set_xlabel(r"$A_x - \mathcal{A}_x$ (rad/s)")
    axes[1].set_ylabel("density")
    axes[1].legend(frameon=False, fontsize=8)
    return fig


_DRAWERS = {
    "fig3": _draw_fig3,
    "fig4": _draw_fig4,
    "fig5": _draw_fig5,
    "fig6": _draw_fig6,
    "fig7": _draw_fig7,
}
