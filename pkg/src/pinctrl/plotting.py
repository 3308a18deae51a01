"""Figures for simulation reports, written as vector graphics."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.fonttype": "none",
}
FIGSIZE = (6.0, 3.2)
PLOT_FORMAT = "svg"


def _new():
    fig, ax = plt.subplots(figsize=FIGSIZE, constrained_layout=True)
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format=path.suffix.lstrip("."))
    plt.close(fig)
    return path


def emit_plots(record, summary=None, destination=".", dynamics=None, reference_dynamics=None,
               fmt: str = PLOT_FORMAT) -> list[Path]:
    """Write state, error and input figures for one run; returns the file paths.

    ``dynamics`` supplies the scalar observable drawn for each node (for
    example ``y1 - y2`` for a Jansen-Rit column); without it the first state
    component is used.
    """
    if len(record) == 0:
        raise ValueError("cannot plot an empty trajectory record")
    out = Path(destination)
    out.mkdir(parents=True, exist_ok=True)
    t = record.times
    name = getattr(summary, "scenario", "") or record.meta.get("scenario", "")
    paths = []

    if dynamics is not None:
        obs = dynamics.observable(record.states)
        ref_dyn = reference_dynamics or dynamics
        obs_ref = ref_dyn.observable(record.reference)
        ylabel = dynamics.observable_label
    else:
        obs, obs_ref, ylabel = record.states[..., 0], record.reference[:, 0], "$x_{i,1}$"

    with plt.rc_context(RC):
        fig, ax = _new()
        for i in range(record.n):
            ax.plot(t, obs[:, i], lw=0.8, alpha=0.85, label=f"node {i + 1}" if record.n <= 10 else None)
        ax.plot(t, obs_ref, "k--", lw=1.2, label="reference")
        ax.set_xlabel("time (s)")
        ax.set_ylabel(ylabel)
        ax.set_title(f"{name}: controlled vs reference".strip(": "))
        ax.legend(ncol=4, frameon=False)
        paths.append(_save(fig, out / f"states.{fmt}"))

        fig, ax = _new()
        tiny = np.finfo(float).tiny
        for i in range(record.n):
            ax.semilogy(t, np.maximum(record.error_norms[:, i], tiny), label=f"node {i + 1}")
        ax.set_xlabel("time (s)")
        ax.set_ylabel(r"$\|e_i\|$ (state units)")
        ax.set_title("tracking error")
        if record.n <= 10:
            ax.legend(ncol=5, frameon=False)
        paths.append(_save(fig, out / f"errors.{fmt}"))

        fig, ax = _new()
        if record.p == 1:
            U, ulabel = record.inputs[..., 0], r"$u_i$ (state units / s)"
        else:
            U, ulabel = np.linalg.norm(record.inputs, axis=2), r"$\|u_i\|$ (state units / s)"
        for i in range(record.n):
            ax.plot(t, U[:, i], label=f"node {i + 1}")
        ax.set_xlabel("time (s)")
        ax.set_ylabel(ulabel)
        ax.set_title("control input")
        if record.n <= 10:
            ax.legend(ncol=5, frameon=False)
        paths.append(_save(fig, out / f"inputs.{fmt}"))
    return paths
