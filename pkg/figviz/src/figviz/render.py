"""Render losswatch CSV tables into figures.

Rendering is a pure function of (CSV bytes, figure spec): canvas size,
fonts, colors, series ordering, and output metadata are all pinned, and
timestamps are disabled, so re-rendering reproduces identical bytes. The
only numbers computed here are axis transforms (dB conversions); every
scientific value comes from the CSV.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import (
    ARL_OVERLAY_COLUMNS,
    FIGURE_IDS,
    REQUIRED_COLUMNS,
    FigvizError,
    read_table,
)

_RC = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "figviz",
    "legend.fontsize": 7.5,
}


def db_of_squeezing(s):
    """10 log10(e^{2s}): squeezing parameter to decibels."""
    return 10.0 * np.log10(np.exp(2.0 * np.asarray(s, dtype=float)))


def db_of_loss(eta):
    """10 log10(1/eta): transmissivity to loss in decibels."""
    return 10.0 * np.log10(1.0 / np.asarray(eta, dtype=float))


@dataclass(frozen=True)
class FigureSpec:
    """One rendering request: figure id, input CSV path(s), output path."""

    figure_id: str
    inputs: tuple[str, ...]
    output: str

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise FigvizError(
                f"unsupported figure id {self.figure_id!r}; expected one of "
                + ", ".join(FIGURE_IDS)
            )
        if not self.inputs:
            raise FigvizError("at least one input CSV is required")


def _series_sort_key(label: str):
    # stable ordering: plain schemes first, block schemes by block length
    if "-n" in label:
        head, _, num = label.rpartition("-n")
        try:
            return (1, head, int(num))
        except ValueError:
            pass
    return (0, label, 0)


def _grouped(table, key_col, x_col, y_col):
    groups: dict[str, tuple[list, list]] = {}
    for key, x, y in zip(table[key_col], table[x_col], table[y_col]):
        groups.setdefault(key, ([], []))
        groups[key][0].append(x)
        groups[key][1].append(y)
    out = {}
    for key, (xs, ys) in groups.items():
        order = np.argsort(xs)
        out[key] = (np.asarray(xs)[order], np.asarray(ys)[order])
    return dict(sorted(out.items(), key=lambda kv: _series_sort_key(kv[0])))


_STYLE_OVERRIDES = {
    "coherent": dict(color="tab:red", linestyle="--"),
    "squeezed": dict(color="tab:red", linestyle="-"),
    "sp-spd": dict(color="black", linestyle="-", marker="h", markersize=3),
    "sp-homodyne": dict(color="tab:purple", linestyle=":"),
}


def _plot_series(ax, groups, blues=("entangled",)):
    blue_labels = [k for k in groups if any(k.startswith(b) for b in blues)]
    cmap = plt.get_cmap("Blues")
    for i, (label, (xs, ys)) in enumerate(groups.items()):
        style = dict(_STYLE_OVERRIDES.get(label, {}))
        if label in blue_labels and "color" not in style:
            frac = 0.35 + 0.6 * (blue_labels.index(label) / max(1, len(blue_labels) - 1)
                                 if len(blue_labels) > 1 else 0.5)
            style.setdefault("color", cmap(frac))
            style.setdefault("linestyle", "-.")
        if label.startswith("kennedy"):
            style.setdefault("linestyle", "-.")
            style.setdefault("marker", "o")
            style.setdefault("markersize", 2.5)
        ax.plot(xs, ys, label=label, **style)


def _render_fig2(spec, fig, ax):
    table = read_table(spec.inputs[0], REQUIRED_COLUMNS["fig2"])
    groups = _grouped(table, "scheme", "na", "cre")
    _plot_series(ax, groups)
    ax.set_xlabel("Added quantum photons per pulse")
    ax.set_ylabel("Relative entropy per pulse (nats)")
    ax.legend(ncol=2)


def _render_fig3(spec, fig, ax):
    table = read_table(spec.inputs[0], REQUIRED_COLUMNS["fig3"])
    colors = {"unmodulated": "tab:blue", "bpsk": "tab:red"}
    for mod in sorted(set(table["modulation"])):
        xs = [x for x, m in zip(table["s_ratio"], table["modulation"]) if m == mod]
        ys = [y for y, m in zip(table["tau_ratio"], table["modulation"]) if m == mod]
        ax.scatter(xs, ys, s=14, alpha=0.8, label=mod,
                   color=colors.get(mod, "tab:gray"))
    lo = min(min(table["s_ratio"]), min(table["tau_ratio"]), 1.0)
    hi = max(max(table["s_ratio"]), max(table["tau_ratio"]))
    ref = np.array([lo, hi])
    ax.plot(ref, ref, color="black", linewidth=0.9, label="unit slope")
    ax.set_xlabel("Relative-entropy ratio")
    ax.set_ylabel("Latency ratio")
    ax.legend()
    if len(spec.inputs) > 1:
        overlay = read_table(spec.inputs[1], ARL_OVERLAY_COLUMNS)
        inset = fig.add_axes([0.62, 0.2, 0.25, 0.25])
        inset.plot(overlay["h"], overlay["gamma"], color="tab:green")
        inset.set_yscale("log")
        inset.set_xlabel("threshold", fontsize=6)
        inset.set_ylabel("run length", fontsize=6)
        inset.tick_params(labelsize=6)
        inset.grid(alpha=0.2)


def _render_fig4(spec, fig, ax):
    table = read_table(spec.inputs[0], REQUIRED_COLUMNS["fig4"])
    groups = _grouped(table, "scheme", "s", "cre")
    groups = {k: (db_of_squeezing(xs), ys) for k, (xs, ys) in groups.items()}
    _plot_series(ax, groups)
    ax.set_xlabel("Seed squeezing (dB)")
    ax.set_ylabel("Relative entropy per pulse (nats)")
    ax.legend()


def _render_loss_sweep(spec, fig, ax, figure_id):
    table = read_table(spec.inputs[0], REQUIRED_COLUMNS[figure_id])
    groups = _grouped(table, "scheme", "eta1", "cre")
    groups = {k: (db_of_loss(xs), ys) for k, (xs, ys) in groups.items()}
    _plot_series(ax, groups)
    ax.set_xlabel("Pre-change loss (dB)")
    ax.set_ylabel("Relative entropy per pulse (nats)")
    ax.set_yscale("log")
    ax.legend(ncol=2)


def _render_fig8(spec, fig, ax):
    table = read_table(spec.inputs[0], REQUIRED_COLUMNS["fig8"])
    groups = _grouped(table, "scheme", "r", "mean_tau")
    for label, (xs, ys) in groups.items():
        db = db_of_squeezing(xs)
        if label == "dv":
            ax.plot(db, ys, color="black", linestyle="--", label=label)
        elif label.startswith("coherent"):
            marker = "v" if label.endswith("bpsk") else "^"
            ax.plot(db[:1], ys[:1], linestyle="none", marker=marker,
                    markersize=7, label=label,
                    color="tab:purple" if label.endswith("bpsk") else "tab:cyan")
        else:
            color = "tab:green" if label.endswith("bpsk") else "tab:red"
            ax.plot(db, ys, marker="o", markersize=3, color=color, label=label)
    ax.set_xlabel("Per-pulse squeezing (dB)")
    ax.set_ylabel("Mean detection latency (pulses)")
    ax.legend()


_RENDERERS = {
    "fig2": _render_fig2,
    "fig3": _render_fig3,
    "fig4": _render_fig4,
    "fig5": lambda spec, fig, ax: _render_loss_sweep(spec, fig, ax, "fig5"),
    "fig7": lambda spec, fig, ax: _render_loss_sweep(spec, fig, ax, "fig7"),
    "fig8": _render_fig8,
}


def render(spec: FigureSpec) -> str:
    """Render one figure to spec.output; returns the output path."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            _RENDERERS[spec.figure_id](spec, fig, ax)
            if len(fig.axes) == 1:  # manual insets pin their own rectangle
                fig.tight_layout()
            metadata = (
                {"Date": None} if spec.output.lower().endswith(".svg") else None
            )
            fig.savefig(spec.output, metadata=metadata)
        finally:
            plt.close(fig)
    return spec.output
