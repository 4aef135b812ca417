"""SVG figures: max_real boxplots per condition and eigenvalue scatter."""
from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

MODEL_ORDER = ("statpi", "dynpi", "mssb")
MODEL_COLORS = {"statpi": "tab:blue", "dynpi": "tab:orange", "mssb": "tab:green"}


def boxplot_svg(rows, path) -> None:
    """One panel per (load scale, case), one box per line model."""
    groups: dict = {}
    for r in rows:
        if r.status == "ok":
            groups.setdefault((r.load_scale, r.case_name), {}).setdefault(r.line_model, []).append(r.max_real)
    keys = sorted(groups)
    if not keys:
        raise ValueError("no successful rows to plot")
    scales = sorted({k[0] for k in keys})
    cases = sorted({k[1] for k in keys})
    fig, axes = plt.subplots(len(scales), len(cases), figsize=(3.2 * len(cases), 3.0 * len(scales)),
                             squeeze=False, sharey="row")
    for i, s in enumerate(scales):
        for j, c in enumerate(cases):
            ax = axes[i][j]
            data = groups.get((s, c), {})
            models = [m for m in MODEL_ORDER if m in data]
            if models:
                bp = ax.boxplot([data[m] for m in models], patch_artist=True)
                ax.set_xticks(range(1, len(models) + 1), models)
                for patch, m in zip(bp["boxes"], models):
                    patch.set_facecolor(MODEL_COLORS[m])
            ax.axhline(0.0, color="k", lw=0.6, ls=":")
            ax.set_title(f"{c}, load {s:g}", fontsize=9)
            if j == 0:
                ax.set_ylabel("max real part [1/s]")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def eigen_scatter_svg(eig_csv_paths, path, xlim=None) -> None:
    """Real vs imaginary parts, one marker class per line model."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    markers = {"statpi": "o", "dynpi": "s", "mssb": "^"}
    for p in eig_csv_paths:
        pts: dict = {}
        with open(p, newline="") as fh:
            for rec in csv.DictReader(fh):
                pts.setdefault((rec["sample_id"], rec["line_model"]), []).append(
                    (float(rec["re"]), float(rec["im"])))
        for (sid, model), xy in sorted(pts.items()):
            ax.scatter([a for a, _ in xy], [b for _, b in xy], s=14, marker=markers.get(model, "x"),
                       color=MODEL_COLORS.get(model), alpha=0.7, label=f"{model} #{sid}")
    ax.axvline(0.0, color="k", lw=0.6, ls=":")
    if xlim is not None:
        ax.set_xlim(*xlim)
    ax.set_xlabel("real [1/s]")
    ax.set_ylabel("imag [rad/s]")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
