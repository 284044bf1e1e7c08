"""Log-log convergence plot of a study table."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from linkcurv.quadrature.models import ConvergenceTable


def render_convergence(table: ConvergenceTable, path: Path) -> Path:
    """|value - reference| against kappa, one line per term."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for term in table.terms():
        points = [
            (row.kappa, row.abs_error)
            for row in table.term(term)
            if row.abs_error is not None and row.abs_error > 0
        ]
        if not points:
            continue
        kappas, errors = zip(*points)
        ax.loglog(kappas, errors, marker="o", label=term)
    ax.set_xlabel("kappa")
    ax.set_ylabel("|value - limit|")
    ax.grid(True, which="both", alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
