"""Matplotlib rendering of run reports (error curves and field maps).

Figures are written next to the CSV outputs; everything here is
presentation only and never feeds back into the computation.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_history(history, path, title=None):
    """Misfit and error evolution of one run."""
    iters = [rec.iter for rec in history]
    misfits = [rec.misfit for rec in history]
    have_errors = any(rec.err_a is not None for rec in history)

    ncols = 2 if have_errors else 1
    fig, axes = plt.subplots(1, ncols, figsize=(5.0 * ncols, 3.6))
    axes = np.atleast_1d(axes)

    ax = axes[0]
    ax.semilogy(iters, np.maximum(misfits, 1e-300), color="tab:blue")
    ax.set_xlabel("iteration")
    ax.set_ylabel("misfit")
    ax.grid(True, alpha=0.3)
    _mark_stages(ax, history)

    if have_errors:
        ax = axes[1]
        ax.semilogy(iters, [rec.err_a for rec in history],
                    label="rel. error a", color="tab:orange")
        ax.semilogy(iters, [rec.err_c for rec in history],
                    label="rel. error c", color="tab:red")
        ax.set_xlabel("iteration")
        ax.set_ylabel("relative L2 error")
        ax.grid(True, alpha=0.3)
        ax.legend()
        _mark_stages(ax, history)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _mark_stages(ax, history):
    last = history[0].stage
    for rec in history[1:]:
        if rec.stage != last:
            ax.axvline(rec.iter, color="gray", linestyle="--", linewidth=0.8)
            last = rec.stage


def render_fields(mesh, fields, path, title=None):
    """Image grid of nodal fields; `fields` maps labels to arrays."""
    names = list(fields)
    n = len(names)
    ncols = min(n, 3)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.4 * ncols, 3.0 * nrows),
                             squeeze=False)
    x0, y0, x1, y1 = mesh.rect
    for k, name in enumerate(names):
        ax = axes[k // ncols][k % ncols]
        grid = np.asarray(fields[name]).reshape(mesh.ny, mesh.nx)
        im = ax.imshow(grid, origin="lower", extent=(x0, x1, y0, y1),
                       cmap="viridis")
        ax.set_title(name, fontsize=10)
        fig.colorbar(im, ax=ax, shrink=0.85)
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
