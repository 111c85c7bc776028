"""Figure rendering for window sweeps.

Everything here uses the Agg backend and writes straight to files, so the
package stays usable on headless machines.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .sweep import SweepRow  # noqa: E402


def render_sweep_figure(rows: Sequence[SweepRow], path: str, title: str = "") -> str:
    """Dual-axis plot: fidelity (left) and success probability (right, log)
    against the window half-width.  Returns the path written."""
    if not rows:
        raise ValueError("nothing to plot")
    xs = [r.window for r in rows]
    fig, ax_f = plt.subplots(figsize=(6.0, 4.0))
    ax_f.plot(xs, [r.fidelity for r in rows], "o-", color="tab:blue")
    ax_f.set_xlabel("window half-width X")
    ax_f.set_ylabel("fidelity", color="tab:blue")
    ax_f.tick_params(axis="y", labelcolor="tab:blue")
    ax_p = ax_f.twinx()
    ax_p.plot(xs, [r.success_probability for r in rows], "s--", color="tab:red")
    ax_p.set_ylabel("success probability", color="tab:red")
    ax_p.set_yscale("log")
    ax_p.tick_params(axis="y", labelcolor="tab:red")
    if title:
        ax_f.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
