"""Render figures from a results directory.

Reads results.csv back through the package's own readers and writes two PNG
files next to it: mean secrecy rate versus the sweep variable (one line per
policy, with standard-error bars) and the outage fraction over the same axis.
Rendering is headless (Agg backend) so it works in batch environments.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .experiment import ExperimentError, read_results

_AXIS_LABEL = {
    "power": "transmit power",
    "buffer_size": "buffer size (blocks)",
    "threshold": "selection threshold",
}


def render_figures(out_dir: str) -> list[str]:
    """Render rate and outage figures for the results in ``out_dir``.

    Returns the list of image paths written.  Raises ExperimentError when the
    directory has no readable results file.
    """
    csv_path = os.path.join(out_dir, "results.csv")
    if not os.path.exists(csv_path):
        raise ExperimentError(f"no results.csv in {out_dir!r}")
    rows = read_results(csv_path)
    if not rows:
        raise ExperimentError(f"{csv_path} has no data rows to plot")

    sweep_var = rows[0].sweep_var
    policies: list[str] = []
    for r in rows:
        if r.policy not in policies:
            policies.append(r.policy)

    written = []
    for metric, ylabel, fname in (
        ("mean_secrecy_rate", "mean secrecy rate (bits/s/Hz)", "rates.png"),
        ("outage_frac", "outage fraction", "outage.png"),
    ):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for policy in policies:
            pts = [r for r in rows if r.policy == policy]
            xs = [r.sweep_value for r in pts]
            ys = [getattr(r, metric) for r in pts]
            if metric == "mean_secrecy_rate":
                errs = [r.stderr for r in pts]
                ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3,
                            label=policy)
            else:
                ax.plot(xs, ys, marker="o", label=policy)
        ax.set_xlabel(_AXIS_LABEL.get(sweep_var, sweep_var))
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, fname)
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
