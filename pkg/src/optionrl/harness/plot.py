"""Learning-curve SVGs: mean training return across seeds with a min-max band."""
import glob
import os
import re

import numpy as np

from .train import read_csv

_RUN = re.compile(r"(?P<algo>[a-z]+)_seed(?P<seed>\d+)\.csv$")


def load_curves(directory):
    """{algo: [(steps, returns), ...]} from every ``<algo>_seed<k>.csv`` under ``directory``."""
    curves = {}
    for path in sorted(glob.glob(os.path.join(directory, "**", "*_seed*.csv"), recursive=True)):
        m = _RUN.search(os.path.basename(path))
        if not m:
            continue
        rows = read_csv(path)
        steps = np.array([float(r["step"]) for r in rows])
        rets = np.array([float(r["return_mean"]) for r in rows])
        curves.setdefault(m["algo"], []).append((steps, rets))
    return curves


def _aggregate(runs):
    """Align seeds on the shortest run; NaN rows (no finished episode) are carried forward."""
    n = min(len(s) for s, _ in runs)
    steps = runs[0][0][:n]
    mat = np.array([r[:n] for _, r in runs])
    for row in mat:
        for i in range(1, n):
            if np.isnan(row[i]):
                row[i] = row[i - 1]
    return steps, np.nanmean(mat, axis=0), np.nanmin(mat, axis=0), np.nanmax(mat, axis=0)


def plot(directory, out, title=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = load_curves(directory)
    if not curves:
        raise FileNotFoundError(f"no <algo>_seed<k>.csv files under {directory}")
    fig, ax = plt.subplots(figsize=(6, 4))
    for algo in sorted(curves):
        steps, mean, lo, hi = _aggregate(curves[algo])
        line, = ax.plot(steps, mean, label=f"{algo} ({len(curves[algo])} seeds)")
        ax.fill_between(steps, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("episode return")
    ax.set_title(title or os.path.basename(os.path.normpath(directory)))
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
