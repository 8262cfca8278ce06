"""Log-log figure of an experiment table, rendered off-screen."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ExperimentResult  # noqa: E402
from .invariants import INFINITY  # noqa: E402


def plot_experiment(result: ExperimentResult, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    pts = [(r.epsilon, r.err) for r in result.rows if r.err is not None and r.err > 0]
    if pts:
        ax.scatter([e for e, _ in pts], [v for _, v in pts], s=14, alpha=0.7, label="rows")
    eps = sorted({r.epsilon for r in result.rows if r.epsilon > 0})
    if result.slope is not None and eps:
        fit = [math.exp(result.intercept) * e**result.slope for e in eps]
        ax.plot(eps, fit, "-", label=f"fit slope {result.slope:.3f}")
        if result.theory is not INFINITY:
            t = float(result.theory)
            anchor = fit[-1] / eps[-1] ** t
            ax.plot(eps, [anchor * e**t for e in eps], "--", label=f"theory slope {t:.3f}")
    if pts:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("error")
    ax.set_title(f"{result.mode}: {'PASS' if result.verdict else 'FAIL'}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
