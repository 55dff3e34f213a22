"""Figures for the experiment reports, written to SVG files."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 9,
    "lines.linewidth": 1.5,
    "lines.markersize": 5,
    "svg.hashsalt": "nlpbdw",
    "svg.fonttype": "none",
}


def _new_axes(width=4.5, height=3.2):
    fig, ax = plt.subplots(figsize=(width, height))
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_surrogate_error(levels, mean_err, slope, path):
    """Mean |S_h - S_fine| against mesh width on log-log axes."""
    h = 2.0 ** -np.asarray(levels, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = _new_axes()
        ax.loglog(h, mean_err, "o-", base=2, label=f"slope {slope:.2f}")
        ax.set_xlabel("mesh width $h$")
        ax.set_ylabel(r"mean $|S_h - S_{h'}|$")
        ax.legend()
        _save(fig, path)


def plot_wall_time(levels, seconds, path):
    h = 2.0 ** -np.asarray(levels, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = _new_axes()
        ax.loglog(h, seconds, "s-", base=2, color="C1")
        ax.set_xlabel("mesh width $h$")
        ax.set_ylabel("wall time for all test points [s]")
        _save(fig, path)


def plot_selection_histogram(k_fine, k_true, K, path):
    """Side-by-side counts of the fine and true model selections (1-based)."""
    bins = np.arange(1, K + 1)
    fine = np.bincount(np.asarray(k_fine, dtype=int), minlength=K + 1)[1:]
    true = np.bincount(np.asarray(k_true, dtype=int), minlength=K + 1)[1:]
    with plt.rc_context(STYLE):
        fig, ax = _new_axes()
        ax.bar(bins - 0.2, fine, width=0.4, label="fine selection")
        ax.bar(bins + 0.2, true, width=0.4, label="true cell")
        ax.set_xticks(bins)
        ax.set_xlabel("reduced model $k$")
        ax.set_ylabel("count")
        ax.legend()
        _save(fig, path)
