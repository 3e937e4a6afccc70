"""Figure kinds regenerated from emitted chain and data files.

Every plot is a pure function of its input files: re-running writes an
identical raster (up to file metadata). No numerical machinery beyond
binning and summary re-aggregation.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import readers

_SAVE = {"dpi": 110, "metadata": {"Software": ""}}


def _finish(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)
    return out_path


def plot_mode_histogram(chain_paths, mode_index, out_path, field="p0", labels=None,
                        manifest_path=None, bins=60):
    """Overlaid normalised histograms of one spectral coefficient per chain.

    With a manifest the analytic prior density for that coefficient is drawn
    on top (useful for prior-only chains).
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = labels or [f"chain {i}" for i in range(len(chain_paths))]
    lo, hi = np.inf, -np.inf
    for path, label in zip(chain_paths, labels):
        chain = readers.read_chain(path)
        values = chain[field][:, mode_index]
        lo = min(lo, values.min())
        hi = max(hi, values.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        ax.hist(values, bins=bins, range=(lo, hi), density=True, histtype="step", label=label)
    if manifest_path is not None:
        manifest = readers.read_json(manifest_path)
        std = readers.prior_mode_std(manifest, field, mode_index)
        grid = np.linspace(lo, hi, 400)
        ax.plot(
            grid,
            np.exp(-0.5 * (grid / std) ** 2) / (std * np.sqrt(2 * np.pi)),
            "k--",
            label="prior density",
        )
    ax.set_xlabel(f"{field} coefficient {mode_index}")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    return _finish(fig, out_path)


def plot_mean_band(summary_path, out_path, field="p0", truth_path=None):
    """Posterior mean with a +-3 standard deviation band over s in [0, 2pi)."""
    summary = readers.read_json(summary_path)
    s = np.array(summary["s_grid"])
    mean = np.array(summary[f"{field}_point_mean"])
    std = np.array(summary[f"{field}_point_std"])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(s, mean, "b-", label="posterior mean")
    ax.plot(s, mean + 3 * std, "b--", linewidth=0.8, label="+-3 std")
    ax.plot(s, mean - 3 * std, "b--", linewidth=0.8)
    ax.fill_between(s, mean - 3 * std, mean + 3 * std, alpha=0.15)
    if truth_path is not None:
        truth = readers.read_truth(truth_path)
        key = "p0_values" if field == "p0" else "nu_values"
        values = np.array(truth[key])
        s_truth = 2 * np.pi * np.arange(len(values)) / len(values)
        ax.plot(s_truth, values, "r-", linewidth=0.9, label="truth")
    ax.set_xlabel("s")
    ax.set_ylabel(field)
    ax.legend(fontsize=8)
    return _finish(fig, out_path)


def plot_spaghetti(shapes_path, out_path, data_path=None, truth_shape_path=None, count=None):
    """Posterior-sampled shapes with the data or true shape overlaid."""
    s_eval, curves = readers.read_shapes(shapes_path)
    if count is not None:
        if count > curves.shape[0]:
            raise readers.FormatError("count", f"requested {count} of {curves.shape[0]} shapes")
        curves = curves[:count]
    fig, ax = plt.subplots(figsize=(5, 5))
    for curve in curves:
        closed = np.vstack([curve, curve[:1]])
        ax.plot(closed[:, 0], closed[:, 1], "b-", alpha=0.35, linewidth=0.7)
    if data_path is not None:
        _, pts, _ = readers.read_observations(data_path)
        ax.plot(pts[:, 0], pts[:, 1], "r*", markersize=3, label="data")
    if truth_shape_path is not None:
        _, pts, _ = readers.read_observations(truth_shape_path)
        closed = np.vstack([pts, pts[:1]])
        ax.plot(closed[:, 0], closed[:, 1], "k-", linewidth=1.2, label="true shape")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if data_path or truth_shape_path:
        ax.legend(fontsize=8)
    return _finish(fig, out_path)


def plot_sigma2_marginal(chain_paths, out_path, labels=None, true_values=(), bins=60):
    """Marginal histograms of the observational noise variance."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = labels or [f"chain {i}" for i in range(len(chain_paths))]
    for path, label in zip(chain_paths, labels):
        chain = readers.read_chain(path)
        ax.hist(chain["sigma2"], bins=bins, density=True, histtype="step", label=label)
    for value in true_values:
        ax.axvline(value, color="k", linestyle=":", linewidth=1.0)
    ax.set_xlabel("noise variance")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    return _finish(fig, out_path)


def plot_shape_overlay(curve_paths, out_path, labels=None, scatter_last=False):
    """Closed-curve overlays (template, targets, observations)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    labels = labels or [f"curve {i}" for i in range(len(curve_paths))]
    for i, (path, label) in enumerate(zip(curve_paths, labels)):
        _, pts, _ = readers.read_observations(path)
        if scatter_last and i == len(curve_paths) - 1:
            ax.plot(pts[:, 0], pts[:, 1], "r*", markersize=3, label=label)
        else:
            closed = np.vstack([pts, pts[:1]])
            ax.plot(closed[:, 0], closed[:, 1], linewidth=1.0, label=label)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(fontsize=8)
    return _finish(fig, out_path)
