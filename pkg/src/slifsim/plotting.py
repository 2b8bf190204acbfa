"""Static SVG figures for traces, response curves and sweep maps."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps SVG output byte-stable across runs
_SVG_META = {"Date": None, "Creator": None}
plt.rcParams["svg.hashsalt"] = "slifsim"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_traces(path, traces, labels, v_th=None, title=None):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for tr, lab in zip(traces, labels):
        ax.plot(tr.t, tr.v, lw=1.2, label=lab)
    if v_th is not None:
        ax.axhline(v_th, color="k", ls="--", lw=0.8, label="threshold")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("v (mV)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_curves(path, curves, labels, title=None, log_x=True):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for c, lab in zip(curves, labels):
        ax.plot(c.ist_grid, c.amplitude, lw=1.2, label=lab)
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel("IST (ms)")
    ax.set_ylabel("peak amplitude (mV)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_sweep_map(path, result, metric, label):
    spec = result.spec
    a1, a2 = spec.axis_values(0), spec.axis_values(1)
    z = result.grid(metric)
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(a2, a1, np.ma.masked_invalid(z), shading="nearest")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(spec.axes[1])
    ax.set_ylabel(spec.axes[0])
    fig.colorbar(mesh, ax=ax, label=label)
    _save(fig, path)
