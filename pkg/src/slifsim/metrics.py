"""Two-spike IST experiment and the tuning descriptors derived from it."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .neuron import (
    IntegrationError,
    NeuronParams,
    SimConfig,
    SynapseParams,
)

DEFAULT_TW_OFFSET = 0.1  # mV
DEFAULT_GRID_POINTS = 200


class NonContiguousWindowError(ValueError):
    """The set of spiking ISTs is split into several pieces on the grid."""

    def __init__(self, runs):
        self.runs = runs
        super().__init__(f"spiking ISTs form {len(runs)} separate runs: {runs}")


@dataclass
class ISTResponseCurve:
    ist_grid: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        self.ist_grid = np.asarray(self.ist_grid, dtype=float)
        self.amplitude = np.asarray(self.amplitude, dtype=float)
        if self.ist_grid.shape != self.amplitude.shape:
            raise ValueError("ist_grid and amplitude must have equal lengths")
        if np.any(np.diff(self.ist_grid) <= 0):
            raise ValueError("ist_grid must be strictly increasing")

    def __len__(self):
        return self.ist_grid.size

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ist_ms", "amplitude_mV"])
            for x, a in zip(self.ist_grid, self.amplitude):
                w.writerow([f"{x:.12g}", f"{a:.12g}"])

    @classmethod
    def from_csv(cls, path) -> "ISTResponseCurve":
        rows = list(csv.DictReader(Path(path).open()))
        return cls([float(r["ist_ms"]) for r in rows], [float(r["amplitude_mV"]) for r in rows])


@dataclass
class TuningMetrics:
    favorite_ist: float
    max_amplitude: float
    tw: float
    tw_window: tuple
    curve_amplitude: float
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "favorite_ist_ms": float(self.favorite_ist),
            "max_amplitude_mV": float(self.max_amplitude),
            "tw_ms": float(self.tw),
            "tw_lo_ms": float(self.tw_window[0]),
            "tw_hi_ms": float(self.tw_window[1]),
            "curve_amplitude_mV": float(self.curve_amplitude),
            "warnings": list(self.warnings),
        }

    def to_json(self, path, extra: Optional[dict] = None) -> None:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def settle_margin(p: NeuronParams, s: SynapseParams) -> float:
    """Time after the last input by which the response has played out."""
    tau_m = p.tau_m
    if math.isfinite(tau_m):
        return 10.0 * max(s.tau_s, tau_m)
    return 40.0 * s.tau_s


def default_peak_step(s: SynapseParams) -> float:
    return s.tau_s / 20.0


def default_ist_grid(p: NeuronParams, s: Optional[SynapseParams] = None,
                     n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Log-spaced ISTs from a tenth of the fastest time constant to 100x the slowest.

    For a LIF (no synapse) that is [tau_m/10, 100 tau_m].
    """
    scales = [p.tau_m] if math.isfinite(p.tau_m) else []
    if s is not None:
        scales.append(s.tau_s)
    if not scales:
        raise ValueError("no finite time constant to scale the IST grid")
    return np.geomspace(min(scales) / 10.0, 100.0 * max(scales), n)


def _peak_args(p: NeuronParams, s: SynapseParams):
    return (s.e_s - p.v_rest, p.leak_rate, p.synaptic_rate(1.0), s.tau_s, s.g_s_max)


def _resolve(p, s, last_ist, cfg):
    if cfg is None:
        return default_peak_step(s), None
    if cfg.dt > s.tau_s / 10.0 * (1 + 1e-12):
        raise IntegrationError(
            f"dt={cfg.dt} ms is too coarse for tau_s={s.tau_s} ms (need dt <= tau_s/10)")
    need = last_ist + settle_margin(p, s)
    if cfg.t_end < need:
        raise IntegrationError(
            f"t_end={cfg.t_end} ms leaves no settle margin after IST {last_ist} ms (need {need:g})")
    return cfg.dt, cfg.t_end


def _peak(p, s, times, h, t_end, th=math.nan):
    times = np.asarray(times, dtype=float)
    if t_end is None:
        t_end = times[-1] + settle_margin(p, s)
    return _kernels.slif_peak(times, t_end, h, th, *_peak_args(p, s))


def single_spike_peak(p: NeuronParams, s: SynapseParams, cfg: Optional[SimConfig] = None) -> float:
    h, t_end = _resolve(p, s, 0.0, cfg)
    return _peak(p, s, [0.0], h, t_end)[0]


def two_spike_peak(p: NeuronParams, s: SynapseParams, ist: float,
                   cfg: Optional[SimConfig] = None) -> float:
    """Peak of v - v_rest for inputs at 0 and ``ist`` ms, threshold disabled.

    Spike times are exact (steps land on them) and local maxima are
    refined inside the step, so the value does not depend on where samples
    happen to fall.
    """
    if not ist >= 0:
        raise ValueError(f"ist must be >= 0, got {ist}")
    h, t_end = _resolve(p, s, ist, cfg)
    return _peak(p, s, [0.0, ist], h, t_end)[0]


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("IST grid is empty")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ValueError("IST grid values must be finite and >= 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("IST grid must be strictly increasing")
    return grid


def ist_response_curve(p: NeuronParams, s: SynapseParams, grid=None,
                       cfg: Optional[SimConfig] = None) -> ISTResponseCurve:
    grid = _check_grid(default_ist_grid(p, s) if grid is None else grid)
    h, t_end = _resolve(p, s, float(grid[-1]), cfg)
    amp = np.array([_peak(p, s, [0.0, x], h, t_end)[0] for x in grid])
    return ISTResponseCurve(grid, amp)


def lif_curve(p: NeuronParams, grid=None, cfg: Optional[SimConfig] = None) -> ISTResponseCurve:
    """Two-spike peak amplitude of the plain LIF over ``grid``.

    Same fixed-step recurrence as ``integrate_lif`` with firing disabled, but
    only the running maximum is kept, so long ISTs at fine steps cost no
    memory. The default step is tau_m/100.
    """
    grid = _check_grid(default_ist_grid(p) if grid is None else grid)
    dt = cfg.dt if cfg is not None else p.tau_m / 100.0
    if not dt > 0 or not math.isfinite(dt):
        raise IntegrationError("lif_curve needs a finite step; set cfg.dt when g_l = 0")
    amp = np.empty(grid.size)
    for i, x in enumerate(grid):
        cfg_i = SimConfig(dt, x + dt, record_gs=False)
        steps = np.rint(np.array([0.0, x]) / dt).astype(np.int64)
        amp[i] = _kernels.lif_max(steps, cfg_i.n_samples, dt, p.leak_rate, p.jump)
    return ISTResponseCurve(grid, amp)


def _crossing(x0, a0, x1, a1, level):
    if a1 == a0:
        return x1
    return x0 + (level - a0) * (x1 - x0) / (a1 - a0)


def tuning_metrics(curve: ISTResponseCurve, tw_offset: float = DEFAULT_TW_OFFSET) -> TuningMetrics:
    """Favorite IST, peak amplitude and timewidth of a response curve.

    The timewidth window is the contiguous run of grid points around the
    favorite IST whose amplitude is within ``tw_offset`` mV of the maximum,
    with each end placed by linear interpolation toward the first point
    outside the run (or at the grid end).
    """
    if len(curve) == 0:
        raise ValueError("curve is empty")
    if not tw_offset > 0:
        raise ValueError(f"tw_offset must be > 0, got {tw_offset}")
    x, a = curve.ist_grid, curve.amplitude
    i = int(np.argmax(a))
    peak = float(a[i])
    level = peak - tw_offset
    lo = i
    while lo > 0 and a[lo - 1] >= level:
        lo -= 1
    hi = i
    while hi < a.size - 1 and a[hi + 1] >= level:
        hi += 1
    x_lo = float(x[lo]) if lo == 0 else _crossing(x[lo - 1], a[lo - 1], x[lo], a[lo], level)
    x_hi = float(x[hi]) if hi == a.size - 1 else _crossing(x[hi], a[hi], x[hi + 1], a[hi + 1], level)
    warnings = []
    outside = np.ones(a.size, dtype=bool)
    outside[lo:hi + 1] = False
    if np.any(a[outside] >= level):
        warnings.append("secondary lobe within tw_offset of the maximum ignored")
    if lo == 0 or hi == a.size - 1:
        warnings.append("timewidth window reaches the end of the IST grid")
    return TuningMetrics(
        favorite_ist=float(x[i]),
        max_amplitude=peak,
        tw=float(x_hi - x_lo),
        tw_window=(float(x_lo), float(x_hi)),
        curve_amplitude=float(peak - a.min()),
        warnings=warnings,
    )


def spiking_ist_window(p: NeuronParams, s: SynapseParams, v_th: float, grid=None,
                       cfg: Optional[SimConfig] = None):
    """IST interval over which the two-spike SLIF fires at least once.

    Returns (lo, hi) in ms with ends interpolated on the peak amplitude, or
    None when no grid IST fires. Raises NonContiguousWindowError when the
    firing ISTs are not one contiguous run of grid points.
    """
    if not v_th > p.v_rest:
        raise ValueError(f"v_th ({v_th}) must exceed v_rest ({p.v_rest})")
    grid = _check_grid(default_ist_grid(p, s) if grid is None else grid)
    h, t_end = _resolve(p, s, float(grid[-1]), cfg)
    th = v_th - p.v_rest
    fires = np.array([_peak(p, s, [0.0, x], h, t_end, th)[1] for x in grid])
    if not fires.any():
        return None
    idx = np.flatnonzero(fires)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    if len(runs) > 1:
        raise NonContiguousWindowError([(float(grid[r[0]]), float(grid[r[-1]])) for r in runs])
    lo, hi = int(idx[0]), int(idx[-1])

    def amp(k):
        return _peak(p, s, [0.0, grid[k]], h, t_end)[0]

    x_lo = float(grid[lo]) if lo == 0 else _crossing(grid[lo - 1], amp(lo - 1), grid[lo], amp(lo), th)
    x_hi = (float(grid[hi]) if hi == grid.size - 1
            else _crossing(grid[hi], amp(hi), grid[hi + 1], amp(hi + 1), th))
    return (float(x_lo), float(x_hi))


def is_unimodal(curve: ISTResponseCurve, tol: float = 1e-6, interior: bool = True) -> bool:
    """Rises to the maximum then falls, allowing ``tol`` mV of reversal per step."""
    a = curve.amplitude
    i = int(np.argmax(a))
    if interior and (i == 0 or i == a.size - 1):
        return False
    d = np.diff(a)
    return bool(np.all(d[:i] > -tol) and np.all(d[i:] < tol))
