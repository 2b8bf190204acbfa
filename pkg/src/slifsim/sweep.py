"""Two-parameter sweeps of the tuning metrics and their monotonicity checks."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .metrics import DEFAULT_TW_OFFSET, default_ist_grid, ist_response_curve, tuning_metrics
from .neuron import NeuronParams, SynapseParams

PARAM_AXES = ("c_m", "g_l", "tau_s")
METRICS = ("amplitude", "tw", "favorite_ist")
FLAT_REL_CHANGE = 0.05
# the whole curve lies within tw_offset of its maximum, so TW is only the grid span
TW_UNBOUNDED = "tw_unbounded"

# expected sign of d(metric)/d(param): +1 rises, -1 falls, 0 flat
EXPECTED = {
    ("amplitude", "c_m"): 1,
    ("amplitude", "g_l"): -1,
    ("amplitude", "tau_s"): -1,
    ("tw", "c_m"): -1,
    ("tw", "g_l"): -1,
    ("tw", "tau_s"): 1,
    ("favorite_ist", "c_m"): 1,
    ("favorite_ist", "g_l"): -1,
    ("favorite_ist", "tau_s"): 0,
}

_CSV_HEADER = ["axis1_name", "axis1_value", "axis2_name", "axis2_value",
               "max_amplitude_mV", "favorite_ist_ms", "tw_ms", "status", "curve_amplitude_mV"]


@dataclass(frozen=True)
class SweepSpec:
    neuron: NeuronParams
    synapse: SynapseParams
    axes: tuple
    scale_lo: float = 0.1
    scale_hi: float = 10.0
    points_per_axis: int = 25
    ist_points: int = 200
    tw_offset: float = DEFAULT_TW_OFFSET

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        if len(axes) != 2 or axes[0] == axes[1]:
            raise ValueError(f"need two distinct axes, got {axes}")
        for a in axes:
            if a not in PARAM_AXES:
                raise ValueError(f"unknown axis {a!r}; choose from {PARAM_AXES}")
        if not 0 < self.scale_lo < self.scale_hi:
            raise ValueError("need 0 < scale_lo < scale_hi")
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be >= 2")
        if self.ist_points < 1:
            raise ValueError("ist_points must be >= 1")

    def base_value(self, name: str) -> float:
        if name == "tau_s":
            return self.synapse.tau_s
        return getattr(self.neuron, name)

    def axis_values(self, k: int) -> np.ndarray:
        base = self.base_value(self.axes[k])
        return base * np.geomspace(self.scale_lo, self.scale_hi, self.points_per_axis)

    def cell_params(self, v1: float, v2: float):
        p, s = self.neuron, self.synapse
        for name, v in zip(self.axes, (v1, v2)):
            if name == "tau_s":
                s = s.replace(tau_s=v)
            else:
                p = p.replace(**{name: v})
        return p, s

    def to_dict(self) -> dict:
        return {
            "neuron": asdict(self.neuron),
            "synapse": asdict(self.synapse),
            "axes": list(self.axes),
            "scale_lo": self.scale_lo,
            "scale_hi": self.scale_hi,
            "points_per_axis": self.points_per_axis,
            "ist_points": self.ist_points,
            "tw_offset": self.tw_offset,
        }


@dataclass
class SweepCell:
    i: int
    j: int
    axis1_value: float
    axis2_value: float
    max_amplitude: float = math.nan
    favorite_ist: float = math.nan
    tw: float = math.nan
    curve_amplitude: float = math.nan
    status: str = "ok"
    grid_ratio: float = 1.0  # spacing factor of the cell's IST grid

    @property
    def ok(self) -> bool:
        return not self.status.startswith("error")


@dataclass
class SweepResult:
    spec: SweepSpec
    cells: list

    def grid(self, metric: str) -> np.ndarray:
        """P x P array of a metric (rows follow axis1); failed cells are NaN.

        ``amplitude`` is the curve amplitude, max minus min over the ISTs.
        """
        attr = {"amplitude": "curve_amplitude"}.get(metric, metric)
        n = self.spec.points_per_axis
        out = np.full((n, n), np.nan)
        for c in self.cells:
            if c.ok and not (metric == "tw" and c.status == TW_UNBOUNDED):
                out[c.i, c.j] = getattr(c, attr)
        return out

    def to_csv(self, path) -> None:
        write_sweep_csv(path, self)


def _run_cell(args):
    spec, i, j, v1, v2 = args
    cell = SweepCell(i, j, float(v1), float(v2))
    try:
        p, s = spec.cell_params(v1, v2)
        grid = default_ist_grid(p, s, spec.ist_points)
        if grid.size > 1:
            cell.grid_ratio = float(grid[1] / grid[0])
        curve = ist_response_curve(p, s, grid)
        m = tuning_metrics(curve, spec.tw_offset)
    except (ValueError, ArithmeticError) as exc:
        cell.status = f"error: {exc}".replace(",", ";").replace("\n", " ")
        return cell
    vals = (m.max_amplitude, m.favorite_ist, m.tw, m.curve_amplitude)
    if not all(math.isfinite(v) for v in vals):
        cell.status = "error: non-finite metric"
        return cell
    cell.max_amplitude, cell.favorite_ist, cell.tw, cell.curve_amplitude = vals
    x = curve.ist_grid
    if m.tw_window[0] <= x[0] or m.tw_window[1] >= x[-1]:
        cell.status = TW_UNBOUNDED
    return cell


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Evaluate every cell of the grid; the cell order is always row-major.

    Each cell gets its own log-spaced IST grid scaled to its time constants.
    A cell that fails carries the error in ``status`` instead of aborting.
    """
    a1, a2 = spec.axis_values(0), spec.axis_values(1)
    jobs = [(spec, i, j, v1, v2) for i, v1 in enumerate(a1) for j, v2 in enumerate(a2)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        cells = [_run_cell(job) for job in jobs]
    return SweepResult(spec, cells)


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.12g}"


def write_sweep_csv(path, r: SweepResult) -> None:
    n1, n2 = r.spec.axes
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_CSV_HEADER)
        for c in r.cells:
            w.writerow([n1, _fmt(c.axis1_value), n2, _fmt(c.axis2_value), _fmt(c.max_amplitude),
                        _fmt(c.favorite_ist), _fmt(c.tw), c.status, _fmt(c.curve_amplitude)])


def read_sweep_csv(path) -> list:
    """Rows of a sweep CSV as dicts with floats (NaN for blanks)."""
    out = []
    for row in csv.DictReader(Path(path).open()):
        rec = {}
        for k, v in row.items():
            if k in ("axis1_name", "axis2_name", "status"):
                rec[k] = v
            else:
                rec[k] = float(v) if v != "" else math.nan
        out.append(rec)
    return out


def classify_line(values, rel_tol: float = 1e-9) -> str:
    """increasing / decreasing / flat / non-monotone for one grid line.

    Flat means the spread of the line is under 5% of its largest magnitude.
    Reversals smaller than ``rel_tol`` relative to the larger neighbour are
    treated as noise. NaN entries (failed cells) are skipped.
    """
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 2:
        return "flat"
    scale = np.max(np.abs(v))
    if scale == 0 or (v.max() - v.min()) < FLAT_REL_CHANGE * scale:
        return "flat"
    d = np.diff(v)
    tol = rel_tol * np.maximum(np.abs(v[:-1]), np.abs(v[1:])) + 1e-12 * scale
    if np.all(d >= -tol):
        return "increasing"
    if np.all(d <= tol):
        return "decreasing"
    return "non-monotone"


_SIGN = {"increasing": 1, "decreasing": -1, "flat": 0}


@dataclass
class TrendEntry:
    metric: str
    axis: str
    observed: str
    expected: Optional[str]
    counts: dict = field(default_factory=dict)
    net: str = "flat"  # direction of the median end-to-end change

    @property
    def matches(self) -> Optional[bool]:
        if self.expected is None:
            return None
        return self.observed == self.expected


def _sign_name(sign: int) -> str:
    return {1: "increasing", -1: "decreasing", 0: "flat"}[sign]


def axis_trend(r: SweepResult, metric: str, k: int) -> TrendEntry:
    """Aggregate the line classes of ``metric`` along axis ``k``.

    The trend is a class only if every grid line agrees on it; otherwise it
    is ``mixed``.
    """
    g = r.grid(metric)
    # lines along axis k: vary index k with the other index fixed
    lines = g.T if k == 0 else g
    rel_tol = 1e-9
    if metric == "favorite_ist":
        # each cell has its own log grid, so allow one grid step of jitter
        rel_tol = max(c.grid_ratio for c in r.cells) - 1.0
    counts = {}
    for line in lines:
        c = classify_line(line, rel_tol)
        counts[c] = counts.get(c, 0) + 1
    observed = next(iter(counts)) if len(counts) == 1 else "mixed"
    axis = r.spec.axes[k]
    exp = EXPECTED.get((metric, axis))
    return TrendEntry(metric, axis, observed, None if exp is None else _sign_name(exp),
                      counts, _net_direction(lines))


def _net_direction(lines) -> str:
    rel = []
    for line in lines:
        v = line[np.isfinite(line)]
        if v.size >= 2 and np.max(np.abs(v)) > 0:
            rel.append((v[-1] - v[0]) / np.max(np.abs(v)))
    if not rel:
        return "flat"
    m = float(np.median(rel))
    if abs(m) < FLAT_REL_CHANGE:
        return "flat"
    return "increasing" if m > 0 else "decreasing"


@dataclass
class MonotonicityReport:
    axes: tuple
    entries: list

    @property
    def all_match(self) -> bool:
        return all(e.matches is not False for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "axes": list(self.axes),
            "all_match": self.all_match,
            "entries": [
                {"metric": e.metric, "axis": e.axis, "observed": e.observed,
                 "expected": e.expected, "matches": e.matches, "net": e.net,
                 "line_counts": e.counts}
                for e in self.entries
            ],
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def table(self) -> str:
        rows = [("metric", "axis", "observed", "net", "expected", "match", "lines")]
        for e in self.entries:
            mark = "-" if e.matches is None else ("yes" if e.matches else "NO")
            lines = " ".join(f"{k}:{v}" for k, v in sorted(e.counts.items()))
            rows.append((e.metric, "+" + e.axis, e.observed, e.net, e.expected or "-", mark, lines))
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        return "\n".join("  ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip() for r in rows)


def monotonicity_report(r: SweepResult) -> MonotonicityReport:
    """Observed trend of each metric along each axis against the expected table.

    Amplitude here is the curve amplitude; the peak amplitude (``max_amplitude``)
    is listed too, without an expectation.
    """
    entries = []
    for metric in METRICS + ("max_amplitude",):
        for k in range(2):
            entries.append(axis_trend(r, metric, k))
    return MonotonicityReport(r.spec.axes, entries)


@dataclass
class JointVerdict:
    axis: str
    amplitude: str
    tw: str
    compatible: bool


def joint_optimum_check(r: SweepResult):
    """Whether raising amplitude and narrowing TW call for the same move on each axis.

    An axis is compatible when the direction that grows the amplitude does not
    widen TW (a flat metric imposes no constraint). Mixed or non-monotone
    trends cannot establish compatibility. Returns (all_compatible, verdicts).
    """
    verdicts = []
    for k in range(2):
        amp = axis_trend(r, "amplitude", k).observed
        tw = axis_trend(r, "tw", k).observed
        if amp not in _SIGN or tw not in _SIGN:
            ok = False
        else:
            sa, st = _SIGN[amp], _SIGN[tw]
            ok = sa == 0 or st == 0 or sa == -st
        verdicts.append(JointVerdict(r.spec.axes[k], amp, tw, ok))
    return all(v.compatible for v in verdicts), verdicts
