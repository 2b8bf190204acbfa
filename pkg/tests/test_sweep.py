import json

import numpy as np
import pytest

from slifsim import NeuronParams, SynapseParams, ist_response_curve, tuning_metrics
from slifsim import sweep as sw
from slifsim.metrics import default_ist_grid
from slifsim.sweep import (
    SweepCell,
    SweepResult,
    SweepSpec,
    classify_line,
    joint_optimum_check,
    monotonicity_report,
    read_sweep_csv,
    run_sweep,
    write_sweep_csv,
)

from conftest import REF


def _small(axes=("c_m", "g_l"), n=3, ist_points=40):
    p, s = REF
    return SweepSpec(p, s, axes, points_per_axis=n, ist_points=ist_points)


def _synthetic(values, axes=("c_m", "g_l")):
    """SweepResult whose every metric is values[i, j]."""
    p, s = REF
    n = values.shape[0]
    spec = SweepSpec(p, s, axes, points_per_axis=n)
    a1, a2 = spec.axis_values(0), spec.axis_values(1)
    cells = []
    for i in range(n):
        for j in range(n):
            v = float(values[i, j])
            cells.append(SweepCell(i, j, a1[i], a2[j], v, v, v, v))
    return SweepResult(spec, cells)


def test_spec_validation():
    p, s = REF
    with pytest.raises(ValueError):
        SweepSpec(p, s, ("c_m", "c_m"))
    with pytest.raises(ValueError):
        SweepSpec(p, s, ("c_m", "v_rest"))
    with pytest.raises(ValueError):
        SweepSpec(p, s, ("c_m", "g_l"), scale_lo=1.0, scale_hi=1.0)
    with pytest.raises(ValueError):
        SweepSpec(p, s, ("c_m", "g_l"), scale_lo=0.0)
    with pytest.raises(ValueError):
        SweepSpec(p, s, ("c_m", "g_l"), points_per_axis=1)


def test_axis_values_are_log_spaced():
    spec = SweepSpec(*REF, ("tau_s", "g_l"), points_per_axis=5)
    v = spec.axis_values(0)
    assert v[0] == pytest.approx(0.01) and v[-1] == pytest.approx(1.0)
    assert np.allclose(np.diff(np.log(v)), np.log(10) / 2)
    p, s = spec.cell_params(0.5, 2e-4)
    assert s.tau_s == 0.5 and p.g_l == 2e-4 and p.c_m == REF[0].c_m


def test_cells_match_direct_metrics():
    spec = _small()
    r = run_sweep(spec)
    assert len(r.cells) == 9
    c = r.cells[4]
    p, s = spec.cell_params(c.axis1_value, c.axis2_value)
    m = tuning_metrics(ist_response_curve(p, s, default_ist_grid(p, s, spec.ist_points)))
    assert c.max_amplitude == m.max_amplitude
    assert c.favorite_ist == m.favorite_ist
    assert c.tw == m.tw
    assert all(np.isfinite(x.max_amplitude) and x.max_amplitude >= 0 for x in r.cells)


def test_sweep_csv_is_bit_identical(tmp_path):
    spec = _small(("g_l", "tau_s"))
    write_sweep_csv(tmp_path / "a.csv", run_sweep(spec))
    write_sweep_csv(tmp_path / "b.csv", run_sweep(spec))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    head = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert head.startswith(
        "axis1_name,axis1_value,axis2_name,axis2_value,max_amplitude_mV,favorite_ist_ms,tw_ms,status")
    rows = read_sweep_csv(tmp_path / "a.csv")
    assert len(rows) == 9 and rows[0]["axis1_name"] == "g_l"


def test_parallel_matches_serial(tmp_path):
    spec = _small()
    write_sweep_csv(tmp_path / "a.csv", run_sweep(spec, workers=1))
    write_sweep_csv(tmp_path / "b.csv", run_sweep(spec, workers=2))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_failed_cell_is_recorded(monkeypatch):
    spec = _small(n=2, ist_points=10)
    real = sw.ist_response_curve
    calls = []

    def flaky(p, s, grid):
        calls.append(1)
        if len(calls) == 2:
            raise ArithmeticError("boom")
        return real(p, s, grid)

    monkeypatch.setattr(sw, "ist_response_curve", flaky)
    r = run_sweep(spec)
    assert [c.ok for c in r.cells] == [True, False, True, True]
    assert "boom" in r.cells[1].status
    assert np.isnan(r.grid("tw")[0, 1])


def test_classify_line():
    assert classify_line([1, 2, 3]) == "increasing"
    assert classify_line([3, 2, 1]) == "decreasing"
    assert classify_line([1, 1.01, 1.02]) == "flat"
    assert classify_line([1, 3, 2]) == "non-monotone"
    assert classify_line([1, np.nan, 3]) == "increasing"
    assert classify_line([1, 2, 1.99, 3], rel_tol=0.06) == "increasing"


def test_synthetic_axis1_metric():
    n = 4
    vals = np.repeat(np.arange(1.0, n + 1)[:, None], n, axis=1)
    rep = monotonicity_report(_synthetic(vals))
    by = {(e.metric, e.axis): e for e in rep.entries}
    assert by[("amplitude", "c_m")].observed == "increasing"
    assert by[("amplitude", "g_l")].observed == "flat"
    assert by[("tw", "c_m")].matches is False
    assert "metric" in rep.table()
    doc = rep.to_dict()
    json.dumps(doc)
    assert len(doc["entries"]) == 8


def test_joint_optimum_constant_grid_is_vacuous():
    ok, verdicts = joint_optimum_check(_synthetic(np.full((3, 3), 2.0)))
    assert ok
    assert all(v.amplitude == "flat" and v.tw == "flat" for v in verdicts)


def test_joint_optimum_opposite_trends():
    p, s = REF
    spec = SweepSpec(p, s, ("c_m", "g_l"), points_per_axis=3)
    a1, a2 = spec.axis_values(0), spec.axis_values(1)
    cells = [SweepCell(i, j, a1[i], a2[j], 1.0, 1.0, 10.0 - i, float(i + 1))
             for i in range(3) for j in range(3)]
    ok, verdicts = joint_optimum_check(SweepResult(spec, cells))
    # amplitude up and TW down along c_m: both improve together
    assert verdicts[0].compatible and ok


def test_scale_covariance_with_matched_drive():
    # scaling c_m and g_l by k keeps tau_m; scaling area by 1/k also keeps the
    # synaptic drive, so the favorite IST must not move
    p, s = REF
    grid = default_ist_grid(p, s)
    base = tuning_metrics(ist_response_curve(p, s, grid)).favorite_ist
    i0 = int(np.searchsorted(grid, base))
    for k in (0.1, 0.5, 3.0, 10.0):
        q = p.replace(c_m=p.c_m * k, g_l=p.g_l * k, area=p.area / k)
        fav = tuning_metrics(ist_response_curve(q, s, grid)).favorite_ist
        assert abs(int(np.searchsorted(grid, fav)) - i0) < 2


def test_tw_unbounded_cells_are_flagged():
    # slow leak and a tiny curve swing: every IST is within 0.1 mV of the top
    p = NeuronParams(1e-5, 1e-3)
    spec = SweepSpec(p, SynapseParams(0.1), ("c_m", "g_l"), points_per_axis=2, ist_points=30)
    r = run_sweep(spec)
    flagged = [c for c in r.cells if c.status == sw.TW_UNBOUNDED]
    assert flagged
    assert all(c.ok for c in r.cells)
    g = r.grid("tw")
    for c in flagged:
        assert np.isnan(g[c.i, c.j])
        assert np.isfinite(r.grid("amplitude")[c.i, c.j])
