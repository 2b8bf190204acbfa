"""Randomized invariants over parameters within 0.1x-10x of the reference set."""

import tempfile
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from slifsim import SimConfig, integrate_lif, integrate_slif, tuning_metrics
from slifsim.metrics import ISTResponseCurve, two_spike_peak
from slifsim.sweep import SweepSpec, run_sweep, write_sweep_csv

from conftest import ref_draws, spike_trains

DRAWS = settings(max_examples=100)


def _setup(p, s, times, n_tau=6):
    dt = s.tau_s / 20
    t_end = float(times[-1]) + n_tau * s.tau_s
    return SimConfig(dt, t_end)


@DRAWS
@given(ref_draws(), st.data())
def test_coincident_spike_idempotence(ps, data):
    p, s = ps
    times = data.draw(spike_trains(horizon=5 * s.tau_s))
    cfg = _setup(p, s, times)
    a = integrate_slif(p, s, times, cfg)
    dup = np.sort(np.append(times, times[data.draw(st.integers(0, times.size - 1))]))
    b = integrate_slif(p, s, dup, cfg)
    np.testing.assert_array_equal(a.v, b.v)
    np.testing.assert_array_equal(a.g_s, b.g_s)


@DRAWS
@given(ref_draws(), st.data())
def test_state_stays_in_bounds(ps, data):
    p, s = ps
    times = data.draw(spike_trains(horizon=5 * s.tau_s))
    cfg = _setup(p, s, times)
    tr = integrate_slif(p, s, times, cfg)
    assert np.all(tr.g_s >= 0) and np.all(tr.g_s <= s.g_s_max)
    assert np.all(tr.v >= p.v_rest) and np.all(tr.v <= s.e_s)
    # g_s only rises at samples that carry an input
    steps = set(np.rint(times / cfg.dt).astype(int))
    rises = np.flatnonzero(np.diff(tr.g_s) > 0) + 1
    assert set(rises) <= steps


@DRAWS
@given(ref_draws(), st.data())
def test_dt_halving_converges(ps, data):
    p, s = ps
    base = s.tau_s / 10
    # inputs on the coarsest grid so every refinement sees the same spike times
    k = data.draw(st.lists(st.integers(0, 40), min_size=1, max_size=3))
    times = np.sort(np.array(k, dtype=float)) * base
    t_end = times[-1] + 4 * s.tau_s
    runs = [integrate_slif(p, s, times, SimConfig(base / 2 ** j, t_end)).v[:: 2 ** j]
            for j in range(3)]
    n = min(r.size for r in runs)
    d1 = np.max(np.abs(runs[1][:n] - runs[0][:n]))
    d2 = np.max(np.abs(runs[2][:n] - runs[1][:n]))
    # the step is exact up to quadrature, so both changes sit near round-off
    assert d2 <= 4 * d1 + 1e-9


@DRAWS
@given(ref_draws(), st.data())
def test_lif_jump_is_constant(ps, data):
    p, _ = ps
    dt = p.tau_m / 100
    k = sorted(data.draw(st.lists(st.integers(0, 500), min_size=1, max_size=5, unique=True)))
    times = np.array(k) * dt
    tr = integrate_lif(p, times, SimConfig(dt, times[-1] + dt))
    decay = np.exp(-p.leak_rate * dt)
    for j in k:
        before = p.v_rest if j == 0 else p.v_rest + (tr.v[j - 1] - p.v_rest) * decay
        assert abs(tr.v[j] - before - p.jump) < 1e-9


@DRAWS
@given(ref_draws(), st.data())
def test_threshold_runs_are_deterministic(ps, data):
    p, s = ps
    times = data.draw(spike_trains(horizon=5 * s.tau_s))
    q = p.replace(v_th=p.v_rest + data.draw(st.floats(1.0, 50.0)))
    cfg = _setup(q, s, times)
    a = integrate_slif(q, s, times, cfg)
    b = integrate_slif(q, s, times, cfg)
    np.testing.assert_array_equal(a.out_spikes, b.out_spikes)
    assert np.all(np.diff(a.out_spikes) > 0)


@settings(max_examples=100)
@given(ref_draws())
def test_sweep_is_deterministic(ps):
    p, s = ps
    spec = SweepSpec(p, s, ("c_m", "tau_s"), points_per_axis=2, ist_points=12)
    with tempfile.TemporaryDirectory() as d:
        a, b = Path(d) / "a.csv", Path(d) / "b.csv"
        write_sweep_csv(a, run_sweep(spec))
        write_sweep_csv(b, run_sweep(spec))
        assert a.read_bytes() == b.read_bytes()


@DRAWS
@given(ref_draws(), st.floats(0.0, 1.0))
def test_peak_limits_at_zero_and_long_ist(ps, frac):
    p, s = ps
    single = two_spike_peak(p, s, 0.0)
    assert single > 0
    far = 20 * max(s.tau_s, p.tau_m) * (1 + frac)
    assert abs(two_spike_peak(p, s, far) - single) <= 1e-3


@DRAWS
@given(st.lists(st.floats(0.0, 10.0), min_size=2, max_size=40), st.floats(0.01, 1.0),
       st.floats(0.1, 1.0))
def test_shrinking_offset_never_widens_window(amps, offset, shrink):
    curve = ISTResponseCurve(np.arange(len(amps), dtype=float), amps)
    wide = tuning_metrics(curve, offset)
    narrow = tuning_metrics(curve, offset * shrink)
    assert narrow.tw <= wide.tw + 1e-12
    assert wide.tw_window[0] <= wide.favorite_ist <= wide.tw_window[1]
    assert narrow.favorite_ist == wide.favorite_ist
