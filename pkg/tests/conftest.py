import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from slifsim import NeuronParams, SynapseParams

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.load_profile("default")

REF = (NeuronParams(1e-4, 1e-4), SynapseParams(0.1))
SLOW_SYNAPSE = (NeuronParams(1e-5, 5e-5), SynapseParams(0.9))
FAST_SYNAPSE = (NeuronParams(1e-3, 1e-5), SynapseParams(0.01))

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def record(n: int, title: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_LINES[n] = f"criterion {n} [{'PASS' if passed else 'FAIL'}] {title}" + (
        f": {detail}" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def ref():
    return REF


def scale():
    """Log-uniform multiplier in [0.1, 10]."""
    return st.floats(-1.0, 1.0).map(lambda e: float(10.0 ** e))


@st.composite
def ref_draws(draw):
    p, s = REF
    return (p.replace(c_m=p.c_m * draw(scale()), g_l=p.g_l * draw(scale())),
            s.replace(tau_s=s.tau_s * draw(scale())))


@st.composite
def spike_trains(draw, horizon, max_spikes=4):
    """Sorted spike times in [0, horizon], possibly with duplicates."""
    times = draw(st.lists(st.floats(0.0, horizon), min_size=1, max_size=max_spikes))
    if draw(st.booleans()):
        times.append(times[0])
    return np.sort(np.array(times))
