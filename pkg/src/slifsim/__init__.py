"""LIF and saturating-synapse LIF neurons, two-spike IST tuning curves and sweeps."""

from .metrics import (
    ISTResponseCurve,
    NonContiguousWindowError,
    TuningMetrics,
    default_ist_grid,
    ist_response_curve,
    lif_curve,
    single_spike_peak,
    spiking_ist_window,
    tuning_metrics,
    two_spike_peak,
)
from .neuron import (
    IntegrationError,
    NeuronParams,
    SimConfig,
    SpikeTrain,
    SynapseParams,
    VoltageTrace,
    default_dt,
    gs_decay_oracle,
    integrate_lif,
    integrate_slif,
    lif_decay_oracle,
    slif_step_oracle,
)
from .sweep import SweepSpec, joint_optimum_check, monotonicity_report, run_sweep

__version__ = "0.1.0"
