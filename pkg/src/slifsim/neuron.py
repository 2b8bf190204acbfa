"""LIF and saturating-synapse LIF (SLIF) membranes driven by input spike trains.

Units: time in ms, voltage in mV, specific capacitance in uF/cm^2, leak
conductance in S/cm^2, synaptic conductance in pS, charge in uC/cm^2.

The synaptic conductance is an absolute quantity while the membrane
constants are per unit area, so the two are joined through the membrane
area (``NeuronParams.area``, cm^2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy import integrate

from . import _kernels

# uF/cm^2 over S/cm^2 is microseconds
_MS_PER_UF_PER_S = 1e-3
# pS / (uF) -> 1/ms
_RATE_PER_PS_PER_UF = 1e-9

DEFAULT_AREA = 1e-6  # cm^2, i.e. 100 um^2
DEFAULT_JUMP_MV = 2.0
MIN_DEFAULT_DT = 1e-3  # ms


class IntegrationError(ValueError):
    """Raised when a simulation request cannot be integrated as asked."""


@dataclass(frozen=True)
class NeuronParams:
    c_m: float
    g_l: float
    v_rest: float = -65.0
    v_th: Optional[float] = None
    q_spike: Optional[float] = None
    area: float = DEFAULT_AREA

    def __post_init__(self):
        if not self.c_m > 0:
            raise ValueError(f"c_m must be > 0, got {self.c_m}")
        if not self.g_l >= 0:
            raise ValueError(f"g_l must be >= 0, got {self.g_l}")
        if self.v_th is not None and not self.v_th > self.v_rest:
            raise ValueError(f"v_th ({self.v_th}) must exceed v_rest ({self.v_rest})")
        if self.q_spike is not None and not self.q_spike > 0:
            raise ValueError(f"q_spike must be > 0, got {self.q_spike}")
        if not self.area > 0:
            raise ValueError(f"area must be > 0, got {self.area}")

    @property
    def tau_m(self) -> float:
        """Leak time constant in ms (inf without leak)."""
        if self.g_l == 0:
            return math.inf
        return _MS_PER_UF_PER_S * self.c_m / self.g_l

    @property
    def leak_rate(self) -> float:
        return self.g_l / (_MS_PER_UF_PER_S * self.c_m)

    @property
    def charge(self) -> float:
        """Per-spike charge (uC/cm^2); defaults to a 2 mV jump."""
        if self.q_spike is None:
            return DEFAULT_JUMP_MV * 1e-3 * self.c_m
        return self.q_spike

    @property
    def jump(self) -> float:
        """LIF voltage step per input spike, mV."""
        return 1e3 * self.charge / self.c_m

    def synaptic_rate(self, g_ps: float) -> float:
        """Membrane rate (1/ms) contributed by ``g_ps`` pS of synaptic conductance."""
        return _RATE_PER_PS_PER_UF * g_ps / (self.c_m * self.area)

    def replace(self, **changes) -> "NeuronParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SynapseParams:
    tau_s: float
    g_s_max: float = 100.0
    e_s: float = 0.0

    def __post_init__(self):
        if not self.tau_s > 0:
            raise ValueError(f"tau_s must be > 0, got {self.tau_s}")
        if not self.g_s_max > 0:
            raise ValueError(f"g_s_max must be > 0, got {self.g_s_max}")

    def replace(self, **changes) -> "SynapseParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SpikeTrain:
    times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        if not np.all(np.isfinite(t)):
            raise ValueError("spike times must be finite")
        if np.any(t < 0):
            raise ValueError("spike times must be >= 0")
        if np.any(np.diff(t) < 0):
            raise ValueError("spike times must be sorted (non-decreasing)")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    @property
    def last(self) -> float:
        return float(self.times[-1]) if self.times.size else 0.0


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    record_gs: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")

    @property
    def n_samples(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9)) + 1


@dataclass
class VoltageTrace:
    dt: float
    v: np.ndarray
    g_s: np.ndarray
    out_spikes: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.v.size) * self.dt

    def to_csv(self, path) -> None:
        """Write ``t_ms,v_mV,gs_pS`` rows; the gs column is blank for LIF."""
        write_trace_csv(path, self)


def default_dt(p: NeuronParams, s: Optional[SynapseParams] = None) -> float:
    """Default fixed step for sampled traces.

    min(tau_s, tau_m)/100, no finer than 1 us, and never coarser than the
    tau_s/10 accuracy guard.
    """
    scales = [p.tau_m]
    if s is not None:
        scales.append(s.tau_s)
    dt = max(min(scales) / 100.0, MIN_DEFAULT_DT)
    if s is not None:
        dt = min(dt, s.tau_s / 10.0)
    if not math.isfinite(dt):
        dt = MIN_DEFAULT_DT
    return dt


def _as_train(train) -> SpikeTrain:
    if isinstance(train, SpikeTrain):
        return train
    return SpikeTrain(np.asarray(train, dtype=float))


def _rel_threshold(p: NeuronParams) -> float:
    return math.nan if p.v_th is None else p.v_th - p.v_rest


def _spike_steps(train: SpikeTrain, cfg: SimConfig) -> np.ndarray:
    if train.times.size and cfg.t_end < train.last:
        raise IntegrationError(
            f"t_end ({cfg.t_end} ms) precedes the last input spike ({train.last} ms)")
    return np.rint(train.times / cfg.dt).astype(np.int64)


def integrate_lif(p: NeuronParams, train, cfg: SimConfig) -> VoltageTrace:
    """Integrate the leaky membrane with Dirac inputs.

    Each input spike adds ``p.jump`` mV at the nearest grid step; in between
    v relaxes toward v_rest with time constant ``p.tau_m`` (exact
    exponential). With ``p.v_th`` set, a sample at or above threshold is
    recorded as an output spike and v is reset to v_rest in that step.
    """
    train = _as_train(train)
    steps = _spike_steps(train, cfg)
    u, fired, n_fired = _kernels.lif_trace(
        steps, cfg.n_samples, cfg.dt, _rel_threshold(p), p.leak_rate, p.jump)
    return VoltageTrace(cfg.dt, u + p.v_rest, np.empty(0), fired[:n_fired] * cfg.dt)


def integrate_slif(p: NeuronParams, s: SynapseParams, train, cfg: SimConfig) -> VoltageTrace:
    """Integrate the membrane driven by a saturating conductance synapse.

    Every input spike sets g_s to ``s.g_s_max`` (a spike on a saturated
    synapse changes nothing); g_s decays with ``s.tau_s`` and pulls v toward
    ``s.e_s``. Each step applies the exact solution of the linear ODE over
    the step, with one leak-weighted integral done by fixed quadrature (see
    ``_kernels``); accuracy does not hinge on dt against the membrane time
    constant. Input spikes are snapped to the nearest sample.
    """
    train = _as_train(train)
    if cfg.dt > s.tau_s / 10.0 * (1 + 1e-12):
        raise IntegrationError(
            f"dt={cfg.dt} ms is too coarse for tau_s={s.tau_s} ms (need dt <= tau_s/10)")
    steps = _spike_steps(train, cfg)
    u, g, fired, n_fired = _kernels.slif_trace(
        steps, cfg.n_samples, cfg.dt, _rel_threshold(p), s.e_s - p.v_rest,
        p.leak_rate, p.synaptic_rate(1.0), s.tau_s, s.g_s_max)
    if not cfg.record_gs:
        g = np.empty(0)
    return VoltageTrace(cfg.dt, u + p.v_rest, g, fired[:n_fired] * cfg.dt)


def lif_decay_oracle(v0: float, p: NeuronParams, t: float) -> float:
    """Input-free membrane: v_rest + (v0 - v_rest) exp(-t/tau_m)."""
    return p.v_rest + (v0 - p.v_rest) * math.exp(-p.leak_rate * t)


def gs_decay_oracle(g0: float, s: SynapseParams, t: float) -> float:
    return g0 * math.exp(-t / s.tau_s)


def slif_step_oracle(v0: float, g0: float, p: NeuronParams, s: SynapseParams,
                     t: float, tol: float = 1e-9) -> float:
    """Reference SLIF voltage ``t`` ms after a state (v0, g0), no further input.

    Integrating-factor solution of the linear ODE,

        u(t) = u0 exp(-Phi(t)) + gap * int_0^t exp(Phi(s) - Phi(t)) kappa g(s) ds,

    with the integral done by adaptive quadrature in the lag x = t - s, where
    the integrand is sharpest. For validation only.
    """
    if t == 0:
        return v0
    lam = p.leak_rate
    kap = p.synaptic_rate(1.0)
    tau = s.tau_s
    g_t = g0 * math.exp(-t / tau)

    def phi(x):
        return lam * x + kap * g0 * tau * -math.expm1(-x / tau)

    u0 = v0 - p.v_rest
    gap = s.e_s - p.v_rest
    hom = u0 * math.exp(-phi(t))
    if g0 == 0:
        return p.v_rest + hom

    def integrand(x):
        # exp(Phi(t - x) - Phi(t)) * kappa * g(t - x)
        lag = -lam * x - kap * g_t * tau * math.expm1(x / tau)
        return math.exp(lag) * kap * g_t * math.exp(x / tau)

    rate = lam + kap * g_t
    pts = sorted({c / rate for c in (1.0, 10.0, 40.0) if 0.0 < c / rate < t})
    val, _ = integrate.quad(integrand, 0.0, t, epsabs=tol, epsrel=1e-13, limit=2000,
                            points=pts or None)
    return p.v_rest + hom + gap * val


def write_trace_csv(path, trace: VoltageTrace) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_ms", "v_mV", "gs_pS"])
        has_g = trace.g_s.size == trace.v.size
        for k, (t, v) in enumerate(zip(trace.t, trace.v)):
            w.writerow([f"{t:.12g}", f"{v:.12g}", f"{trace.g_s[k]:.12g}" if has_g else ""])


def read_trace_csv(path) -> VoltageTrace:
    rows = list(csv.DictReader(Path(path).open()))
    t = np.array([float(r["t_ms"]) for r in rows])
    v = np.array([float(r["v_mV"]) for r in rows])
    g = np.array([float(r["gs_pS"]) for r in rows if r["gs_pS"] != ""])
    dt = float(t[1] - t[0]) if t.size > 1 else 0.0
    return VoltageTrace(dt, v, g, np.empty(0))


def simulate(model: str, p: NeuronParams, s: Optional[SynapseParams],
             times: Iterable[float], cfg: SimConfig) -> VoltageTrace:
    if model == "lif":
        return integrate_lif(p, times, cfg)
    if model == "slif":
        if s is None:
            raise ValueError("slif model needs synapse parameters")
        return integrate_slif(p, s, times, cfg)
    raise ValueError(f"unknown model {model!r}")
