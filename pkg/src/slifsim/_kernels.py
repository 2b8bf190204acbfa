"""Compiled inner loops shared by the integrators and the IST measurements.

State is carried as u = v - v_rest (mV) and g (pS). ``gap`` is e_s - v_rest,
``lam`` the leak rate (1/ms) and ``kappa`` the membrane rate per pS of
synaptic conductance (1/ms/pS).

Between input spikes the SLIF membrane obeys

    du/dt = -lam u + kappa g(t) (gap - u),   g(t) = g0 exp(-t/tau_s)

whose exact step solution is

    u(h) = gap - (gap - u0) exp(-Phi(h)) - gap * lam * J(h)
    Phi(h) = lam h + kappa g0 tau_s (1 - exp(-h/tau_s))
    J(h) = int_0^h exp(-lam x - kappa g(h) tau_s (exp(x/tau_s) - 1)) dx

Only J is approximated, by Gauss-Legendre panels in the variable
y = (lam + kappa g(h)) x, which keeps the rule accurate however stiff the
membrane is relative to the step.
"""

import math

import numba
import numpy as np

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_PANELS = np.array([0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 26.0, 40.0])
_BISECT_ITERS = 60


@numba.njit(cache=True)
def _leak_weight(h, lam, kg_end, tau_s):
    """lam * J(h); see module docstring."""
    if lam == 0.0:
        return 0.0
    r = lam + kg_end
    y_max = r * h
    rts = r * tau_s
    c = kg_end * tau_s
    total = 0.0
    for i in range(_PANELS.shape[0] - 1):
        a = _PANELS[i]
        if a >= y_max:
            break
        b = min(_PANELS[i + 1], y_max)
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        acc = 0.0
        for k in range(_GL_X.shape[0]):
            y = mid + half * _GL_X[k]
            z = y / rts
            acc += _GL_W[k] * math.exp(-y - c * (math.expm1(z) - z))
        total += half * acc
    return lam / r * total


@numba.njit(cache=True)
def slif_step(u, g, gap, lam, kappa, h, tau_s):
    if g == 0.0:
        return u * math.exp(-lam * h), 0.0
    em1 = math.expm1(-h / tau_s)
    g1 = g * (1.0 + em1)
    phi = lam * h - kappa * g * tau_s * em1
    eph = math.exp(-phi)
    lw = _leak_weight(h, lam, kappa * g1, tau_s)
    # quadrature error must not push v past its barriers
    lw = min(max(lw, 0.0), -math.expm1(-phi))
    return gap - (gap - u) * eph - gap * lw, g1


@numba.njit(cache=True)
def _slope(u, g, gap, lam, kappa):
    return -lam * u + kappa * g * (gap - u)


@numba.njit(cache=True)
def _refine_peak(u, g, h, gap, lam, kappa, tau_s):
    """Maximum of u over (0, h) given the slope changes sign + -> - there."""
    lo = 0.0
    hi = h
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        um, gm = slif_step(u, g, gap, lam, kappa, mid, tau_s)
        if _slope(um, gm, gap, lam, kappa) > 0.0:
            lo = mid
        else:
            hi = mid
    up, _ = slif_step(u, g, gap, lam, kappa, 0.5 * (lo + hi), tau_s)
    return up


@numba.njit(cache=True)
def slif_trace(spike_steps, n_samples, dt, th, gap, lam, kappa, tau_s, g_max):
    """Fixed-step SLIF run; ``spike_steps`` are sorted sample indices.

    ``th`` is the threshold relative to rest (NaN disables firing). Returns
    (u, g, fired_steps, n_fired).
    """
    u_out = np.empty(n_samples)
    g_out = np.empty(n_samples)
    fired = np.empty(n_samples, dtype=np.int64)
    n_fired = 0
    u = 0.0
    g = 0.0
    j = 0
    n_in = spike_steps.shape[0]
    for k in range(n_samples):
        if k > 0:
            u, g = slif_step(u, g, gap, lam, kappa, dt, tau_s)
        while j < n_in and spike_steps[j] == k:
            g = g_max
            j += 1
        if u >= th:
            fired[n_fired] = k
            n_fired += 1
            u = 0.0
        u_out[k] = u
        g_out[k] = g
    return u_out, g_out, fired, n_fired


@numba.njit(cache=True)
def lif_trace(spike_steps, n_samples, dt, th, lam, jump):
    u_out = np.empty(n_samples)
    fired = np.empty(n_samples, dtype=np.int64)
    n_fired = 0
    decay = math.exp(-lam * dt)
    u = 0.0
    j = 0
    n_in = spike_steps.shape[0]
    for k in range(n_samples):
        if k > 0:
            u = u * decay
        while j < n_in and spike_steps[j] == k:
            u += jump
            j += 1
        if u >= th:
            fired[n_fired] = k
            n_fired += 1
            u = 0.0
        u_out[k] = u
    return u_out, fired, n_fired


@numba.njit(cache=True)
def slif_peak(times, t_end, h, th, gap, lam, kappa, tau_s, g_max):
    """Largest u reached for inputs at exact ``times`` (sorted), up to t_end.

    Steps of at most ``h`` are shortened to land on every input. A local
    maximum is located by bisection on the sign of du/dt inside the step
    where the slope turns negative. Spent conductance is skipped in closed
    form. After the last input only one maximum can follow, so the run
    ends once the slope is negative.

    Returns (peak_u, fired); fired is True as soon as u reaches ``th``.
    """
    n = times.shape[0]
    if n == 0:
        return 0.0, False
    u = 0.0
    g = 0.0
    best = 0.0
    t = times[0]
    j = 0
    g_tiny = 1e-15 * g_max
    while True:
        while j < n and times[j] <= t:
            g = g_max
            j += 1
        t_next = times[j] if j < n else t_end
        if t >= t_end:
            break
        if g < g_tiny:
            if j >= n:
                break
            u = u * math.exp(-lam * (t_next - t))
            g = 0.0
            t = t_next
            continue
        step = h
        land = t + step >= t_next
        if land:
            step = t_next - t
        s0 = _slope(u, g, gap, lam, kappa)
        u1, g1 = slif_step(u, g, gap, lam, kappa, step, tau_s)
        s1 = _slope(u1, g1, gap, lam, kappa)
        if s0 > 0.0 and s1 <= 0.0:
            up = _refine_peak(u, g, step, gap, lam, kappa, tau_s)
            if up > best:
                best = up
        if u1 > best:
            best = u1
        if best >= th:
            return best, True
        u = u1
        g = g1
        t = t_next if land else t + step
        if j >= n and s1 <= 0.0:
            break
    return best, False


@numba.njit(cache=True)
def lif_max(spike_steps, n_samples, dt, lam, jump):
    """Largest sample of ``lif_trace`` (no threshold) without storing the trace."""
    decay = math.exp(-lam * dt)
    u = 0.0
    best = 0.0
    j = 0
    n_in = spike_steps.shape[0]
    for k in range(n_samples):
        if k > 0:
            u = u * decay
        while j < n_in and spike_steps[j] == k:
            u += jump
            j += 1
        if u > best:
            best = u
    return best
