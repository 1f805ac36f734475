"""State-space form of a circuit, a stiff integrator baseline, events and metrics.

Every lag ``(tau D + Id)^-1`` becomes a state obeying ``tau * dv_x/dt = v - v_x``.
Integration starts from the static equilibrium of the t = 0 currents and is
restarted at every stimulus discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .circuit import NetworkSpec, network_spike_thresholds, static_equilibrium
from .errors import StiffnessError
from .signals import Signal, TimeGrid, resample

__all__ = [
    "OdeSystem",
    "Trajectory",
    "EventList",
    "to_state_space",
    "integrate",
    "simulate_reference",
    "detect_events",
    "detect_network_events",
    "compare",
]


@dataclass(frozen=True, eq=False)
class OdeSystem:
    """``y = [v_0..v_{n-1}, lag states...]`` with an analytic Jacobian.

    ``lag_states`` lists ``(neuron, tau)`` for every auxiliary state; branch
    and synapse terms reference either a voltage index or a lag-state index.
    """

    grid: TimeGrid
    capacitances: np.ndarray
    leaks: np.ndarray
    lag_states: tuple
    terms: tuple  # (post neuron, state index, readout)
    currents: tuple  # per neuron: (callable, breakpoints)
    y0: np.ndarray

    @property
    def n(self) -> int:
        return len(self.capacitances)

    @property
    def dim(self) -> int:
        return self.n + len(self.lag_states)

    def current(self, t):
        return np.array([fn(t) for fn, _ in self.currents])

    def breakpoints(self):
        pts = set()
        for _, bps in self.currents:
            pts.update(float(b) for b in bps)
        return sorted(b for b in pts if 0.0 < b < self.grid.duration)

    def rhs(self, t, y, i_now=None):
        n = self.n
        v = y[:n]
        i_now = self.current(t) if i_now is None else i_now
        dv = i_now - self.leaks * v
        for k, idx, r in self.terms:
            dv[k] -= r(y[idx])
        out = np.empty_like(y)
        out[:n] = dv / self.capacitances
        for s, (k, tau) in enumerate(self.lag_states):
            out[n + s] = (v[k] - y[n + s]) / tau
        return out

    def jac(self, t, y):
        n = self.n
        J = np.zeros((self.dim, self.dim))
        J[np.arange(n), np.arange(n)] = -self.leaks
        for k, idx, r in self.terms:
            J[k, idx] -= r.derivative(y[idx])
        J[:n] /= self.capacitances[:, None]
        for s, (k, tau) in enumerate(self.lag_states):
            J[n + s, k] = 1.0 / tau
            J[n + s, n + s] = -1.0 / tau
        return J


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Voltages on a grid, plus the full state history."""

    voltages: tuple
    states: np.ndarray | None = None
    nfev: int = 0

    @property
    def grid(self) -> TimeGrid:
        return self.voltages[0].grid

    def as_array(self) -> np.ndarray:
        return np.stack([v.samples for v in self.voltages])


@dataclass(frozen=True)
class EventList:
    """Spikes and bursts of one trace.

    ``bursts`` holds ``(onset, offset, spike_count)`` triples.
    """

    spike_times: tuple = ()
    spike_peaks: tuple = ()
    bursts: tuple = ()

    @property
    def n_spikes(self) -> int:
        return len(self.spike_times)

    def to_dict(self) -> dict:
        return {
            "spike_times": [float(t) for t in self.spike_times],
            "spike_peaks": [float(p) for p in self.spike_peaks],
            "bursts": [[float(a), float(b), int(c)] for a, b, c in self.bursts],
        }


def to_state_space(net: NetworkSpec) -> OdeSystem:
    """Build the ODE form of ``net``; instantaneous terms read ``v`` directly."""
    n = net.n
    lag_index = {}
    lag_states = []

    def state_of(k, tau):
        if tau == 0:
            return k
        key = (k, float(tau))
        if key not in lag_index:
            lag_index[key] = n + len(lag_states)
            lag_states.append(key)
        return lag_index[key]

    terms = []
    for k, nr in enumerate(net.neurons):
        for b in nr.branches:
            terms.append((k, state_of(k, b.lag.tau), b.readout))
    for s in net.synapses:
        terms.append((s.post, state_of(s.pre, s.tau), s.readout))

    currents = []
    for k in range(n):
        stims = [st for st in net.stimuli if st.neuron == k]
        if stims:
            parts = [st.function() for st in stims]
            fns = [p[0] for p in parts]
            bps = sorted({b for p in parts for b in p[1]})
            currents.append((_summed(fns), bps))
        else:
            currents.append((_grid_interp(net.external_currents[k]), []))

    rest = static_equilibrium(net)
    y0 = np.concatenate([rest, [rest[k] for k, _ in lag_states]])
    return OdeSystem(
        grid=net.grid,
        capacitances=np.array([nr.capacitance for nr in net.neurons], float),
        leaks=np.array([nr.leak for nr in net.neurons], float),
        lag_states=tuple(lag_states),
        terms=tuple(terms),
        currents=tuple(currents),
        y0=y0,
    )


def _summed(fns):
    return lambda t: sum(f(t) for f in fns)


def _grid_interp(sig: Signal):
    t = np.append(sig.grid.times, sig.grid.duration)
    v = np.append(sig.samples, sig.samples[0])
    period = sig.grid.duration
    return lambda s: float(np.interp(s % period, t, v))


def integrate(ode: OdeSystem, dt_max: float = 1.0, rtol: float = 1e-8,
              atol: float = 1e-10, method: str = "BDF") -> Trajectory:
    """Adaptive implicit integration sampled on ``ode.grid``.

    The horizon is cut at every stimulus discontinuity so that no step
    straddles a jump.
    """
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    grid = ode.grid
    times = grid.times
    edges = [0.0] + ode.breakpoints() + [grid.duration]
    y = ode.y0.astype(float).copy()
    out = np.empty((ode.dim, grid.length))
    nfev = 0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        mask = (times >= a) & (times < b)
        t_eval = np.append(times[mask], b)
        lo, hi = a + 1e-9 * (b - a), b - 1e-9 * (b - a)

        def f(t, yy, lo=lo, hi=hi):
            return ode.rhs(t, yy, ode.current(min(max(t, lo), hi)))

        sol = solve_ivp(f, (a, b), y, method=method, jac=ode.jac, max_step=dt_max,
                        rtol=rtol, atol=atol, t_eval=t_eval)
        if sol.status != 0:
            raise StiffnessError(f"integration failed on [{a:g}, {b:g}] ms: {sol.message}")
        nfev += sol.nfev
        out[:, mask] = sol.y[:, :-1]
        y = sol.y[:, -1]
    volts = tuple(Signal(grid, out[k]) for k in range(ode.n))
    return Trajectory(voltages=volts, states=out, nfev=nfev)


def simulate_reference(net: NetworkSpec, dt_max: float = 1.0, rtol: float = 1e-8,
                       atol: float = 1e-10, method: str = "BDF") -> Trajectory:
    return integrate(to_state_space(net), dt_max=dt_max, rtol=rtol, atol=atol, method=method)


def detect_events(v: Signal, spike_threshold: float, burst_gap: float = 500.0) -> EventList:
    """Upward threshold crossings, each refined to its local maximum.

    Peak times use a three-point parabola through the largest sample of the
    supra-threshold excursion. Bursts group spikes whose gaps are below
    ``burst_gap``.
    """
    x = v.samples
    dt = v.grid.dt
    above = x >= spike_threshold
    starts = np.nonzero(above[1:] & ~above[:-1])[0] + 1
    times, peaks = [], []
    for s in starts:
        e = s
        while e < len(x) and above[e]:
            e += 1
        k = s + int(np.argmax(x[s:e]))
        t, p = k * dt, x[k]
        if 0 < k < len(x) - 1:
            y0, y1, y2 = x[k - 1], x[k], x[k + 1]
            den = y0 - 2 * y1 + y2
            if den < 0:
                d = 0.5 * (y0 - y2) / den
                t = (k + d) * dt
                p = y1 - 0.25 * (y0 - y2) * d
        times.append(float(t))
        peaks.append(float(p))
    bursts = []
    if times:
        onset, count, last = times[0], 1, times[0]
        for t in times[1:]:
            if t - last < burst_gap:
                count += 1
            else:
                bursts.append((onset, last, count))
                onset, count = t, 1
            last = t
        bursts.append((onset, last, count))
    return EventList(tuple(times), tuple(peaks), tuple(bursts))


def detect_network_events(voltages, thresholds, burst_gap: float = 500.0) -> list:
    thresholds = np.broadcast_to(np.asarray(thresholds, float), (len(voltages),))
    return [detect_events(v, th, burst_gap) for v, th in zip(voltages, thresholds)]


def _voltages(obj):
    if hasattr(obj, "voltages"):
        return tuple(obj.voltages)
    return tuple(obj)


def compare(reference, candidate, spike_threshold, burst_gap: float = 500.0) -> dict:
    """Voltage errors and spike agreement between two sets of traces.

    The candidate is resampled onto the reference grid when they differ.
    ``max_spike_time_offset`` pairs spikes in order and is ``inf`` when
    either side has spikes the other lacks entirely.
    """
    ref = _voltages(reference)
    cand = _voltages(candidate)
    if len(ref) != len(cand):
        raise ValueError("reference and candidate have different neuron counts")
    grid = ref[0].grid
    cand = tuple(c if c.grid == grid else resample(c, grid) for c in cand)
    R = np.stack([r.samples for r in ref])
    X = np.stack([c.samples for c in cand])
    err = X - R
    ev_r = detect_network_events(ref, spike_threshold, burst_gap)
    ev_c = detect_network_events(cand, spike_threshold, burst_gap)
    count_diff = [c.n_spikes - r.n_spikes for r, c in zip(ev_r, ev_c)]
    offset = 0.0
    for r, c in zip(ev_r, ev_c):
        m = min(r.n_spikes, c.n_spikes)
        if m:
            d = np.abs(np.array(c.spike_times[:m]) - np.array(r.spike_times[:m]))
            offset = max(offset, float(d.max()))
        elif r.n_spikes != c.n_spikes:
            offset = float("inf")
    return {
        "max_abs_error": float(np.abs(err).max()),
        "relative_l2_error": float(np.linalg.norm(err) / max(np.linalg.norm(R), 1e-14)),
        "spike_count_diff": count_diff,
        "max_spike_time_offset": offset,
        "reference_spikes": [r.n_spikes for r in ev_r],
        "candidate_spikes": [c.n_spikes for c in ev_c],
    }


def default_thresholds(net: NetworkSpec) -> np.ndarray:
    return network_spike_thresholds(net)
