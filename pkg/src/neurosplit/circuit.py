"""Neurons, synapses, the network operator W and its difference-of-monotone split.

A neuron ``k`` obeys ``C Dv + leak*v + sum_b r_b(L_b v) + sum_j s_jk(L_jk v_j) = i_k``
where ``L`` are first-order lags and ``r``, ``s`` are saturating readouts.
The splitting rewrites ``W(v) - i`` as ``E(v) + sum_i (F_i(v) - G_i(v))`` with
``E = C D`` and every ``F_i``, ``G_i`` monotone after a shift ``lambda*Id``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, DimensionError
from .operators import (
    CapacitiveDifferentiator,
    FirstOrderLag,
    MonotonicityCertificate,
    NonlinearReadout,
    averagedness_theta,
    fixed_point_resolvent,
)
from .signals import LiftedSignal, Signal, TimeGrid, load_csv, resample

__all__ = [
    "NeuronSpec",
    "SynapseSpec",
    "Stimulus",
    "NetworkSpec",
    "NetworkOperator",
    "ShiftPolicy",
    "LocalPair",
    "SynapticPair",
    "DmSplitting",
    "apply_neuron",
    "apply_synapse",
    "assemble_network",
    "residual",
    "split_network",
    "validate_certificate",
    "static_equilibrium",
    "spike_threshold",
]

TIMESCALE_LABELS = ("ins", "f", "s", "us")


@dataclass(frozen=True)
class NeuronSpec:
    """Single-compartment neuron.

    ``branches`` carry their own lag, readout and optional explicit shift.
    ``resting_potential`` may be left as None and is then found numerically.
    """

    branches: tuple
    capacitance: float = 1.0
    leak: float = 1.0
    resting_potential: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise ConfigurationError("a neuron needs at least one branch")
        if not (np.isfinite(self.leak) and self.leak >= 0):
            raise ConfigurationError(f"leak must be >= 0, got {self.leak}")
        CapacitiveDifferentiator(self.capacitance)
        for b in self.branches:
            if b.label and b.label not in TIMESCALE_LABELS:
                raise ConfigurationError(
                    f"timescale label {b.label!r} not in {TIMESCALE_LABELS}"
                )


@dataclass(frozen=True)
class SynapseSpec:
    """``gain * sigmoid(slope * (lag(v_pre) - offset))`` injected into ``post``."""

    pre: int
    post: int
    gain: float
    offset: float = 0.0
    tau: float = 0.0
    slope: float = 1.0
    kind: str = "sigmoid"

    def __post_init__(self):
        if self.pre == self.post:
            raise ConfigurationError(f"synapse {self.pre}->{self.post} is a self-loop")

    @property
    def lag(self) -> FirstOrderLag:
        return FirstOrderLag(self.tau)

    @property
    def readout(self) -> NonlinearReadout:
        return NonlinearReadout(self.kind, self.gain, self.offset, self.slope)


@dataclass(frozen=True)
class Stimulus:
    """External current component injected into one neuron.

    ``pulse`` is ``amplitude`` on ``[t_on, t_off)``; ``hold`` is constant;
    ``file`` reads a ``t,value`` CSV.
    """

    neuron: int
    kind: str
    amplitude: float = 0.0
    t_on: float = 0.0
    t_off: float = 0.0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("pulse", "hold", "file"):
            raise ConfigurationError(f"unknown input kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigurationError("file input needs a path")
        if self.kind == "pulse" and self.t_off < self.t_on:
            raise ConfigurationError("pulse needs t_off >= t_on")

    def sample(self, grid: TimeGrid) -> np.ndarray:
        t = grid.times
        if self.kind == "hold":
            return np.full(grid.length, float(self.amplitude))
        if self.kind == "pulse":
            return np.where((t >= self.t_on) & (t < self.t_off), self.amplitude, 0.0)
        sig = load_csv(self.path)
        if sig.grid.length != grid.length:
            sig = resample(sig, grid)
        return np.array(sig.samples)

    def function(self):
        """Continuous-time version and its discontinuity times."""
        if self.kind == "hold":
            a = float(self.amplitude)
            return (lambda t: a), []
        if self.kind == "pulse":
            a, t0, t1 = float(self.amplitude), float(self.t_on), float(self.t_off)
            return (lambda t: a if t0 <= t < t1 else 0.0), [t0, t1]
        sig = load_csv(self.path)
        return _periodic_interp(sig), []


def _periodic_interp(sig: Signal):
    t = sig.grid.times
    v = sig.samples
    period = sig.grid.duration
    tt = np.append(t, period)
    vv = np.append(v, v[0])
    return lambda s: float(np.interp(s % period, tt, vv))


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Neurons, synapses and one external current per neuron on a common grid."""

    neurons: tuple
    synapses: tuple
    external_currents: tuple
    stimuli: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "neurons", tuple(self.neurons))
        object.__setattr__(self, "synapses", tuple(self.synapses))
        object.__setattr__(self, "external_currents", tuple(self.external_currents))
        object.__setattr__(self, "stimuli", tuple(self.stimuli))
        n = len(self.neurons)
        if n < 1:
            raise ConfigurationError("network needs at least one neuron")
        if len(self.external_currents) != n:
            raise DimensionError(
                f"{n} neurons but {len(self.external_currents)} external currents"
            )
        g0 = self.external_currents[0].grid
        for c in self.external_currents[1:]:
            g0.check_same(c.grid)
        for s in self.synapses:
            if not (0 <= s.pre < n and 0 <= s.post < n):
                raise ConfigurationError(
                    f"synapse {s.pre}->{s.post} references a neuron outside 0..{n - 1}"
                )
        for st in self.stimuli:
            if not 0 <= st.neuron < n:
                raise ConfigurationError(f"input targets missing neuron {st.neuron}")

    @classmethod
    def from_stimuli(cls, neurons, synapses, stimuli, grid: TimeGrid) -> "NetworkSpec":
        currents = _currents_from_stimuli(len(neurons), stimuli, grid)
        return cls(tuple(neurons), tuple(synapses), currents, tuple(stimuli))

    @property
    def n(self) -> int:
        return len(self.neurons)

    @property
    def grid(self) -> TimeGrid:
        return self.external_currents[0].grid

    def currents_array(self) -> np.ndarray:
        return np.stack([c.samples for c in self.external_currents])

    def on_grid(self, grid: TimeGrid) -> "NetworkSpec":
        """Same circuit re-sampled on another grid."""
        if grid == self.grid:
            return self
        if self.stimuli:
            currents = _currents_from_stimuli(self.n, self.stimuli, grid)
        else:
            currents = tuple(resample(c, grid) for c in self.external_currents)
        return replace(self, external_currents=currents)

    def with_parameter(self, ref: str, value: float) -> "NetworkSpec":
        """Copy with one numeric parameter replaced.

        ``ref`` looks like ``neurons[0].branches[1].gain``,
        ``neurons[0].branches[1].tau``, ``synapses[0].gain`` or
        ``inputs[1].amplitude``.
        """
        return _set_parameter(self, ref, float(value))

    def baseline_currents(self) -> np.ndarray:
        """Current values at t = 0, used for the resting state."""
        return self.currents_array()[:, 0]


def _currents_from_stimuli(n, stimuli, grid):
    acc = [np.zeros(grid.length) for _ in range(n)]
    for st in stimuli:
        acc[st.neuron] = acc[st.neuron] + st.sample(grid)
    return tuple(Signal(grid, a) for a in acc)


_REF_TOKEN = ("neurons", "branches", "synapses", "inputs")


def _parse_ref(ref: str):
    out = []
    for part in ref.split("."):
        if "[" in part:
            name, idx = part[:-1].split("[")
            out.append((name, int(idx)))
        else:
            out.append((part, None))
    return out


def _set_parameter(net: NetworkSpec, ref: str, value: float) -> NetworkSpec:
    toks = _parse_ref(ref)
    try:
        head, idx = toks[0]
        if head == "neurons":
            neuron = net.neurons[idx]
            name, bidx = toks[1]
            if name == "branches":
                b = neuron.branches[bidx]
                attr = toks[2][0]
                if attr in ("gain", "offset", "slope", "kind"):
                    b = replace(b, readout=replace(b.readout, **{attr: value}))
                elif attr == "tau":
                    b = replace(b, lag=FirstOrderLag(value))
                elif attr in ("lambda", "shift"):
                    b = replace(b, shift=value)
                else:
                    raise KeyError(attr)
                branches = list(neuron.branches)
                branches[bidx] = b
                neuron = replace(neuron, branches=tuple(branches))
            elif name in ("C", "capacitance"):
                neuron = replace(neuron, capacitance=value)
            elif name == "leak":
                neuron = replace(neuron, leak=value)
            elif name == "rest":
                neuron = replace(neuron, resting_potential=value)
            else:
                raise KeyError(name)
            neurons = list(net.neurons)
            neurons[idx] = neuron
            return replace(net, neurons=tuple(neurons))
        if head == "synapses":
            syn = replace(net.synapses[idx], **{toks[1][0]: value})
            syns = list(net.synapses)
            syns[idx] = syn
            return replace(net, synapses=tuple(syns))
        if head == "inputs":
            st = replace(net.stimuli[idx], **{toks[1][0]: value})
            stimuli = list(net.stimuli)
            stimuli[idx] = st
            return NetworkSpec.from_stimuli(net.neurons, net.synapses, stimuli, net.grid)
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"cannot resolve parameter reference {ref!r}") from exc
    raise ConfigurationError(f"cannot resolve parameter reference {ref!r}")


def get_parameter(net: NetworkSpec, ref: str) -> float:
    toks = _parse_ref(ref)
    try:
        head, idx = toks[0]
        if head == "neurons":
            neuron = net.neurons[idx]
            name, bidx = toks[1]
            if name == "branches":
                b = neuron.branches[bidx]
                attr = toks[2][0]
                if attr == "tau":
                    return b.lag.tau
                if attr in ("lambda", "shift"):
                    return b.shift
                return getattr(b.readout, attr)
            return {"C": neuron.capacitance, "capacitance": neuron.capacitance,
                    "leak": neuron.leak, "rest": neuron.resting_potential}[name]
        if head == "synapses":
            return getattr(net.synapses[idx], toks[1][0])
        if head == "inputs":
            return getattr(net.stimuli[idx], toks[1][0])
    except (IndexError, KeyError, AttributeError, TypeError) as exc:
        raise ConfigurationError(f"cannot resolve parameter reference {ref!r}") from exc
    raise ConfigurationError(f"cannot resolve parameter reference {ref!r}")


def _neuron_array(spec: NeuronSpec, v, grid):
    out = CapacitiveDifferentiator(spec.capacitance).apply_array(v, grid) + spec.leak * v
    for b in spec.branches:
        out = out + b.readout(b.lag.apply_array(v, grid))
    return out


def apply_neuron(spec: NeuronSpec, v: Signal) -> Signal:
    """``C Dv + leak*v + sum of unshifted branch currents``."""
    return Signal(v.grid, _neuron_array(spec, v.samples, v.grid))


def apply_synapse(spec: SynapseSpec, v_pre: Signal) -> Signal:
    return Signal(v_pre.grid, spec.readout(spec.lag.apply_array(v_pre.samples, v_pre.grid)))


@dataclass(frozen=True, eq=False)
class NetworkOperator:
    """The map ``v -> W(v)`` on ``(n, g)`` arrays."""

    net: NetworkSpec

    def apply_array(self, x):
        grid = self.net.grid
        x = np.asarray(x, dtype=float)
        out = np.stack([_neuron_array(nr, x[k], grid) for k, nr in enumerate(self.net.neurons)])
        for s in self.net.synapses:
            out[s.post] += s.readout(s.lag.apply_array(x[s.pre], grid))
        return out

    def __call__(self, x: LiftedSignal) -> LiftedSignal:
        return LiftedSignal.from_array(x.grid, self.apply_array(x.as_array()))


def assemble_network(net: NetworkSpec) -> NetworkOperator:
    return NetworkOperator(net)


def residual_array(net: NetworkSpec, x) -> tuple:
    r = NetworkOperator(net).apply_array(x) - net.currents_array()
    return r, float(np.linalg.norm(r) / r.size)


def residual(net: NetworkSpec, x: LiftedSignal):
    """``r = W(x) - i_ext`` and the normalized norm ``|r| / L``."""
    if len(x) != net.n:
        raise DimensionError(f"expected {net.n} voltage traces, got {len(x)}")
    net.grid.check_same(x.grid)
    r, nrm = residual_array(net, x.as_array())
    return LiftedSignal.from_array(x.grid, r), nrm


# --------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class ShiftPolicy:
    """How monotonizing shifts and pairs are chosen.

    Parameters
    ----------
    lam : float, optional
        One shift for every lagged pair, overriding defaults and per-branch values.
    lam_syn : float, optional
        Shift for the synaptic row pairs.
    grouping : {"timescale", "branch"}
        ``timescale`` puts all branches sharing a lag into one pair;
        ``branch`` gives each lagged branch its own pair.
    """

    lam: float | None = None
    lam_syn: float | None = None
    grouping: str = "timescale"

    def __post_init__(self):
        if self.grouping not in ("timescale", "branch"):
            raise ConfigurationError(f"unknown grouping {self.grouping!r}")
        for v in (self.lam, self.lam_syn):
            if v is not None and not (np.isfinite(v) and v >= 0):
                raise ConfigurationError(f"shifts must be >= 0, got {v}")


@dataclass(frozen=True, eq=False)
class LocalPair:
    """Neuron-local pair acting on row ``neuron`` of the lifted voltage.

    ``F = sum pos readouts(lag v) + (shift + leak) v - current`` and
    ``G = sum |neg| readouts(lag v) + shift v``. Other rows map to zero.
    """

    neuron: int
    lag: FirstOrderLag
    pos: tuple
    neg: tuple
    shift: float
    leak: float = 0.0
    current: np.ndarray | None = None
    label: str = ""

    def _pos_sum(self, u):
        out = 0.0
        for r in self.pos:
            out = out + r(u)
        return out

    def _neg_sum(self, u):
        out = 0.0
        for r in self.neg:
            out = out - r(u)
        return out

    def lipschitz_pos(self):
        return sum(r.lipschitz for r in self.pos)

    def lipschitz_neg(self):
        return sum(r.lipschitz for r in self.neg)

    def contraction_factor(self, gamma):
        return gamma * self.lipschitz_pos() / (1.0 + gamma * (self.shift + self.leak))

    def apply_F(self, x, grid):
        out = np.zeros_like(x)
        v = x[self.neuron]
        row = (self.shift + self.leak) * v + self._pos_sum(self.lag.apply_array(v, grid))
        if self.current is not None:
            row = row - self.current
        out[self.neuron] = row
        return out

    def apply_G(self, x, grid):
        out = np.zeros_like(x)
        v = x[self.neuron]
        out[self.neuron] = self.shift * v + self._neg_sum(self.lag.apply_array(v, grid))
        return out

    def resolvent(self, gamma, w, grid, warm=None, inner_tol=1e-8, inner_max=200):
        """Solve ``q + gamma*F(q) = w``; rows other than ``neuron`` pass through."""
        q = np.array(w, dtype=float, copy=True)
        wk = w[self.neuron]
        rhs = wk if self.current is None else wk + gamma * self.current
        denom = 1.0 + gamma * (self.shift + self.leak)
        iters = 0
        if not self.pos:
            q[self.neuron] = rhs / denom
        else:
            factor = self.contraction_factor(gamma)
            if factor >= 1:
                raise ConfigurationError(
                    f"pair {self.label}: inner map not contractive at step {gamma:g} "
                    f"(factor {factor:.3f})"
                )
            lag = self.lag

            def nl(u):
                return self._pos_sum(lag.apply_array(u, grid))

            q[self.neuron], iters, _ = fixed_point_resolvent(
                rhs, nl, gamma, denom, inner_tol, inner_max,
                warm=None if warm is None else warm[self.neuron],
                ref_norm=np.linalg.norm(wk), label=f"pair {self.label}",
            )
        return q, iters


@dataclass(frozen=True, eq=False)
class SynapticPair:
    """Row pair ``F = shift*Id + Y_post``, ``G = shift*Id`` on the whole lifted vector."""

    post: int
    terms: tuple  # (pre, lag, readout)
    shift: float
    label: str = ""

    def _row(self, x, grid):
        out = 0.0
        for pre, lag, r in self.terms:
            out = out + r(lag.apply_array(x[pre], grid))
        return out

    def contraction_factor(self, gamma):
        return 0.0

    def apply_F(self, x, grid):
        out = self.shift * x
        out[self.post] = out[self.post] + self._row(x, grid)
        return out

    def apply_G(self, x, grid):
        return self.shift * x

    def resolvent(self, gamma, w, grid, warm=None, inner_tol=1e-8, inner_max=200):
        """Explicit: presynaptic rows are scaled first, then the post row."""
        d = 1.0 + gamma * self.shift
        q = w / d
        q[self.post] = (w[self.post] - gamma * self._row(q, grid)) / d
        return q, 0


@dataclass(frozen=True, eq=False)
class DmSplitting:
    """``E = block-diag(C_k D)`` plus ``p`` monotone pairs ``(F_i, G_i)``."""

    grid: TimeGrid
    capacitances: tuple
    pairs: tuple
    n_timescales: int = 0
    n_synapses: int = 0
    rest: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.capacitances)

    @property
    def p(self) -> int:
        return len(self.pairs)

    @property
    def pair_labels(self) -> list:
        return [pr.label for pr in self.pairs]

    @property
    def operator_count(self) -> int:
        return 1 + 2 * self.p

    @property
    def formula_count(self) -> int:
        """``2n + 2m + 1`` with ``m`` the number of distinct timescales."""
        return 2 * self.n + 2 * self.n_timescales + 1

    def apply_E(self, x):
        return np.stack([
            CapacitiveDifferentiator(c).apply_array(x[k], self.grid)
            for k, c in enumerate(self.capacitances)
        ])

    def resolvent_E(self, alpha, w):
        return np.stack([
            CapacitiveDifferentiator(c).resolvent_array(alpha, w[k], self.grid)
            for k, c in enumerate(self.capacitances)
        ])

    def apply_F(self, i, x):
        return self.pairs[i].apply_F(x, self.grid)

    def apply_G(self, i, x):
        return self.pairs[i].apply_G(x, self.grid)

    def total(self, x):
        """``E(x) + sum_i (F_i(x) - G_i(x))`` summed left to right."""
        out = self.apply_E(x)
        for i in range(self.p):
            out = out + (self.apply_F(i, x) - self.apply_G(i, x))
        return out


def _default_lagged_shift(pos, neg):
    return max(sum(r.lipschitz for r in pos), sum(r.lipschitz for r in neg))


def split_network(net: NetworkSpec, shifts: ShiftPolicy | None = None) -> DmSplitting:
    """Build the difference-of-monotone splitting of ``W(v) - i_ext``.

    Per neuron there is one pair for the instantaneous branches, which also
    holds the leak and the external current, plus pairs for the lagged
    branches grouped by ``shifts.grouping``. Each neuron with incoming
    synapses adds one row pair.
    """
    shifts = shifts or ShiftPolicy()
    grid = net.grid
    pairs = []
    taus = set()
    for k, neuron in enumerate(net.neurons):
        inst = [b for b in neuron.branches if b.lag.tau == 0]
        lagged = [b for b in neuron.branches if b.lag.tau > 0]
        taus.add(0.0)
        pairs.append(LocalPair(
            neuron=k,
            lag=FirstOrderLag(0.0),
            pos=tuple(b.readout for b in inst if b.gain > 0),
            neg=tuple(b.readout for b in inst if b.gain < 0),
            shift=0.0,
            leak=neuron.leak,
            current=net.external_currents[k].samples,
            label=f"n{k}:ins",
        ))
        if shifts.grouping == "timescale":
            groups = {}
            for b in lagged:
                groups.setdefault(b.lag.tau, []).append(b)
            keyed = [(f"n{k}:tau{tau:g}", bs) for tau, bs in sorted(groups.items())]
        else:
            keyed = [
                (f"n{k}:b{neuron.branches.index(b)}", [b]) for b in lagged
            ]
        for label, bs in keyed:
            tau = bs[0].lag.tau
            taus.add(tau)
            pos = tuple(b.readout for b in bs if b.gain > 0)
            neg = tuple(b.readout for b in bs if b.gain < 0)
            if shifts.lam is not None:
                lam = shifts.lam
            elif any(b.shift > 0 for b in bs):
                lam = max(b.shift for b in bs)
            else:
                lam = _default_lagged_shift(pos, neg)
            pairs.append(LocalPair(k, FirstOrderLag(tau), pos, neg, lam, label=label))
    for k in range(net.n):
        incoming = [s for s in net.synapses if s.post == k]
        if not incoming:
            continue
        terms = tuple((s.pre, s.lag, s.readout) for s in incoming)
        lam = shifts.lam_syn
        if lam is None:
            lam = sum(s.readout.lipschitz for s in incoming)
        for s in incoming:
            taus.add(float(s.tau))
        pairs.append(SynapticPair(k, terms, lam, label=f"syn->n{k}"))
    return DmSplitting(
        grid=grid,
        capacitances=tuple(nr.capacitance for nr in net.neurons),
        pairs=tuple(pairs),
        n_timescales=len(taus),
        n_synapses=len(net.synapses),
        rest=_rest_or_none(net),
    )


def _rest_or_none(net):
    try:
        return static_equilibrium(net)
    except ConfigurationError:
        return None


def _sector(apply_fn, n, grid, rng, samples, scale):
    """Min and max of ``<dF, dx>/|dx|^2`` over random pairs."""
    lo, hi = np.inf, -np.inf
    for _ in range(samples):
        x1 = rng.normal(scale=scale, size=(n, grid.length))
        x2 = x1 + rng.normal(scale=scale, size=(n, grid.length))
        dx = x1 - x2
        df = apply_fn(x1) - apply_fn(x2)
        # only rows the operator touches count for local pairs
        q = float(np.vdot(dx, df) / np.vdot(dx, dx))
        lo, hi = min(lo, q), max(hi, q)
    return lo, hi


def validate_certificate(split: DmSplitting, cfg, samples: int = 20,
                         seed: int = 0, scale: float = 2.0) -> MonotonicityCertificate:
    """Empirical sector constants and contraction factors at step ``p*alpha``.

    The constants are sampled on random signal pairs, so they are local
    estimates. The certificate never blocks a run; it only records warnings.
    """
    alpha = float(getattr(cfg, "alpha", cfg))
    rng = np.random.default_rng(seed)
    grid, n = split.grid, split.n
    gamma_step = split.p * alpha
    rho, _ = _sector(split.apply_E, n, grid, rng, samples, scale)
    gam, beta, beta_hi = np.inf, np.inf, -np.inf
    rows, warnings = [], []
    for i, pr in enumerate(split.pairs):
        touched = _touched_rows(pr, n)

        def restrict(fn):
            def f(x):
                return fn(i, x)[touched]
            return f

        f_lo, _ = _sector_rows(restrict(split.apply_F), n, touched, grid, rng, samples, scale)
        g_lo, g_hi = _sector_rows(restrict(split.apply_G), n, touched, grid, rng, samples, scale)
        factor = pr.contraction_factor(gamma_step)
        ok = f_lo >= -1e-9 and g_lo >= -1e-9
        rows.append({
            "label": pr.label,
            "shift": pr.shift,
            "F_lower": f_lo,
            "G_lower": g_lo,
            "G_upper": g_hi,
            "contraction_factor": factor,
            "monotone": bool(ok),
        })
        if factor >= 1:
            warnings.append(f"{pr.label}: contraction factor {factor:.3f} >= 1")
        if not ok:
            warnings.append(f"{pr.label}: sampled monotonicity violated")
        gam, beta, beta_hi = min(gam, f_lo), min(beta, g_lo), max(beta_hi, g_hi)
    eps = 1.0 / (beta_hi - beta) if beta_hi > beta else np.inf
    theta = averagedness_theta(alpha, beta) if beta > 0 else 0.5
    admissible = bool(
        gam > beta + 1 + (2 / eps if np.isfinite(eps) else 0.0)
        and 0 < alpha <= (2 / beta**2 if beta > 0 else np.inf)
    )
    if not admissible:
        warnings.append("sampled sector constants do not meet the global step-size condition")
    return MonotonicityCertificate(
        rho=float(rho), gamma=float(gam), beta=float(beta), eps=float(eps),
        alpha=float(alpha), theta=float(theta), admissible=admissible,
        pairs=rows, warnings=warnings,
    )


def _touched_rows(pr, n):
    if isinstance(pr, LocalPair):
        return [pr.neuron]
    return list(range(n))


def _sector_rows(fn, n, touched, grid, rng, samples, scale):
    lo, hi = np.inf, -np.inf
    for _ in range(samples):
        x1 = rng.normal(scale=scale, size=(n, grid.length))
        x2 = x1 + rng.normal(scale=scale, size=(n, grid.length))
        dx = (x1 - x2)[touched]
        df = fn(x1) - fn(x2)
        q = float(np.vdot(dx, df) / np.vdot(dx, dx))
        lo, hi = min(lo, q), max(hi, q)
    return lo, hi


# --------------------------------------------------------------------------
# equilibria and thresholds


def _static_residual(net: NetworkSpec, v, i0):
    out = np.empty(net.n)
    jac = np.zeros((net.n, net.n))
    for k, nr in enumerate(net.neurons):
        out[k] = nr.leak * v[k] - i0[k]
        jac[k, k] = nr.leak
        for b in nr.branches:
            out[k] += b.readout(v[k])
            jac[k, k] += b.readout.derivative(v[k])
    for s in net.synapses:
        out[s.post] += s.readout(v[s.pre])
        jac[s.post, s.pre] += s.readout.derivative(v[s.pre])
    return out, jac


def _scalar_rest(nr: NeuronSpec, i0, lo=-50.0, hi=50.0):
    def f(v):
        return nr.leak * v + sum(float(b.readout(v)) for b in nr.branches) - i0

    xs = np.linspace(lo, hi, 4001)
    fx = np.array([f(x) for x in xs])
    idx = np.nonzero(np.sign(fx[:-1]) * np.sign(fx[1:]) <= 0)[0]
    if idx.size == 0:
        raise ConfigurationError("no static equilibrium found in [-50, 50]")
    a = idx[0]
    if fx[a] == 0:
        return float(xs[a])
    return float(optimize.brentq(f, xs[a], xs[a + 1], xtol=1e-14))


def static_equilibrium(net: NetworkSpec, currents=None) -> np.ndarray:
    """Constant voltages solving the network with ``D = 0`` and lags at unit DC gain.

    Explicit resting potentials seed the search; otherwise each neuron's
    lowest isolated root seeds it. The joint system is then polished.
    """
    i0 = net.baseline_currents() if currents is None else np.asarray(currents, float)
    seed = np.array([
        nr.resting_potential if nr.resting_potential is not None else _scalar_rest(nr, i0[k])
        for k, nr in enumerate(net.neurons)
    ], dtype=float)
    if not net.synapses and all(nr.resting_potential is None for nr in net.neurons):
        return seed
    sol = optimize.root(lambda v: _static_residual(net, v, i0), seed, jac=True,
                        method="hybr", tol=1e-13)
    if not sol.success or np.max(np.abs(sol.fun)) > 1e-9:
        raise ConfigurationError(f"static equilibrium solve failed: {sol.message}")
    return np.asarray(sol.x, dtype=float)


def spike_threshold(neuron: NeuronSpec, rest: float) -> float:
    """``rest + 0.5 * sum |gain|`` over the neuron's branches."""
    return float(rest + 0.5 * sum(abs(b.gain) for b in neuron.branches))


def network_spike_thresholds(net: NetworkSpec, rest=None) -> np.ndarray:
    rest = static_equilibrium(net) if rest is None else rest
    return np.array([spike_threshold(nr, rest[k]) for k, nr in enumerate(net.neurons)])
