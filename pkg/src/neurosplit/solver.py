"""Consensus difference-of-monotone Douglas-Rachford iteration and its drivers.

One outer step with ``gamma = p * alpha``::

    x    <- J_{alpha E}(mean z)
    z_i  <- z_i - x + J_{gamma F_i}(2x - z_i + gamma G_i(x))

At a fixed point ``E(x) + sum_i (F_i - G_i)(x) = 0``.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .circuit import DmSplitting, NetworkSpec, ShiftPolicy, split_network
from .errors import ConfigurationError, DivergenceError, InnerResolventError, NeurosplitError
from .operators import consensus_mean
from .signals import LiftedSignal, Signal, TimeGrid, resample

__all__ = [
    "SolverConfig",
    "SolverState",
    "Solution",
    "RefineResult",
    "initial_state",
    "dm_dr_step",
    "solve",
    "solve_network",
    "relative_change",
    "continuation_sweep",
    "coarse_to_fine",
    "template_refine",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Outer and inner iteration controls.

    ``fs`` and ``duration`` select the grid when solving a network; None keeps
    the network's own grid. ``workers > 1`` evaluates pair updates on a
    thread pool without changing any result bit.
    """

    alpha: float = 0.5
    fs: float | None = None
    duration: float | None = None
    max_iter: int = 1000
    epsilon_tol: float = 1e-6
    inner_tol: float = 1e-8
    inner_max: int = 200
    residual_check_every: int = 0
    divergence_factor: float = 1e6
    residual_threshold: float = 1e-3
    workers: int = 1
    checkpoints: tuple = ()

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if not (self.epsilon_tol > 0):
            raise ConfigurationError("epsilon_tol must be positive")
        if int(self.max_iter) < 1:
            raise ConfigurationError("max_iter must be >= 1")
        if self.inner_max < 1 or not (self.inner_tol > 0):
            raise ConfigurationError("inner_tol must be positive and inner_max >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        object.__setattr__(self, "checkpoints", tuple(sorted(int(c) for c in self.checkpoints)))

    def grid_for(self, net: NetworkSpec) -> TimeGrid:
        fs = self.fs if self.fs is not None else net.grid.fs
        dur = self.duration if self.duration is not None else net.grid.duration
        return TimeGrid(dur, fs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        return d


@dataclass(frozen=True, eq=False)
class SolverState:
    """Iterate ``x`` (n x g), consensus variables ``z`` (p x n x g) and history."""

    x: np.ndarray
    z: tuple
    z_bar: np.ndarray
    iter: int = 0
    history: tuple = ()
    warm: tuple = ()

    def lifted_x(self, grid: TimeGrid) -> LiftedSignal:
        return LiftedSignal.from_array(grid, self.x)


@dataclass(frozen=True, eq=False)
class Solution:
    voltages: tuple
    converged: bool
    iterations: int
    final_relative_change: float
    final_normalized_residual: float
    config: SolverConfig
    history: tuple = ()
    snapshots: dict = field(default_factory=dict)
    inner_iterations: int = 0
    runtime: float = 0.0
    state: SolverState | None = None

    @property
    def grid(self) -> TimeGrid:
        return self.voltages[0].grid

    def as_array(self) -> np.ndarray:
        return np.stack([v.samples for v in self.voltages])

    def lifted(self) -> LiftedSignal:
        return LiftedSignal(self.voltages)

    def summary(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "final_rel_change": float(self.final_relative_change),
            "final_residual": float(self.final_normalized_residual),
        }


@dataclass(frozen=True, eq=False)
class RefineResult:
    fine: Solution
    coarse: Solution


def relative_change(x_new, x_old) -> float:
    """``|x_new - x_old| / max(|x_old|, 1e-14)`` on arrays or lifted signals."""
    if isinstance(x_new, LiftedSignal):
        x_new = x_new.as_array()
    if isinstance(x_old, LiftedSignal):
        x_old = x_old.as_array()
    x_new, x_old = np.asarray(x_new, float), np.asarray(x_old, float)
    return float(np.linalg.norm(x_new - x_old) / max(np.linalg.norm(x_old), 1e-14))


def _init_array(split: DmSplitting, init):
    n, g = split.n, split.grid.length
    if init is None:
        rest = split.rest if getattr(split, "rest", None) is not None else np.zeros(n)
        return np.repeat(np.asarray(rest, float)[:, None], g, axis=1)
    if isinstance(init, LiftedSignal):
        split.grid.check_same(init.grid)
        init = init.as_array()
    elif isinstance(init, (list, tuple)) and init and isinstance(init[0], Signal):
        init = LiftedSignal(tuple(init))
        split.grid.check_same(init.grid)
        init = init.as_array()
    arr = np.array(init, dtype=float).reshape(n, g)
    return arr


def initial_state(split: DmSplitting, init=None, alpha: float | None = None) -> SolverState:
    """Seed ``x`` with ``init`` (default: lifted rest) and each ``z_i`` to match.

    With ``alpha`` given, ``z_i = x + gamma*(G_i - F_i)(x)``, which makes any
    zero of the splitting an exact fixed point of the step. Without it every
    ``z_i`` is a copy of ``x``.
    """
    x0 = _init_array(split, init)
    if alpha is None:
        z = tuple(x0.copy() for _ in range(split.p))
    else:
        gamma = split.p * alpha
        z = tuple(x0 + gamma * (pr.apply_G(x0, split.grid) - pr.apply_F(x0, split.grid))
                  for pr in split.pairs)
    return SolverState(x=x0, z=z, z_bar=consensus_mean(z), iter=0, history=(),
                       warm=tuple(None for _ in range(split.p)))


def _pair_update(split, i, x, z_i, warm_i, gamma, cfg):
    pr = split.pairs[i]
    w = 2.0 * x - z_i + gamma * pr.apply_G(x, split.grid)
    try:
        q, iters = pr.resolvent(gamma, w, split.grid, warm=warm_i,
                                inner_tol=cfg.inner_tol, inner_max=cfg.inner_max)
    except InnerResolventError as exc:
        raise InnerResolventError(f"{exc} [pair {i}]", residual=exc.residual) from None
    return z_i - x + q, q, iters


def dm_dr_step(state: SolverState, split: DmSplitting, cfg: SolverConfig,
               executor: ThreadPoolExecutor | None = None):
    """One outer iteration. Returns ``(new_state, rel_change, inner_iterations)``."""
    gamma = split.p * cfg.alpha
    x = split.resolvent_E(cfg.alpha, state.z_bar)
    args = [(split, i, x, state.z[i], state.warm[i], gamma, cfg) for i in range(split.p)]
    try:
        if executor is not None and split.p > 1:
            results = list(executor.map(lambda a: _pair_update(*a), args))
        else:
            results = [_pair_update(*a) for a in args]
    except InnerResolventError as exc:
        raise InnerResolventError(f"iteration {state.iter + 1}: {exc}", exc.residual) from None
    z = tuple(r[0] for r in results)
    warm = tuple(r[1] for r in results)
    inner = sum(r[2] for r in results)
    rc = relative_change(x, state.x)
    new = SolverState(x=x, z=z, z_bar=consensus_mean(z), iter=state.iter + 1,
                      history=state.history, warm=warm)
    return new, rc, inner


def solve(split: DmSplitting, cfg: SolverConfig, init=None, callback=None) -> Solution:
    """Iterate until the relative change drops to ``epsilon_tol`` or ``max_iter``.

    Parameters
    ----------
    init : LiftedSignal or array, optional
        Seeds ``x`` and all ``z_i``.
    callback : callable, optional
        ``callback(iter, x, rel_change)`` after every step.
    """
    t0 = time.perf_counter()
    state = initial_state(split, init, cfg.alpha)
    x0_norm = max(float(np.linalg.norm(state.x)), 1.0)
    history = []
    snapshots = {}
    inner_total = 0
    rc = np.inf
    cps = set(cfg.checkpoints)
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for k in range(1, int(cfg.max_iter) + 1):
            state, rc, inner = dm_dr_step(state, split, cfg, pool)
            inner_total += inner
            rec = {"iter": k, "rel_change": rc}
            if cfg.residual_check_every and k % cfg.residual_check_every == 0:
                rec["residual"] = _normalized_residual(split, state.x)
            history.append(rec)
            if k in cps:
                snapshots[k] = state.x.copy()
            if callback is not None:
                callback(k, state.x, rc)
            xn = float(np.linalg.norm(state.x))
            if not np.isfinite(xn) or not np.isfinite(rc) or xn > cfg.divergence_factor * x0_norm:
                raise DivergenceError(
                    f"iterate norm {xn:.3e} exceeded {cfg.divergence_factor:g} x initial "
                    f"at iteration {k}; try a smaller alpha"
                )
            if k % 500 == 0:
                log.debug("iter %d rel_change %.3e", k, rc)
            # x^1 = J(mean z^0) reflects only the initial guess
            if k >= 2 and rc <= cfg.epsilon_tol:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    converged = bool(state.iter >= 2 and rc <= cfg.epsilon_tol)
    res = _normalized_residual(split, state.x)
    if history and "residual" not in history[-1]:
        history[-1]["residual"] = res
    state = replace(state, history=tuple(history))
    grid = split.grid
    return Solution(
        voltages=tuple(Signal(grid, row) for row in state.x),
        converged=converged,
        iterations=state.iter,
        final_relative_change=float(rc),
        final_normalized_residual=res,
        config=cfg,
        history=tuple(history),
        snapshots=snapshots,
        inner_iterations=inner_total,
        runtime=time.perf_counter() - t0,
        state=state,
    )


def _normalized_residual(split, x):
    r = split.total(x)
    return float(np.linalg.norm(r) / r.size)


def solve_network(net: NetworkSpec, cfg: SolverConfig, shifts: ShiftPolicy | None = None,
                  init=None, callback=None) -> Solution:
    """Split ``net`` on the grid selected by ``cfg`` and solve it."""
    net = net.on_grid(cfg.grid_for(net))
    split = split_network(net, shifts)
    if init is not None:
        init = _to_grid(init, split.grid)
    return solve(split, cfg, init, callback)


def _to_grid(init, grid: TimeGrid):
    if isinstance(init, Solution):
        init = init.lifted()
    if isinstance(init, (list, tuple)):
        init = LiftedSignal(tuple(init))
    if isinstance(init, LiftedSignal):
        if init.grid != grid:
            init = LiftedSignal(tuple(resample(s, grid) for s in init.parts))
        return init
    return init


def _retag(exc: NeurosplitError, note: str) -> NeurosplitError:
    if isinstance(exc, InnerResolventError):
        return type(exc)(f"{note}: {exc}", exc.residual)
    return type(exc)(f"{note}: {exc}")


def continuation_sweep(net: NetworkSpec, param_path, cfg: SolverConfig,
                       shifts: ShiftPolicy | None = None, init=None,
                       predictor: str = "secant") -> list:
    """Solve along a parameter path, warm-starting each point from the previous.

    ``param_path`` is a list whose entries are ``(ref, value)`` or lists of
    such pairs applied together at that step. With ``predictor="secant"`` the
    warm start from the third point on is the linear extrapolation
    ``2 x_k - x_{k-1}``; ``"constant"`` reuses ``x_k`` unchanged.
    """
    if predictor not in ("constant", "secant"):
        raise ConfigurationError(f"unknown predictor {predictor!r}")
    out = []
    prev = init
    for step in param_path:
        updates = [step] if isinstance(step[0], str) else list(step)
        cur = net
        for ref, value in updates:
            cur = cur.with_parameter(ref, value)
        try:
            sol = solve_network(cur, cfg, shifts, init=prev)
        except NeurosplitError as exc:
            raise _retag(exc, f"sweep at {updates}") from exc
        if not sol.converged:
            log.warning("sweep point %s did not converge", updates)
        out.append(sol)
        if predictor == "secant" and len(out) >= 2:
            a, b = out[-2].as_array(), out[-1].as_array()
            prev = LiftedSignal.from_array(sol.grid, 2.0 * b - a)
        else:
            prev = sol
    return out


def coarse_to_fine(net: NetworkSpec, coarse_cfg: SolverConfig, fine_cfg: SolverConfig,
                   shifts: ShiftPolicy | None = None, init=None) -> RefineResult:
    """Solve on a coarse grid and warm start the fine solve from its resampling."""
    cg, fg = coarse_cfg.grid_for(net), fine_cfg.grid_for(net)
    if not np.isclose(cg.duration, fg.duration):
        raise ConfigurationError("coarse and fine grids need the same duration")
    if cg.fs > fg.fs:
        raise ConfigurationError("coarse fs must not exceed fine fs")
    try:
        coarse = solve_network(net, coarse_cfg, shifts, init=init)
    except NeurosplitError as exc:
        raise _retag(exc, "coarse") from exc
    try:
        fine = solve_network(net, fine_cfg, shifts, init=coarse)
    except NeurosplitError as exc:
        raise _retag(exc, "fine") from exc
    return RefineResult(fine=fine, coarse=coarse)


def template_refine(coarse: Solution, template: Signal, events, baseline=None) -> LiftedSignal:
    """Initial guess built by pasting an event template over a flat baseline.

    Parameters
    ----------
    coarse : Solution
        Supplies the duration, neuron count and (by default) the baseline,
        taken as each trace's first sample.
    template : Signal
        Single-event trace sampled at the target rate; its first sample is
        its own baseline and its centre is aligned with each event time.
    events : list
        Event times per neuron (list of lists), or a flat list for one neuron.
    """
    n = len(coarse.voltages)
    if events and not isinstance(events[0], (list, tuple, np.ndarray)):
        events = [list(events)] + [[] for _ in range(n - 1)]
    events = list(events) + [[] for _ in range(n - len(events))]
    grid = TimeGrid(coarse.grid.duration, template.grid.fs)
    g, m = grid.length, template.grid.length
    if m > g:
        raise ConfigurationError("template is longer than the simulation window")
    base = (np.array([v.samples[0] for v in coarse.voltages]) if baseline is None
            else np.asarray(baseline, float) * np.ones(n))
    shape = template.samples - template.samples[0]
    out = np.repeat(base[:, None], g, axis=1)
    for k in range(n):
        used = np.zeros(g, dtype=bool)
        for t0 in sorted(events[k]):
            if not 0 <= t0 <= grid.duration:
                raise ConfigurationError(f"event at {t0} ms outside the window")
            start = int(round(t0 * grid.fs)) - m // 2
            idx = np.arange(start, start + m) % g
            if used[idx].any():
                raise ConfigurationError(f"template placements overlap near t={t0} ms")
            used[idx] = True
            out[k, idx] += shape
    return LiftedSignal.from_array(grid, out)
