"""Spectral LTI operators, conductance branches and their resolvents.

LTI operators act by multiplying ``rfft`` coefficients with a symbol that is a
function of ``j*omega``; nonlinear readouts act pointwise in time. Every
operator here is immutable and exposes an array kernel (``*_array`` methods,
operating on the last axis) used by the solver, plus Signal-level wrappers.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InnerResolventError
from .signals import LiftedSignal, Signal, TimeGrid, _rfft_omega

__all__ = [
    "FirstOrderLag",
    "CapacitiveDifferentiator",
    "NonlinearReadout",
    "ConductanceBranch",
    "AffineOperator",
    "MonotonicityCertificate",
    "apply_lag",
    "apply_derivative",
    "resolvent_lti",
    "apply_branch",
    "branch_contraction_factor",
    "resolvent_branch",
    "fixed_point_resolvent",
    "reflected_resolvent",
    "project_consensus",
    "resolvent_consensus_sum",
    "consensus_mean",
    "averagedness_theta",
]

_ZERO_GUARD = 1e-14


def spectral_multiply(u: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Apply an ``rfft``-domain symbol along the last axis."""
    g = u.shape[-1]
    return np.fft.irfft(np.fft.rfft(u, axis=-1) * symbol, n=g, axis=-1)


@functools.lru_cache(maxsize=256)
def _lag_symbol(tau: float, g: int, dt: float) -> np.ndarray:
    s = 1.0 / (1.0 + tau * 1j * _omega(g, dt))
    s.setflags(write=False)
    return s


@functools.lru_cache(maxsize=256)
def _lti_symbol(scale: float, g: int, dt: float) -> np.ndarray:
    s = 1.0 / (1.0 + scale * 1j * _omega(g, dt))
    s.setflags(write=False)
    return s


def _omega(g, dt):
    return _rfft_omega(g, dt)


@dataclass(frozen=True)
class FirstOrderLag:
    """The filter ``(tau*D + Id)^-1``; ``tau = 0`` is the identity."""

    tau: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau >= 0):
            raise ConfigurationError(f"lag time constant must be >= 0, got {self.tau}")

    def symbol(self, grid: TimeGrid) -> np.ndarray:
        return _lag_symbol(float(self.tau), grid.length, grid.dt)

    def apply_array(self, u: np.ndarray, grid: TimeGrid) -> np.ndarray:
        if self.tau == 0:
            return np.array(u, dtype=float, copy=True)
        return spectral_multiply(u, self.symbol(grid))


@dataclass(frozen=True)
class CapacitiveDifferentiator:
    """``C*D`` with frequency response ``C*j*omega``."""

    capacitance: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.capacitance) and self.capacitance > 0):
            raise ConfigurationError(
                f"capacitance must be positive, got {self.capacitance}"
            )

    def apply_array(self, u, grid: TimeGrid):
        return spectral_multiply(u, self.capacitance * 1j * grid.omega)

    def resolvent_array(self, alpha: float, w, grid: TimeGrid):
        if alpha <= 0:
            raise ConfigurationError(f"alpha must be positive, got {alpha}")
        return spectral_multiply(
            w, _lti_symbol(float(alpha * self.capacitance), grid.length, grid.dt)
        )


@dataclass(frozen=True)
class NonlinearReadout:
    """``gain * f(slope * (u - offset))`` with ``f`` tanh or the logistic sigmoid."""

    kind: str = "tanh"
    gain: float = 1.0
    offset: float = 0.0
    slope: float = 1.0

    def __post_init__(self):
        if self.kind not in ("tanh", "sigmoid"):
            raise ConfigurationError(f"unknown readout kind {self.kind!r}")
        if not (np.isfinite(self.slope) and self.slope > 0):
            raise ConfigurationError(f"readout slope must be positive, got {self.slope}")
        if not (np.isfinite(self.gain) and np.isfinite(self.offset)):
            raise ConfigurationError("readout gain and offset must be finite")

    def _f(self, a):
        if self.kind == "tanh":
            return np.tanh(a)
        return 0.5 * (1.0 + np.tanh(0.5 * a))

    def _df(self, a):
        if self.kind == "tanh":
            return 1.0 / np.cosh(np.clip(a, -350, 350)) ** 2
        return 0.25 / np.cosh(np.clip(0.5 * a, -350, 350)) ** 2

    def __call__(self, u):
        return self.gain * self._f(self.slope * (np.asarray(u) - self.offset))

    def derivative(self, u):
        return self.gain * self.slope * self._df(self.slope * (np.asarray(u) - self.offset))

    @property
    def lipschitz(self) -> float:
        peak = 1.0 if self.kind == "tanh" else 0.25
        return abs(self.gain) * self.slope * peak

    def negated(self) -> "NonlinearReadout":
        return NonlinearReadout(self.kind, -self.gain, self.offset, self.slope)


@dataclass(frozen=True)
class ConductanceBranch:
    """``w -> readout(lag(w)) + shift * w``.

    ``label`` is a free-form timescale tag (``ins``, ``f``, ``s``, ``us``).
    """

    lag: FirstOrderLag
    readout: NonlinearReadout
    shift: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.shift) and self.shift >= 0):
            raise ConfigurationError(f"branch shift must be >= 0, got {self.shift}")

    @property
    def gain(self) -> float:
        return self.readout.gain

    def apply_array(self, u, grid: TimeGrid):
        return self.readout(self.lag.apply_array(u, grid)) + self.shift * u

    def contraction_factor(self, gamma_step: float) -> float:
        return abs(gamma_step) * self.readout.lipschitz / (1.0 + self.shift * gamma_step)


@dataclass
class MonotonicityCertificate:
    """Empirical sector constants of a splitting and the derived step-size checks.

    ``rho`` bounds E from below, ``gamma`` bounds every F_i from below, ``beta``
    and ``eps`` bracket the G_i as ``beta <= <dG, dx>/|dx|^2 <= beta + 1/eps``.
    """

    rho: float
    gamma: float
    beta: float
    eps: float
    alpha: float
    theta: float
    admissible: bool
    pairs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def step_ok(self) -> bool:
        return 0 < self.alpha <= (2.0 / self.beta**2 if self.beta > 0 else np.inf)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "gamma": self.gamma,
            "beta": self.beta,
            "eps": self.eps,
            "alpha": self.alpha,
            "theta": self.theta,
            "admissible": self.admissible,
            "pairs": self.pairs,
            "warnings": self.warnings,
        }


def averagedness_theta(alpha: float, beta: float) -> float:
    """``2 / (4 - alpha*beta^2)``; inside (0, 1] whenever ``alpha <= 2/beta^2``."""
    return 2.0 / (4.0 - alpha * beta**2)


@dataclass(frozen=True, eq=False)
class AffineOperator:
    """``x -> M x + b`` on flat vectors; monotone when ``M + M^T`` is PSD."""

    matrix: np.ndarray
    offset: np.ndarray = None

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", m)
        b = np.zeros(m.shape[0]) if self.offset is None else np.asarray(self.offset, float)
        object.__setattr__(self, "offset", b)

    @classmethod
    def diagonal(cls, diag, offset=None):
        return cls(np.diag(np.asarray(diag, dtype=float)), offset)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, n)))

    def apply(self, x):
        return self.matrix @ x + self.offset

    def resolvent(self, alpha, w):
        n = self.matrix.shape[0]
        return np.linalg.solve(np.eye(n) + alpha * self.matrix, w - alpha * self.offset)


def apply_lag(lag: FirstOrderLag, u: Signal) -> Signal:
    return Signal(u.grid, lag.apply_array(u.samples, u.grid))


def apply_derivative(d: CapacitiveDifferentiator, u: Signal) -> Signal:
    return Signal(u.grid, d.apply_array(u.samples, u.grid))


def resolvent_lti(d: CapacitiveDifferentiator, alpha: float, w: Signal) -> Signal:
    """Solve ``q + alpha*C*Dq = w`` by spectral division."""
    return Signal(w.grid, d.resolvent_array(alpha, w.samples, w.grid))


def apply_branch(b: ConductanceBranch, u: Signal) -> Signal:
    return Signal(u.grid, b.apply_array(u.samples, u.grid))


def branch_contraction_factor(b: ConductanceBranch, gamma_step: float) -> float:
    """Contraction factor of the inner fixed-point map at step ``gamma_step``.

    Equals ``|gamma*gain| / (1 + shift*gamma)`` for unit-slope tanh readouts and
    uses the readout Lipschitz constant in general.
    """
    if gamma_step <= 0:
        raise ConfigurationError(f"gamma_step must be positive, got {gamma_step}")
    return b.contraction_factor(gamma_step)


def fixed_point_resolvent(
    w,
    nonlinear,
    gamma,
    denom,
    inner_tol=1e-8,
    inner_max=200,
    warm=None,
    ref_norm=None,
    label="branch",
):
    """Solve ``denom*q + gamma*nonlinear(q) = w`` by fixed-point iteration.

    Parameters
    ----------
    w : ndarray
        Right-hand side (already including any constant offsets).
    nonlinear : callable
        ``q -> N(q)``; the map is contractive when ``gamma*Lip(N) < denom``.
    gamma, denom : float
        Step and ``1 + gamma*(linear part)``.
    ref_norm : float, optional
        Norm the residual is measured relative to. Defaults to ``|w|``.

    Returns
    -------
    q : ndarray
    iterations : int
    residual : float
        Relative residual of the iterate preceding ``q``; the returned iterate
        is at least as accurate because the map is a contraction.
    """
    nw = np.linalg.norm(w) if ref_norm is None else ref_norm
    scale = nw if nw >= _ZERO_GUARD else 1.0
    q = w / denom if warm is None else np.array(warm, dtype=float, copy=True)
    res = np.inf
    for it in range(1, inner_max + 1):
        q_next = (w - gamma * nonlinear(q)) / denom
        res = denom * np.linalg.norm(q_next - q) / scale
        q = q_next
        if res <= inner_tol:
            return q, it, res
    raise InnerResolventError(
        f"{label}: inner resolvent did not reach {inner_tol:g} in {inner_max} "
        f"iterations (last residual {res:.3e})",
        residual=res,
    )


def resolvent_branch(
    b: ConductanceBranch,
    gamma_step: float,
    w: Signal,
    warm: Signal | None = None,
    inner_tol: float = 1e-8,
    inner_max: int = 200,
) -> Signal:
    """Solve ``q + gamma*b(q) = w`` for a single conductance branch."""
    factor = branch_contraction_factor(b, gamma_step)
    if factor >= 1:
        raise ConfigurationError(
            f"branch {b.label or b.readout} is not contractive at step "
            f"{gamma_step:g} (factor {factor:.3f} >= 1); increase its shift"
        )
    grid = w.grid
    if warm is not None:
        grid.check_same(warm.grid)

    def nl(q):
        return b.readout(b.lag.apply_array(q, grid))

    q, _, _ = fixed_point_resolvent(
        w.samples,
        nl,
        gamma_step,
        1.0 + b.shift * gamma_step,
        inner_tol,
        inner_max,
        None if warm is None else warm.samples,
        label=f"branch {b.label}".strip(),
    )
    return Signal(grid, q)


def reflected_resolvent(op, alpha, w):
    """``2*J(w) - w`` for any object with ``resolvent(alpha, w)``.

    Accepts flat arrays or Signals.
    """
    if isinstance(w, Signal):
        q = np.asarray(op.resolvent(alpha, w.samples))
        return Signal(w.grid, 2.0 * q - w.samples)
    w = np.asarray(w, dtype=float)
    return 2.0 * np.asarray(op.resolvent(alpha, w)) - w


def consensus_mean(parts):
    """Mean with a fixed left-to-right summation order.

    Accumulates deviations from the first part so that equal parts are
    returned bit for bit.
    """
    base = np.asarray(parts[0], dtype=float)
    acc = np.zeros_like(base)
    for p in parts[1:]:
        acc += p - base
    return base + acc / len(parts)


def project_consensus(z: LiftedSignal) -> LiftedSignal:
    m = consensus_mean([p.samples for p in z.parts])
    return LiftedSignal(tuple(Signal(z.grid, m) for _ in z.parts))


def resolvent_consensus_sum(op, alpha, z: LiftedSignal) -> LiftedSignal:
    """``J_{alpha(A + N_C)}(z) = J_{alpha A}(P_C z)`` replicated to every part."""
    m = consensus_mean([p.samples for p in z.parts])
    q = np.asarray(op.resolvent(alpha, m), dtype=float)
    return LiftedSignal(tuple(Signal(z.grid, q) for _ in z.parts))
