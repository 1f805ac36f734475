import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bisect, branch_resolvent_newton, periodic_diff_matrix
from neurosplit.errors import ConfigurationError, InnerResolventError
from neurosplit.operators import (
    AffineOperator,
    CapacitiveDifferentiator,
    ConductanceBranch,
    FirstOrderLag,
    NonlinearReadout,
    apply_branch,
    apply_derivative,
    apply_lag,
    averagedness_theta,
    branch_contraction_factor,
    project_consensus,
    reflected_resolvent,
    resolvent_branch,
    resolvent_consensus_sum,
    resolvent_lti,
)
from neurosplit.signals import LiftedSignal, Signal, TimeGrid, inner_product, l2_norm


def _branch(tau=50.0, gain=2.0, offset=0.0, shift=0.0, kind="tanh", slope=1.0):
    return ConductanceBranch(FirstOrderLag(tau), NonlinearReadout(kind, gain, offset, slope), shift)


def test_lag_constant_and_identity():
    g = TimeGrid(100, 1)
    c = Signal.constant(g, 1.3)
    assert np.allclose(apply_lag(FirstOrderLag(40.0), c).samples, 1.3)
    u = Signal(g, np.random.default_rng(0).normal(size=100))
    assert np.array_equal(apply_lag(FirstOrderLag(0.0), u).samples, u.samples)


def test_lag_single_mode_gain_and_phase():
    g = TimeGrid(200.0, 1.0)
    tau, k = 20.0, 5
    w = 2 * np.pi * k / 200.0
    u = Signal.from_function(g, lambda t: np.sin(w * t))
    y = apply_lag(FirstOrderLag(tau), u).samples
    amp = 1 / np.sqrt(1 + (tau * w) ** 2)
    phase = -np.arctan(tau * w)
    assert np.allclose(y, amp * np.sin(w * g.times + phase), atol=1e-9)


def test_derivative_examples():
    g = TimeGrid(100.0, 2.0)
    assert np.allclose(apply_derivative(CapacitiveDifferentiator(), Signal.constant(g, 4.0)).samples, 0)
    w = 2 * np.pi * 3 / 100.0
    d = apply_derivative(CapacitiveDifferentiator(1.0), Signal.from_function(g, lambda t: np.sin(w * t)))
    assert np.allclose(d.samples, w * np.cos(w * g.times), atol=1e-8)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20)
def test_derivative_linear(seed):
    rng = np.random.default_rng(seed)
    g = TimeGrid(30, 1)
    D = CapacitiveDifferentiator(1.7)
    x, y = rng.normal(size=30), rng.normal(size=30)
    a = rng.normal()
    lhs = D.apply_array(a * x + y, g)
    rhs = a * D.apply_array(x, g) + D.apply_array(y, g)
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(lhs).max()))


def test_derivative_matches_dense_matrix():
    g = TimeGrid(8, 2)
    rng = np.random.default_rng(3)
    u = rng.normal(size=16)
    D = periodic_diff_matrix(16, g.dt)
    assert np.allclose(CapacitiveDifferentiator().apply_array(u, g), D @ u, atol=1e-10)


def test_resolvent_lti_examples():
    g = TimeGrid(16, 2)
    d = CapacitiveDifferentiator(1.5)
    assert np.allclose(resolvent_lti(d, 0.3, Signal.constant(g, 0)).samples, 0)
    assert np.allclose(resolvent_lti(d, 0.3, Signal.constant(g, 2.0)).samples, 2.0)


@pytest.mark.parametrize("k", [1, 3, 7])
def test_resolvent_lti_dense_solve(k):
    g = TimeGrid(8, 2)
    C, alpha = 1.5, 0.7
    w = np.cos(2 * np.pi * k * g.times / g.duration) + 0.5 * np.sin(2 * np.pi * k * g.times / g.duration)
    dense = np.linalg.solve(np.eye(16) + alpha * C * periodic_diff_matrix(16, g.dt), w)
    q = resolvent_lti(CapacitiveDifferentiator(C), alpha, Signal(g, w)).samples
    assert np.allclose(q, dense, atol=1e-9)
    # and the single-mode scaling
    om = 2 * np.pi * k / g.duration
    z = 1 / (1 + alpha * C * 1j * om)
    mode = np.exp(1j * om * g.times)
    d = CapacitiveDifferentiator(C)
    out = d.resolvent_array(alpha, mode.real, g) + 1j * d.resolvent_array(alpha, mode.imag, g)
    assert np.allclose(out, z * mode, atol=1e-9)


def test_apply_branch_examples():
    g = TimeGrid(20, 1)
    assert np.allclose(apply_branch(_branch(), Signal.constant(g, 0)).samples, 0)
    b = _branch(tau=0.0, gain=2.0)
    assert np.allclose(apply_branch(b, Signal.constant(g, 10.0)).samples, 2 * np.tanh(10), atol=1e-6)
    u = Signal(g, np.random.default_rng(1).normal(size=20))
    b = _branch(tau=5.0, gain=-1.3, offset=0.4, shift=0.7)
    manual = -1.3 * np.tanh(apply_lag(FirstOrderLag(5.0), u).samples - 0.4) + 0.7 * u.samples
    assert np.allclose(apply_branch(b, u).samples, manual, atol=1e-12)


def test_contraction_factor_examples():
    assert branch_contraction_factor(_branch(gain=2, shift=4), 0.5) == pytest.approx(1 / 3)
    assert branch_contraction_factor(_branch(gain=1, shift=0), 0.5) == pytest.approx(0.5)
    assert branch_contraction_factor(_branch(gain=0, shift=3), 2.0) == 0.0


def test_sigmoid_readout_properties():
    r = NonlinearReadout("sigmoid", 0.8, 1.0, 2.0)
    assert r(1.0) == pytest.approx(0.4)
    assert r(-1e3) == pytest.approx(0.0, abs=1e-12)
    assert r.lipschitz == pytest.approx(0.8 * 2 / 4)
    x = np.linspace(-5, 5, 101)
    assert np.all(np.diff(r(x)) >= 0)
    num = (r(x + 1e-6) - r(x - 1e-6)) / 2e-6
    assert np.allclose(r.derivative(x), num, atol=1e-6)


def test_resolvent_branch_zero_input():
    g = TimeGrid(32, 1)
    q = resolvent_branch(_branch(shift=4), 0.5, Signal.constant(g, 0.0))
    assert np.allclose(q.samples, 0)


def test_static_branch_matches_bisection():
    g = TimeGrid(40, 1)
    rng = np.random.default_rng(5)
    w = rng.normal(scale=3, size=40)
    gain, off, lam, gam = 1.7, 0.3, 0.5, 0.4
    b = _branch(tau=0.0, gain=gain, offset=off, shift=lam)
    q = resolvent_branch(b, gam, Signal(g, w), inner_tol=1e-13, inner_max=500).samples
    for k in range(40):
        ref = bisect(lambda s: s + gam * (gain * np.tanh(s - off) + lam * s) - w[k], -50, 50)
        assert q[k] == pytest.approx(ref, abs=1e-8)


def test_dynamic_branch_matches_dense_newton():
    g = TimeGrid(64.0, 1.0)
    rng = np.random.default_rng(7)
    w = rng.normal(scale=2, size=64)
    b = _branch(tau=6.0, gain=2.0, offset=-0.2, shift=4.0)
    q = resolvent_branch(b, 0.5, Signal(g, w), inner_tol=1e-12, inner_max=500).samples
    ref = branch_resolvent_newton(b.readout, 6.0, 4.0, 0.5, w, g.dt)
    assert np.linalg.norm(q - ref) / np.linalg.norm(ref) < 1e-6


def test_resolvent_branch_refuses_noncontractive():
    g = TimeGrid(16, 1)
    with pytest.raises(ConfigurationError, match="not contractive"):
        resolvent_branch(_branch(gain=2.0, shift=0.0), 2.0, Signal.constant(g, 1.0))


def test_resolvent_branch_inner_budget():
    g = TimeGrid(16, 1)
    w = Signal(g, np.linspace(-3, 3, 16))
    with pytest.raises(InnerResolventError) as info:
        resolvent_branch(_branch(gain=2.0, shift=0.1), 0.45, w, inner_tol=1e-14, inner_max=2)
    assert info.value.residual > 1e-14


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_resolvent_branch_residual_bound(seed):
    rng = np.random.default_rng(seed)
    g = TimeGrid(48, 1)
    gain = rng.uniform(-3, 3)
    b = _branch(tau=rng.uniform(0, 20), gain=gain, offset=rng.normal(), shift=abs(gain))
    gam = rng.uniform(0.05, 2.0)
    w = Signal(g, rng.normal(scale=3, size=48))
    q = resolvent_branch(b, gam, w, inner_tol=1e-8)
    r = q.samples + gam * apply_branch(b, q).samples - w.samples
    assert np.linalg.norm(r) / np.linalg.norm(w.samples) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_shifted_branch_monotone(seed):
    rng = np.random.default_rng(seed)
    g = TimeGrid(64, 1)
    gain = rng.uniform(-4, 4)
    b = _branch(tau=rng.choice([0.0, 5.0, 50.0]), gain=gain, offset=rng.normal(), shift=abs(gain))
    for _ in range(20):
        u1 = Signal(g, rng.normal(scale=3, size=64))
        u2 = Signal(g, rng.normal(scale=3, size=64))
        du = Signal(g, u1.samples - u2.samples)
        db = Signal(g, apply_branch(b, u1).samples - apply_branch(b, u2).samples)
        assert inner_product(du, db) >= -1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_branch_resolvent_firmly_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    g = TimeGrid(32, 1)
    gain = rng.uniform(-3, 3)
    b = _branch(tau=rng.uniform(0, 10), gain=gain, shift=abs(gain))
    gam = rng.uniform(0.1, 1.0)
    w1, w2 = (Signal(g, rng.normal(scale=2, size=32)) for _ in range(2))
    q1 = resolvent_branch(b, gam, w1, inner_tol=1e-12, inner_max=1000)
    q2 = resolvent_branch(b, gam, w2, inner_tol=1e-12, inner_max=1000)
    dq = Signal(g, q1.samples - q2.samples)
    dw = Signal(g, w1.samples - w2.samples)
    assert l2_norm(dq) <= l2_norm(dw) * (1 + 1e-9)
    assert l2_norm(dq) ** 2 <= inner_product(dq, dw) + 1e-9


def test_reflected_resolvent_examples():
    w = np.array([1.0, -2.0, 3.0])
    assert np.allclose(reflected_resolvent(AffineOperator.zero(3), 0.7, w), w)
    assert np.allclose(reflected_resolvent(AffineOperator(np.eye(3)), 1.0, w), 0)


def test_reflected_resolvent_nonexpansive():
    rng = np.random.default_rng(11)
    n = 6
    S = rng.normal(size=(n, n))
    M = S @ S.T * 0.1 + (S - S.T)
    op = AffineOperator(M, rng.normal(size=n))
    for _ in range(100):
        a, b = rng.normal(size=n), rng.normal(size=n)
        ra, rb = reflected_resolvent(op, 0.8, a), reflected_resolvent(op, 0.8, b)
        assert np.linalg.norm(ra - rb) <= np.linalg.norm(a - b) * (1 + 1e-12)


def test_project_consensus_examples():
    g = TimeGrid(4, 1)
    z = LiftedSignal((Signal.constant(g, 0), Signal.constant(g, 2)))
    pz = project_consensus(z)
    assert all(np.allclose(p.samples, 1) for p in pz.parts)
    same = LiftedSignal((Signal.constant(g, 3),) * 3)
    assert all(np.array_equal(p.samples, q.samples) for p, q in zip(project_consensus(same).parts, same.parts))


@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_project_consensus_idempotent(seed, p):
    rng = np.random.default_rng(seed)
    g = TimeGrid(8, 1)
    z = LiftedSignal.from_array(g, rng.normal(size=(p, 8)))
    once = project_consensus(z)
    twice = project_consensus(once)
    assert np.array_equal(once.as_array(), twice.as_array())


def test_resolvent_consensus_sum_examples():
    rng = np.random.default_rng(2)
    g = TimeGrid(6, 1)
    z = LiftedSignal.from_array(g, rng.normal(size=(3, 6)))
    out = resolvent_consensus_sum(AffineOperator.zero(6), 0.4, z)
    assert np.allclose(out.as_array(), project_consensus(z).as_array())
    A = AffineOperator.diagonal(rng.uniform(0, 2, 6), rng.normal(size=6))
    c = LiftedSignal((z[0],) * 3)
    out = resolvent_consensus_sum(A, 0.4, c)
    assert np.allclose(out[1].samples, A.resolvent(0.4, z[0].samples))


def test_theta_range():
    assert averagedness_theta(0.0, 1.0) == pytest.approx(0.5)
    assert averagedness_theta(2.0, 1.0) == pytest.approx(1.0)
