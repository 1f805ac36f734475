import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import random_network
from oracles import bisect, periodic_diff_matrix
from neurosplit.circuit import (
    NetworkSpec,
    NeuronSpec,
    ShiftPolicy,
    SynapseSpec,
    apply_neuron,
    network_spike_thresholds,
    residual,
    residual_array,
    split_network,
    static_equilibrium,
    validate_certificate,
)
from neurosplit.config import network_from_dict
from neurosplit.errors import ConfigurationError, DimensionError
from neurosplit.models import bursting_network, hco_network, spiking_network
from neurosplit.operators import ConductanceBranch, FirstOrderLag, NonlinearReadout
from neurosplit.signals import LiftedSignal, Signal, TimeGrid


def _neuron(*gains_taus, leak=1.0, C=1.0):
    bs = [ConductanceBranch(FirstOrderLag(t), NonlinearReadout("tanh", a)) for a, t in gains_taus]
    return NeuronSpec(tuple(bs), capacitance=C, leak=leak)


def _net(neurons, synapses=(), grid=None, currents=None):
    grid = grid or TimeGrid(16.0, 1.0)
    currents = currents or [0.0] * len(neurons)
    cur = tuple(Signal.constant(grid, c) if np.isscalar(c) else Signal(grid, c) for c in currents)
    return NetworkSpec(tuple(neurons), tuple(synapses), cur)


def test_apply_neuron_constant_input():
    nr = _neuron((-2.0, 0.0), (2.0, 50.0))
    g = TimeGrid(64, 1)
    out = apply_neuron(nr, Signal.constant(g, 0.7)).samples
    assert np.allclose(out, 0.7 - 2 * np.tanh(0.7) + 2 * np.tanh(0.7), atol=1e-12)


def test_apply_neuron_matches_dense_operators():
    g = TimeGrid(16, 1)
    nr = _neuron((-2.0, 0.0), (1.5, 4.0), leak=0.5, C=1.3)
    v = np.random.default_rng(0).normal(size=16)
    D = periodic_diff_matrix(16, g.dt)
    L = np.linalg.inv(np.eye(16) + 4.0 * D)
    ref = 1.3 * D @ v + 0.5 * v - 2 * np.tanh(v) + 1.5 * np.tanh(L @ v)
    assert np.allclose(apply_neuron(nr, Signal(g, v)).samples, ref, atol=1e-10)


def test_residual_zero_network():
    net = _net([_neuron((0.0, 0.0), leak=0.0)])
    r, nrm = residual(net, LiftedSignal((Signal.constant(net.grid, 0.0),)))
    assert nrm == 0.0
    assert np.all(r.as_array() == 0)


def test_residual_dimension_check():
    net = _net([_neuron((1.0, 0.0)), _neuron((1.0, 0.0))])
    with pytest.raises(DimensionError):
        residual(net, LiftedSignal((Signal.constant(net.grid, 0.0),)))


def test_residual_noise_monotone_on_spiking_solution():
    from neurosplit.solver import SolverConfig, solve_network

    net = spiking_network(fs=2.0, duration=400.0, t_on=100.0)
    sol = solve_network(net, SolverConfig(alpha=0.5), ShiftPolicy(lam=4.0))
    assert sol.converged
    base = sol.as_array()
    rng = np.random.default_rng(0)
    noise = rng.normal(size=base.shape)
    norms = [residual_array(net, base)[1]] + [residual_array(net, base + a * noise)[1]
                                             for a in (1e-4, 1e-3, 1e-2)]
    assert norms[0] <= 1e-3
    assert all(b > a for a, b in zip(norms, norms[1:]))


def test_pair_structure_spiking():
    split = split_network(spiking_network(fs=1.0, duration=100.0), ShiftPolicy(lam=4.0))
    assert split.p == 2
    assert split.pair_labels == ["n0:ins", "n0:tau50"]
    assert split.operator_count == 5
    assert split.formula_count == 2 * 1 + 2 * 2 + 1
    assert split.pairs[1].shift == 4.0


def test_pair_structure_hco_and_grouping():
    net = hco_network(fs=0.1)
    a = split_network(net)
    b = split_network(net, ShiftPolicy(grouping="branch"))
    assert a.pair_labels == ["n0:ins", "n0:tau50", "n0:tau2500",
                             "n1:ins", "n1:tau50", "n1:tau2500", "syn->n0", "syn->n1"]
    assert b.p == a.p + 2
    assert a.n_synapses == 2


def test_shift_precedence():
    b = ConductanceBranch(FirstOrderLag(10.0), NonlinearReadout("tanh", -1.0), shift=3.0)
    net = _net([NeuronSpec((b,))])
    assert split_network(net).pairs[1].shift == 3.0
    assert split_network(net, ShiftPolicy(lam=0.5)).pairs[1].shift == 0.5
    nb = ConductanceBranch(FirstOrderLag(10.0), NonlinearReadout("tanh", -1.5))
    pb = ConductanceBranch(FirstOrderLag(10.0), NonlinearReadout("tanh", 0.5))
    assert split_network(_net([NeuronSpec((nb, pb))])).pairs[1].shift == 1.5


@pytest.mark.parametrize("seed", range(50))
def test_splitting_soundness(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    lam = None if seed % 2 else float(rng.uniform(0, 5))
    split = split_network(net, ShiftPolicy(lam=lam, lam_syn=lam, grouping=("timescale", "branch")[seed % 3 == 0]))
    for _ in range(3):
        x = rng.normal(scale=2, size=(net.n, net.grid.length))
        r, _ = residual_array(net, x)
        assert np.max(np.abs(split.total(x) - r)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_split_operators_monotone(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n_max=3)
    split = split_network(net)
    g = net.grid
    for i in range(split.p):
        for _ in range(5):
            x1 = rng.normal(scale=2, size=(net.n, g.length))
            x2 = rng.normal(scale=2, size=(net.n, g.length))
            dx = x1 - x2
            assert np.vdot(dx, split.apply_F(i, x1) - split.apply_F(i, x2)) >= -1e-9
            assert np.vdot(dx, split.apply_G(i, x1) - split.apply_G(i, x2)) >= -1e-9
    x1, x2 = rng.normal(size=(2, net.n, g.length))
    assert abs(np.vdot(x1 - x2, split.apply_E(x1) - split.apply_E(x2))) < 1e-9 * (1 + np.abs(x1).sum())


def test_pair_resolvents_solve_their_equation():
    rng = np.random.default_rng(4)
    net = random_network(rng, n_max=3)
    split = split_network(net)
    gamma = 0.1
    for i, pr in enumerate(split.pairs):
        w = rng.normal(size=(net.n, net.grid.length))
        q, _ = pr.resolvent(gamma, w, net.grid, inner_tol=1e-12, inner_max=2000)
        assert np.allclose(q + gamma * pr.apply_F(q, net.grid), w, atol=1e-9)


def test_resolvent_E_inverts():
    net = random_network(np.random.default_rng(1))
    split = split_network(net)
    w = np.random.default_rng(2).normal(size=(net.n, net.grid.length))
    q = split.resolvent_E(0.3, w)
    assert np.allclose(q + 0.3 * split.apply_E(q), w, atol=1e-10)


def test_wiring_errors():
    with pytest.raises(ConfigurationError):
        _net([_neuron((1.0, 0.0))], [SynapseSpec(0, 3, 1.0)])
    with pytest.raises(ConfigurationError):
        SynapseSpec(1, 1, 1.0)
    with pytest.raises(ConfigurationError):
        NeuronSpec(())
    with pytest.raises(DimensionError):
        NetworkSpec((_neuron((1.0, 0.0)),), (), ())


def test_static_equilibrium_matches_bisection():
    net = bursting_network(fs=0.1)
    rest = static_equilibrium(net)[0]

    def f(v):
        return v - 1.5 * np.tanh(v + 0.88) + 1.5 * np.tanh(v) + 2.4

    ref = bisect(f, -50, 50)
    assert rest == pytest.approx(ref, abs=1e-10)


def test_static_equilibrium_network_solves_joint_system():
    net = hco_network(fs=0.1)
    v = static_equilibrium(net)
    x = np.repeat(v[:, None], net.grid.length, axis=1)
    r, _ = residual_array(net, x)
    # the pulse starts after t = 0, so early samples sit at rest
    assert np.max(np.abs(r[:, :50])) < 1e-8


def test_spike_thresholds():
    net = spiking_network(fs=1.0, duration=100.0)
    th = network_spike_thresholds(net)
    rest = static_equilibrium(net)[0]
    assert th[0] == pytest.approx(rest + 0.5 * (2 + 2))


def test_certificate_records_pairs():
    split = split_network(spiking_network(fs=1.0, duration=200.0), ShiftPolicy(lam=4.0))
    cert = validate_certificate(split, 0.5, samples=5)
    assert [r["label"] for r in cert.pairs] == split.pair_labels
    assert all(r["monotone"] for r in cert.pairs)
    assert cert.pairs[1]["contraction_factor"] == pytest.approx(1.0 * 2 / (1 + 1.0 * 4))
    d = cert.to_dict()
    assert set(d) >= {"rho", "gamma", "beta", "eps", "theta", "admissible", "warnings"}


def test_certificate_warns_on_noncontractive_step():
    split = split_network(spiking_network(fs=1.0, duration=200.0), ShiftPolicy(lam=0.0))
    cert = validate_certificate(split, 5.0, samples=3)
    assert any("contraction factor" in w for w in cert.warnings)


def test_with_parameter_and_errors():
    net = bursting_network(fs=0.5)
    net2 = net.with_parameter("neurons[0].branches[3].gain", 1.2)
    assert net2.neurons[0].branches[3].gain == 1.2
    assert net.neurons[0].branches[3].gain == 1.5
    net3 = net.with_parameter("inputs[1].amplitude", 0.0)
    assert np.allclose(net3.currents_array(), -2.4)
    with pytest.raises(ConfigurationError):
        net.with_parameter("neurons[4].branches[0].gain", 1.0)
    with pytest.raises(ConfigurationError):
        net.with_parameter("bogus", 1.0)


def test_network_from_dict_matches_models():
    from neurosplit.models import spiking_doc

    a = network_from_dict(spiking_doc(fs=1.0, duration=200.0))
    b = spiking_network(fs=1.0, duration=200.0)
    assert np.array_equal(a.currents_array(), b.currents_array())
