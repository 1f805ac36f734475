"""Random circuits for property tests."""

import numpy as np

from neurosplit.circuit import NetworkSpec, NeuronSpec, SynapseSpec
from neurosplit.operators import ConductanceBranch, FirstOrderLag, NonlinearReadout
from neurosplit.signals import Signal, TimeGrid


def random_network(rng, n_max=4, grid=None, syn_prob=0.5):
    grid = grid or TimeGrid(32.0, 1.0)
    n = int(rng.integers(1, n_max + 1))
    neurons = []
    for _ in range(n):
        branches = []
        for _ in range(int(rng.integers(1, 5))):
            tau = float(rng.choice([0.0, 3.0, 10.0, 50.0]))
            r = NonlinearReadout(
                str(rng.choice(["tanh", "sigmoid"])),
                float(rng.uniform(-3, 3)),
                float(rng.normal()),
                float(rng.uniform(0.5, 2.0)),
            )
            branches.append(ConductanceBranch(FirstOrderLag(tau), r, shift=float(rng.uniform(0, 1))))
        neurons.append(NeuronSpec(tuple(branches), capacitance=float(rng.uniform(0.5, 2)),
                                  leak=float(rng.uniform(0, 2))))
    synapses = []
    for pre in range(n):
        for post in range(n):
            if pre != post and rng.random() < syn_prob:
                synapses.append(SynapseSpec(pre, post, float(rng.uniform(-1, 1)),
                                            float(rng.normal()), float(rng.choice([0.0, 5.0])),
                                            float(rng.uniform(0.5, 3))))
    currents = tuple(Signal(grid, rng.normal(size=grid.length)) for _ in range(n))
    return NetworkSpec(tuple(neurons), tuple(synapses), currents)
