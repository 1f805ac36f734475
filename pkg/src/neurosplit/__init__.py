"""Difference-of-monotone operator splitting for neuromorphic circuit simulation."""

from .circuit import (
    DmSplitting,
    NetworkSpec,
    NeuronSpec,
    ShiftPolicy,
    Stimulus,
    SynapseSpec,
    apply_neuron,
    apply_synapse,
    assemble_network,
    residual,
    split_network,
    static_equilibrium,
    validate_certificate,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    DivergenceError,
    InnerResolventError,
    NeurosplitError,
    StiffnessError,
    VerificationError,
)
from .operators import (
    CapacitiveDifferentiator,
    ConductanceBranch,
    FirstOrderLag,
    NonlinearReadout,
)
from .reference import compare, detect_events, simulate_reference, to_state_space
from .signals import LiftedSignal, Signal, TimeGrid
from .solver import (
    Solution,
    SolverConfig,
    coarse_to_fine,
    continuation_sweep,
    solve,
    solve_network,
    template_refine,
)

__version__ = "0.1.0"
