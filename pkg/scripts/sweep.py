"""Continuation in the fast negative conductance gain, -2 to -2.4 in 0.01 steps.

    python3 scripts/sweep.py [--predictor secant|constant]
"""

import argparse

import numpy as np

from neurosplit import ShiftPolicy, SolverConfig, continuation_sweep, solve_network
from neurosplit.circuit import network_spike_thresholds
from neurosplit.models import spiking_network
from neurosplit.reference import detect_events

REF = "neurons[0].branches[0].gain"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--predictor", default="secant", choices=["secant", "constant"])
    ap.add_argument("--amplitude", type=float, default=0.6)
    args = ap.parse_args()
    net = spiking_network(amplitude=args.amplitude)
    values = [round(-2.0 - 0.01 * k, 2) for k in range(41)]
    cfg, shifts = SolverConfig(alpha=0.5, fs=10.0), ShiftPolicy(lam=4.0)
    sols = continuation_sweep(net, [(REF, v) for v in values], cfg, shifts,
                              predictor=args.predictor)
    cold = solve_network(net.with_parameter(REF, values[-1]), cfg, shifts)
    print("value,iterations,converged,spike_amplitude")
    for v, s in zip(values, sols):
        th = network_spike_thresholds(net.with_parameter(REF, v))[0]
        peaks = detect_events(s.voltages[0], th).spike_peaks
        print(f"{v},{s.iterations},{int(s.converged)},{max(peaks) if peaks else float('nan'):.6f}")
    warm = np.mean([s.iterations for s in sols[1:]])
    print(f"# mean warm iterations {warm:.1f}, cold at {values[-1]}: {cold.iterations}")


if __name__ == "__main__":
    main()
