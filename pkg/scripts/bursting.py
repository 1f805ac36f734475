"""Solve the bursting neuron and compare its burst with the stiff integrator.

    python3 scripts/bursting.py [--alpha 0.15] [--lam 2] [--fs 4]
"""

import argparse
import time

from neurosplit import ShiftPolicy, SolverConfig, solve_network
from neurosplit.circuit import network_spike_thresholds
from neurosplit.models import bursting_network
from neurosplit.reference import detect_events, simulate_reference


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.15)
    ap.add_argument("--lam", type=float, default=2.0)
    ap.add_argument("--fs", type=float, default=4.0)
    ap.add_argument("--max-iter", type=int, default=7000)
    args = ap.parse_args()
    net = bursting_network(fs=args.fs)
    t0 = time.perf_counter()
    sol = solve_network(net, SolverConfig(alpha=args.alpha, max_iter=args.max_iter),
                        ShiftPolicy(lam=args.lam))
    print("solver", sol.summary(), f"{time.perf_counter() - t0:.1f} s")
    th = network_spike_thresholds(net)[0]
    print("DM bursts ", detect_events(sol.voltages[0], th).bursts)
    print("NI bursts ", detect_events(simulate_reference(net).voltages[0], th).bursts)


if __name__ == "__main__":
    main()
