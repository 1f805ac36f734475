"""Half-centre oscillator: coarse solve, warm-started fine solve, cold fine
solve and the stiff integrator, with burst onsets of each.

    python3 scripts/hco_refine.py [--coarse-iter 3000] [--fine-iter 10000]
"""

import argparse
import time

from neurosplit import ShiftPolicy, SolverConfig, solve_network
from neurosplit.circuit import network_spike_thresholds
from neurosplit.models import hco_network
from neurosplit.reference import detect_network_events, simulate_reference


def bursts(voltages, th):
    return [[(round(a), round(b), c) for a, b, c in e.bursts]
            for e in detect_network_events(voltages, th)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.15)
    ap.add_argument("--lam", type=float, default=2.0)
    ap.add_argument("--lam-syn", type=float, default=2.0)
    ap.add_argument("--coarse-fs", type=float, default=0.1)
    ap.add_argument("--fine-fs", type=float, default=2.0)
    ap.add_argument("--coarse-iter", type=int, default=3000)
    ap.add_argument("--fine-iter", type=int, default=10000)
    ap.add_argument("--skip-cold", action="store_true")
    args = ap.parse_args()
    net = hco_network()
    th = network_spike_thresholds(net)
    shifts = ShiftPolicy(lam=args.lam, lam_syn=args.lam_syn)
    coarse_cfg = SolverConfig(alpha=args.alpha, fs=args.coarse_fs, max_iter=args.coarse_iter)
    t0 = time.perf_counter()
    coarse = solve_network(net, coarse_cfg, shifts)
    print("coarse", coarse.summary(), f"{time.perf_counter() - t0:.0f} s", bursts(coarse.voltages, th))
    fine_cfg = SolverConfig(alpha=args.alpha, fs=args.fine_fs, max_iter=args.fine_iter)
    t0 = time.perf_counter()
    warm = solve_network(net, fine_cfg, shifts, init=coarse)
    print("warm  ", warm.summary(), f"{time.perf_counter() - t0:.0f} s", bursts(warm.voltages, th))
    if not args.skip_cold:
        t0 = time.perf_counter()
        cold = solve_network(net, fine_cfg, shifts)
        print("cold  ", cold.summary(), f"{time.perf_counter() - t0:.0f} s", bursts(cold.voltages, th))
    ref = simulate_reference(net.on_grid(fine_cfg.grid_for(net)))
    print("NI    ", bursts(ref.voltages, th))


if __name__ == "__main__":
    main()
