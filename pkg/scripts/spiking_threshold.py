"""Find the pulse amplitude at which the spiking neuron starts to fire, then
solve at 1.1x and 0.8x of the supra-threshold pulse and compare with the
stiff integrator.

    python3 scripts/spiking_threshold.py [--out runs/spiking_threshold]
"""

import argparse
import json
import os
import time

from neurosplit import ShiftPolicy, SolverConfig, compare, solve_network
from neurosplit.circuit import network_spike_thresholds
from neurosplit.models import spiking_network
from neurosplit.reference import detect_events, simulate_reference
from neurosplit.signals import signals_to_csv


def n_spikes(amplitude):
    net = spiking_network(amplitude=amplitude)
    th = network_spike_thresholds(net)[0]
    return detect_events(simulate_reference(net).voltages[0], th).n_spikes


def bisect_threshold(lo=0.0, hi=1.0, tol=1e-4):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if n_spikes(mid) else (mid, hi)
    return hi


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/spiking_threshold")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    a_th = bisect_threshold()
    report = {"threshold_amplitude": a_th}
    for tag, amp in (("supra", 1.1 * a_th), ("sub", 0.88 * a_th)):
        net = spiking_network(amplitude=amp)
        t0 = time.perf_counter()
        sol = solve_network(net, SolverConfig(alpha=0.5, fs=10.0, max_iter=1000), ShiftPolicy(lam=4.0))
        dt = time.perf_counter() - t0
        ref = simulate_reference(net)
        m = compare(ref, sol, network_spike_thresholds(net))
        report[tag] = {"amplitude": amp, "runtime_s": dt, **sol.summary(), **m}
        with open(os.path.join(args.out, f"{tag}.csv"), "w") as fh:
            fh.write(signals_to_csv([sol.voltages[0], ref.voltages[0]]))
    print(json.dumps(report, indent=2))
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
