"""Command-line entry point: ``neurosplit MODE --config FILE [overrides]``.

Exit codes: 0 success, 1 not converged, 2 configuration error, 3 divergence,
4 inner resolvent or integrator failure, 5 verification failure.
Set ``NEUROSPLIT_LOG`` (e.g. ``DEBUG``) to change log verbosity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from .circuit import network_spike_thresholds, split_network, validate_certificate
from .config import MODES, RunSpec, load_run_spec
from .errors import ConfigurationError, NeurosplitError
from .reference import compare, detect_network_events, simulate_reference
from .signals import LiftedSignal, Signal, TimeGrid, load_csv, resample, signals_to_csv
from .solver import (
    Solution,
    coarse_to_fine,
    continuation_sweep,
    solve,
    solve_network,
    template_refine,
)

log = logging.getLogger("neurosplit")

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 1, 5


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def emit_report(out_dir: str, files: dict) -> dict:
    """Write ``files`` (name -> text) under ``out_dir`` plus a hashed manifest."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out_dir}: {exc}") from exc
    manifest = {}
    for name in sorted(files):
        data = files[name].encode()
        path = os.path.join(out_dir, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)
        manifest[name] = hashlib.sha256(data).hexdigest()
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(_json({"files": manifest}))
    return manifest


def _trace_files(voltages, prefix="") -> dict:
    return {f"{prefix}v{k}.csv": signals_to_csv([v]) for k, v in enumerate(voltages)}


def _convergence_log(sol: Solution) -> str:
    lines = []
    for rec in sol.history:
        lines.append(json.dumps({k: rec[k] for k in ("iter", "rel_change", "residual") if k in rec},
                                sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def _snapshot_files(sol: Solution, prefix="") -> dict:
    out = {}
    grid = sol.grid
    for it, x in sorted(sol.snapshots.items()):
        for k, row in enumerate(x):
            out[f"{prefix}snapshots/iter{it:06d}_v{k}.csv"] = signals_to_csv([Signal(grid, row)])
    return out


def _thresholds(spec: RunSpec, net):
    th = spec.events.get("spike_threshold")
    if th is not None:
        return np.full(net.n, float(th))
    return network_spike_thresholds(net)


def _events(spec, net, voltages):
    return [e.to_dict() for e in detect_network_events(
        voltages, _thresholds(spec, net), spec.events["burst_gap"])]


def _solution_files(spec, net, split, sol, prefix="") -> tuple:
    events = _events(spec, net, sol.voltages)
    summary = dict(sol.summary())
    summary.update({
        "events": events,
        "operator_count": split.operator_count,
        "formula_operator_count": split.formula_count,
        "pairs": split.pair_labels,
    })
    files = _trace_files(sol.voltages, prefix)
    files[f"{prefix}convergence.jsonl"] = _convergence_log(sol)
    files.update(_snapshot_files(sol, prefix))
    return files, summary


def _warm_start(path, net, grid) -> LiftedSignal:
    """Read ``t,value`` (one neuron) or ``t,v0,v1,...`` traces."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[:2] == ["t", "value"]:
        sigs = [load_csv(path)]
    else:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        fs = 1.0 / float(np.median(np.diff(data[:, 0])))
        g0 = TimeGrid(data.shape[0] / fs, fs)
        sigs = [Signal(g0, data[:, k + 1]) for k in range(data.shape[1] - 1)]
    if len(sigs) != net.n:
        raise ConfigurationError(f"warm start has {len(sigs)} traces, network has {net.n}")
    return LiftedSignal(tuple(s if s.grid == grid else resample(s, grid) for s in sigs))


def _sweep_values(sw) -> list:
    n = int(round((sw["to"] - sw["from"]) / sw["step"]))
    if n < 0:
        raise ConfigurationError("sweep step points away from 'to'", pointer="/sweep/step")
    return [round(sw["from"] + i * sw["step"], 12) for i in range(n + 1)]


def _peak(events) -> float:
    peaks = [p for e in events for p in e["spike_peaks"]]
    return max(peaks) if peaks else float("nan")


def run(spec: RunSpec, warm_start: str | None = None) -> int:
    """Execute one run and write its outputs. Returns the process exit status."""
    t0 = time.perf_counter()
    cfg = spec.solver
    net = spec.network.on_grid(cfg.grid_for(spec.network))
    files = {"effective_config.json": _json(spec.effective)}
    status = EXIT_OK
    init = _warm_start(warm_start, net, net.grid) if warm_start else None

    if spec.mode in ("simulate", "verify"):
        split = split_network(net, spec.shifts)
        cert = validate_certificate(split, cfg, seed=spec.seed)
        for w in cert.warnings:
            log.warning("certificate: %s", w)
        sol = solve(split, cfg, init)
        sfiles, summary = _solution_files(spec, net, split, sol)
        files.update(sfiles)
        files["certificate.json"] = _json(cert.to_dict())
        ok = sol.converged and sol.final_normalized_residual <= cfg.residual_threshold
        if spec.mode == "verify":
            rs = spec.reference
            ref = simulate_reference(net, rs["dt_max"], rs["rtol"], rs["atol"], rs["method"])
            metrics = compare(ref, sol, _thresholds(spec, net), spec.events["burst_gap"])
            files.update(_trace_files(ref.voltages, "reference_"))
            passed = bool(ok and all(d == 0 for d in metrics["spike_count_diff"])
                          and metrics["max_spike_time_offset"] <= rs["spike_time_tol"])
            metrics.update({"passed": passed, "converged": sol.converged,
                            "final_residual": sol.final_normalized_residual,
                            "spike_time_tol": rs["spike_time_tol"],
                            "residual_threshold": cfg.residual_threshold})
            files["metrics.json"] = _json(metrics)
            summary["verification_passed"] = passed
            status = EXIT_OK if passed else EXIT_VERIFY
        else:
            status = EXIT_OK if ok else EXIT_NOT_CONVERGED
        files["summary.json"] = _json(summary)

    elif spec.mode == "reference":
        rs = spec.reference
        ref = simulate_reference(net, rs["dt_max"], rs["rtol"], rs["atol"], rs["method"])
        files.update(_trace_files(ref.voltages))
        files["summary.json"] = _json({"events": _events(spec, net, ref.voltages)})

    elif spec.mode == "sweep":
        sw = spec.sweep
        values = _sweep_values(sw)
        sols = continuation_sweep(net, [(sw["param"], v) for v in values], cfg, spec.shifts,
                                  init=init, predictor=sw["predictor"])
        rows = ["value,iterations,converged,spike_amplitude"]
        points = []
        for v, sol in zip(values, sols):
            stepnet = net.with_parameter(sw["param"], v)
            ev = _events(spec, stepnet, sol.voltages)
            amp = _peak(ev)
            rows.append(f"{v:.12g},{sol.iterations},{int(sol.converged)},{amp:.17g}")
            points.append({"value": v, **sol.summary(), "spike_amplitude": amp, "events": ev})
            for k, volt in enumerate(sol.voltages):
                files[f"steps/{len(points) - 1:04d}_v{k}.csv"] = signals_to_csv([volt])
        files["sweep.csv"] = "\n".join(rows) + "\n"
        all_conv = all(s.converged for s in sols)
        files["summary.json"] = _json({
            "converged": all_conv, "points": points,
            "mean_warm_iterations": float(np.mean([s.iterations for s in sols[1:]]))
            if len(sols) > 1 else None,
        })
        status = EXIT_OK if all_conv else EXIT_NOT_CONVERGED

    elif spec.mode == "refine":
        rf = spec.refine
        ccfg = _replace_cfg(cfg, fs=rf["coarse_fs"], max_iter=rf["coarse_max_iter"] or cfg.max_iter,
                            checkpoints=())
        fcfg = _replace_cfg(cfg, fs=rf["fine_fs"])
        fnet = spec.network.on_grid(fcfg.grid_for(spec.network))
        if rf["template"]:
            cnet = spec.network.on_grid(ccfg.grid_for(spec.network))
            coarse = solve(split_network(cnet, spec.shifts), ccfg)
            ev = detect_network_events(coarse.voltages, _thresholds(spec, cnet),
                                       spec.events["burst_gap"])
            tmpl = load_csv(rf["template"])
            guess = template_refine(coarse, tmpl, [list(e.spike_times) for e in ev])
            fine = solve_network(spec.network, fcfg, spec.shifts, init=guess)
        else:
            res = coarse_to_fine(spec.network, ccfg, fcfg, spec.shifts)
            coarse, fine = res.coarse, res.fine
        fsplit = split_network(fnet, spec.shifts)
        sfiles, summary = _solution_files(spec, fnet, fsplit, fine)
        files.update(sfiles)
        cnet = spec.network.on_grid(ccfg.grid_for(spec.network))
        csplit = split_network(cnet, spec.shifts)
        cfiles, csummary = _solution_files(spec, cnet, csplit, coarse, prefix="coarse/")
        files.update(cfiles)
        summary["coarse"] = csummary
        if rf["compare_cold"]:
            cold = solve_network(spec.network, _replace_cfg(fcfg, checkpoints=()), spec.shifts)
            summary["cold_fine"] = cold.summary()
        files["summary.json"] = _json(summary)
        status = EXIT_OK if fine.converged else EXIT_NOT_CONVERGED

    emit_report(spec.output, files)
    log.info("%s finished in %.2f s with status %d", spec.mode, time.perf_counter() - t0, status)
    return status


def _replace_cfg(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neurosplit", description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="run spec JSON file")
    p.add_argument("--out", help="output directory (overrides the run config)")
    p.add_argument("--checkpoints", help="comma-separated iterations to snapshot")
    p.add_argument("--fs", type=float, help="sampling rate in samples per ms")
    p.add_argument("--alpha", type=float, help="outer step size")
    p.add_argument("--lambda", dest="lam", type=float, help="shift for every lagged pair")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float, help="relative-change tolerance")
    p.add_argument("--workers", type=int, help="threads for pair updates")
    p.add_argument("--warm-start", help="CSV with an initial guess")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("NEUROSPLIT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    overrides = {
        "output": args.out,
        "fs": args.fs,
        "alpha": args.alpha,
        "lambda": args.lam,
        "max_iter": args.max_iter,
        "epsilon_tol": args.tol,
        "workers": args.workers,
    }
    try:
        if args.checkpoints:
            try:
                overrides["checkpoints"] = [int(c) for c in args.checkpoints.split(",") if c]
            except ValueError as exc:
                raise ConfigurationError("--checkpoints needs integers") from exc
        spec = load_run_spec(args.config, args.mode, overrides)
        return run(spec, args.warm_start)
    except NeurosplitError as exc:
        print(f"neurosplit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
