"""JSON network descriptions and run configurations.

Both are validated with JSON Schema. Unknown keys are rejected and every
default is written back into the effective configuration so a run can be
reproduced from its echo alone.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field

import jsonschema

from .circuit import NetworkSpec, NeuronSpec, ShiftPolicy, Stimulus, SynapseSpec
from .errors import ConfigurationError
from .operators import ConductanceBranch, FirstOrderLag, NonlinearReadout
from .signals import TimeGrid
from .solver import SolverConfig

__all__ = [
    "NETWORK_SCHEMA",
    "RUN_SCHEMA",
    "RunSpec",
    "MODES",
    "network_from_dict",
    "load_network",
    "load_run_spec",
    "run_spec_from_dict",
]

MODES = ("simulate", "sweep", "refine", "verify", "reference")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

NETWORK_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["neurons", "grid"],
    "properties": {
        "neurons": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["branches"],
                "properties": {
                    "C": _POS,
                    "rest": {"type": ["number", "null"]},
                    "leak": _NONNEG,
                    "branches": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["tau", "gain"],
                            "properties": {
                                "timescale": {"enum": ["ins", "f", "s", "us"]},
                                "tau": _NONNEG,
                                "kind": {"enum": ["tanh", "sigmoid"]},
                                "gain": _NUM,
                                "offset": _NUM,
                                "slope": _POS,
                                "lambda": _NONNEG,
                            },
                        },
                    },
                },
            },
        },
        "synapses": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["pre", "post", "gain"],
                "properties": {
                    "pre": {"type": "integer", "minimum": 0},
                    "post": {"type": "integer", "minimum": 0},
                    "gain": _NUM,
                    "offset": _NUM,
                    "tau": _NONNEG,
                    "slope": _POS,
                    "kind": {"enum": ["tanh", "sigmoid"]},
                },
            },
        },
        "inputs": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["neuron", "kind"],
                "properties": {
                    "neuron": {"type": "integer", "minimum": 0},
                    "kind": {"enum": ["pulse", "hold", "file"]},
                    "t_on": _NUM,
                    "t_off": _NUM,
                    "amplitude": _NUM,
                    "path": {"type": "string"},
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["duration_ms", "fs"],
            "properties": {"duration_ms": _POS, "fs": _POS},
        },
    },
}

RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["network"],
    "properties": {
        "network": {"type": ["string", "object"]},
        "mode": {"enum": list(MODES)},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": _POS,
                "lambda": {"type": ["number", "null"], "minimum": 0},
                "lambda_syn": {"type": ["number", "null"], "minimum": 0},
                "grouping": {"enum": ["timescale", "branch"]},
                "fs": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "duration": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "epsilon_tol": _POS,
                "inner_tol": _POS,
                "inner_max": {"type": "integer", "minimum": 1},
                "residual_check_every": {"type": "integer", "minimum": 0},
                "divergence_factor": _POS,
                "residual_threshold": _POS,
                "workers": {"type": "integer", "minimum": 1},
                "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["param", "from", "to", "step"],
            "properties": {"param": {"type": "string"}, "from": _NUM, "to": _NUM,
                           "step": {"type": "number", "not": {"const": 0}},
                           "predictor": {"enum": ["constant", "secant"]}},
        },
        "refine": {
            "type": "object",
            "additionalProperties": False,
            "required": ["coarse_fs", "fine_fs"],
            "properties": {
                "coarse_fs": _POS,
                "fine_fs": _POS,
                "coarse_max_iter": {"type": ["integer", "null"], "minimum": 1},
                "template": {"type": ["string", "null"]},
                "compare_cold": {"type": "boolean"},
            },
        },
        "reference": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt_max": _POS,
                "rtol": _POS,
                "atol": _POS,
                "method": {"enum": ["BDF", "Radau", "LSODA"]},
                "spike_time_tol": _POS,
            },
        },
        "events": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "burst_gap": _POS,
                "spike_threshold": {"type": ["number", "null"]},
            },
        },
        "output": {"type": "string"},
        "seed": {"type": "integer"},
    },
}

SOLVER_DEFAULTS = {
    "alpha": 0.5,
    "lambda": None,
    "lambda_syn": None,
    "grouping": "timescale",
    "fs": None,
    "duration": None,
    "max_iter": 1000,
    "epsilon_tol": 1e-6,
    "inner_tol": 1e-8,
    "inner_max": 200,
    "residual_check_every": 0,
    "divergence_factor": 1e6,
    "residual_threshold": 1e-3,
    "workers": 1,
    "checkpoints": [],
}
REFERENCE_DEFAULTS = {"dt_max": 1.0, "rtol": 1e-8, "atol": 1e-10, "method": "BDF",
                      "spike_time_tol": 5.0}
EVENT_DEFAULTS = {"burst_gap": 500.0, "spike_threshold": None}
SWEEP_DEFAULTS = {"predictor": "secant"}
REFINE_DEFAULTS = {"coarse_max_iter": None, "template": None, "compare_cold": False}
BRANCH_DEFAULTS = {"kind": "tanh", "offset": 0.0, "slope": 1.0}
SYNAPSE_DEFAULTS = {"offset": 0.0, "tau": 0.0, "slope": 1.0, "kind": "sigmoid"}
INPUT_DEFAULTS = {"t_on": 0.0, "t_off": 0.0, "amplitude": 0.0}
NEURON_DEFAULTS = {"C": 1.0, "leak": 1.0, "rest": None}


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def _validate(doc, schema, where):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        msg = err.message
        if err.validator == "additionalProperties":
            msg = f"unknown key(s): {msg}"
        raise ConfigurationError(f"{where}: {msg}", pointer=_pointer(err.absolute_path))


def _timescale_label(tau):
    if tau == 0:
        return "ins"
    if tau < 500:
        return "f"
    return "s" if tau < 10000 else "us"


def normalize_network(doc: dict, base_dir: str = ".") -> dict:
    """Validate and fill defaults. File input paths become absolute."""
    _validate(doc, NETWORK_SCHEMA, "network")
    out = copy.deepcopy(doc)
    out.setdefault("synapses", [])
    out.setdefault("inputs", [])
    for nr in out["neurons"]:
        for k, v in NEURON_DEFAULTS.items():
            nr.setdefault(k, v)
        for b in nr["branches"]:
            for k, v in BRANCH_DEFAULTS.items():
                b.setdefault(k, v)
            b.setdefault("timescale", _timescale_label(b["tau"]))
    for s in out["synapses"]:
        for k, v in SYNAPSE_DEFAULTS.items():
            s.setdefault(k, v)
    for i, st in enumerate(out["inputs"]):
        for k, v in INPUT_DEFAULTS.items():
            st.setdefault(k, v)
        if st["kind"] == "file":
            if "path" not in st:
                raise ConfigurationError("file input needs a path", pointer=f"/inputs/{i}")
            st["path"] = os.path.abspath(os.path.join(base_dir, st["path"]))
    n = len(out["neurons"])
    for i, s in enumerate(out["synapses"]):
        for key in ("pre", "post"):
            if s[key] >= n:
                raise ConfigurationError(f"neuron index {s[key]} out of range",
                                         pointer=f"/synapses/{i}/{key}")
        if s["pre"] == s["post"]:
            raise ConfigurationError("self-synapse", pointer=f"/synapses/{i}")
    for i, st in enumerate(out["inputs"]):
        if st["neuron"] >= n:
            raise ConfigurationError(f"neuron index {st['neuron']} out of range",
                                     pointer=f"/inputs/{i}/neuron")
    return out


def network_from_dict(doc: dict, base_dir: str = ".", grid: TimeGrid | None = None) -> NetworkSpec:
    doc = normalize_network(doc, base_dir)
    neurons = []
    for nr in doc["neurons"]:
        branches = tuple(
            ConductanceBranch(
                FirstOrderLag(b["tau"]),
                NonlinearReadout(b["kind"], b["gain"], b["offset"], b["slope"]),
                shift=b.get("lambda", 0.0),
                label=b["timescale"],
            )
            for b in nr["branches"]
        )
        neurons.append(NeuronSpec(branches, nr["C"], nr["leak"], nr["rest"]))
    synapses = tuple(
        SynapseSpec(s["pre"], s["post"], s["gain"], s["offset"], s["tau"], s["slope"], s["kind"])
        for s in doc["synapses"]
    )
    stimuli = tuple(
        Stimulus(st["neuron"], st["kind"], st["amplitude"], st["t_on"], st["t_off"],
                 st.get("path"))
        for st in doc["inputs"]
    )
    if grid is None:
        grid = TimeGrid(doc["grid"]["duration_ms"], doc["grid"]["fs"])
    return NetworkSpec.from_stimuli(neurons, synapses, stimuli, grid)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc


def load_network(path) -> NetworkSpec:
    return network_from_dict(_read_json(path), os.path.dirname(os.path.abspath(path)))


@dataclass
class RunSpec:
    """Validated run description; ``effective`` is the fully defaulted echo."""

    mode: str
    network: NetworkSpec
    network_doc: dict
    solver: SolverConfig
    shifts: ShiftPolicy
    reference: dict
    events: dict
    sweep: dict | None = None
    refine: dict | None = None
    output: str = "runs/out"
    seed: int = 0
    effective: dict = field(default_factory=dict)


def run_spec_from_dict(doc: dict, mode: str | None = None, base_dir: str = ".",
                       overrides: dict | None = None) -> RunSpec:
    """Validate a run document and apply command-line overrides.

    ``overrides`` maps solver keys (``alpha``, ``lambda``, ``fs``, ``max_iter``,
    ``epsilon_tol``, ``checkpoints``) and ``output`` to replacement values.
    """
    _validate(doc, RUN_SCHEMA, "run spec")
    doc = copy.deepcopy(doc)
    mode = mode or doc.get("mode")
    if mode is None:
        raise ConfigurationError("no mode given", pointer="/mode")
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}", pointer="/mode")
    if mode == "sweep" and "sweep" not in doc:
        raise ConfigurationError("sweep mode requires a sweep block", pointer="/sweep")
    if mode == "refine" and "refine" not in doc:
        raise ConfigurationError("refine mode requires a refine block", pointer="/refine")

    net_doc = doc["network"]
    net_dir = base_dir
    if isinstance(net_doc, str):
        net_path = os.path.join(base_dir, net_doc)
        net_dir = os.path.dirname(os.path.abspath(net_path))
        net_doc = _read_json(net_path)
    net_doc = normalize_network(net_doc, net_dir)

    solver = dict(SOLVER_DEFAULTS)
    solver.update(doc.get("solver", {}))
    overrides = dict(overrides or {})
    output = overrides.pop("output", None) or doc.get("output", f"runs/{mode}")
    for k, v in overrides.items():
        if v is not None:
            if k not in SOLVER_DEFAULTS:
                raise ConfigurationError(f"unknown override {k!r}")
            solver[k] = v
    _validate({"network": {}, "solver": solver}, RUN_SCHEMA, "run spec")
    reference = dict(REFERENCE_DEFAULTS, **doc.get("reference", {}))
    events = dict(EVENT_DEFAULTS, **doc.get("events", {}))
    refine = dict(REFINE_DEFAULTS, **doc["refine"]) if "refine" in doc else None
    if refine is not None and refine["template"]:
        refine["template"] = os.path.abspath(os.path.join(base_dir, refine["template"]))
    sweep = dict(SWEEP_DEFAULTS, **doc["sweep"]) if "sweep" in doc else None

    try:
        cfg = SolverConfig(
            alpha=solver["alpha"], fs=solver["fs"], duration=solver["duration"],
            max_iter=solver["max_iter"], epsilon_tol=solver["epsilon_tol"],
            inner_tol=solver["inner_tol"], inner_max=solver["inner_max"],
            residual_check_every=solver["residual_check_every"],
            divergence_factor=solver["divergence_factor"],
            residual_threshold=solver["residual_threshold"], workers=solver["workers"],
            checkpoints=tuple(solver["checkpoints"]),
        )
        shifts = ShiftPolicy(solver["lambda"], solver["lambda_syn"], solver["grouping"])
        net = network_from_dict(net_doc, net_dir)
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), pointer=exc.pointer or "/solver") from exc
    if sweep is not None:
        net.with_parameter(sweep["param"], sweep["from"])

    effective = {
        "network": net_doc,
        "mode": mode,
        "solver": solver,
        "reference": reference,
        "events": events,
        "output": output,
        "seed": int(doc.get("seed", 0)),
    }
    if sweep is not None:
        effective["sweep"] = sweep
    if refine is not None:
        effective["refine"] = refine
    return RunSpec(mode=mode, network=net, network_doc=net_doc, solver=cfg, shifts=shifts,
                   reference=reference, events=events, sweep=sweep, refine=refine,
                   output=output, seed=effective["seed"], effective=effective)


def load_run_spec(path, mode: str | None = None, overrides: dict | None = None) -> RunSpec:
    """Parse a run file; relative paths resolve against the file's directory."""
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ConfigurationError("run spec must be a JSON object", pointer="/")
    return run_spec_from_dict(doc, mode, os.path.dirname(os.path.abspath(path)), overrides)
