"""Builders for the three example circuits as JSON-ready dictionaries.

The dictionaries follow the network config format, so the same objects feed
both the Python API (via :func:`network_from_dict`) and the shipped config files.
"""

from __future__ import annotations

from .config import network_from_dict

TAU_FAST = 50.0
TAU_SLOW = 2500.0


def _b(tau, gain, offset=0.0):
    return {"tau": tau, "gain": gain, "offset": offset, "kind": "tanh"}


def spiking_doc(hold=-1.5, amplitude=0.3, t_on=300.0, width=20.0, duration=1200.0,
                fs=10.0, fast_negative_gain=-2.0):
    """Excitable neuron ``Dv + v - 2tanh(v) + 2tanh(lag50 v) = i``."""
    return {
        "neurons": [{
            "C": 1.0,
            "leak": 1.0,
            "branches": [_b(0.0, fast_negative_gain), _b(TAU_FAST, 2.0)],
        }],
        "synapses": [],
        "inputs": [
            {"neuron": 0, "kind": "hold", "amplitude": hold},
            {"neuron": 0, "kind": "pulse", "t_on": t_on, "t_off": t_on + width,
             "amplitude": amplitude},
        ],
        "grid": {"duration_ms": duration, "fs": fs},
    }


def bursting_doc(hold=-2.4, amplitude=0.4, t_on=5600.0, t_off=6400.0, duration=12000.0,
                 fs=4.0):
    """Spiking neuron plus a slow negative/ultraslow positive pair producing bursts."""
    return {
        "neurons": [{
            "C": 1.0,
            "leak": 1.0,
            "branches": [
                _b(0.0, -2.0),
                _b(TAU_FAST, 2.0),
                _b(TAU_FAST, -1.5, -0.88),
                _b(TAU_SLOW, 1.5),
            ],
        }],
        "synapses": [],
        "inputs": [
            {"neuron": 0, "kind": "hold", "amplitude": hold},
            {"neuron": 0, "kind": "pulse", "t_on": t_on, "t_off": t_off,
             "amplitude": amplitude},
        ],
        "grid": {"duration_ms": duration, "fs": fs},
    }


def hco_doc(holds=(-1.5, -1.4), amplitude=-1.0, t_on=1000.0, t_off=3000.0,
            duration=12000.0, fs=2.0, syn_gain=0.8, syn_offset=1.0, syn_slope=2.0):
    """Two bursting neurons with mutual sigmoidal inhibition.

    A hyperpolarizing pulse into neuron 0 triggers its rebound burst, whose
    inhibition in turn releases a rebound burst in neuron 1.
    """
    neuron = {
        "C": 1.0,
        "leak": 1.0,
        "branches": [
            _b(0.0, -2.0),
            _b(TAU_FAST, 2.0),
            _b(TAU_FAST, -1.5, -0.88),
            _b(TAU_SLOW, 1.0, -0.88),
        ],
    }
    syn = {"gain": syn_gain, "offset": syn_offset, "tau": 0.0, "slope": syn_slope,
           "kind": "sigmoid"}
    return {
        "neurons": [dict(neuron, branches=[dict(b) for b in neuron["branches"]])
                    for _ in range(2)],
        "synapses": [dict(syn, pre=1, post=0), dict(syn, pre=0, post=1)],
        "inputs": [
            {"neuron": 0, "kind": "hold", "amplitude": holds[0]},
            {"neuron": 1, "kind": "hold", "amplitude": holds[1]},
            {"neuron": 0, "kind": "pulse", "t_on": t_on, "t_off": t_off,
             "amplitude": amplitude},
        ],
        "grid": {"duration_ms": duration, "fs": fs},
    }


def spiking_network(**kw):
    return network_from_dict(spiking_doc(**kw))


def bursting_network(**kw):
    return network_from_dict(bursting_doc(**kw))


def hco_network(**kw):
    return network_from_dict(hco_doc(**kw))
