"""Python access to the prosim prosthetic-hand control stack."""

import json
import os

from . import _prosim
from ._prosim import ParseError, TraceIntegrityError, pressure_from_force, score, spectral_probe

__all__ = [
    "ParseError",
    "TraceIntegrityError",
    "antislip_scenario",
    "default_config",
    "export_trial",
    "overgrasp_scenario",
    "pressure_from_force",
    "run_batch",
    "run_trial",
    "score",
    "spectral_probe",
    "standard_batch",
]


def default_config(condition="tactile"):
    return json.loads(_prosim.default_config_json(condition))


def standard_batch():
    return json.loads(_prosim.standard_batch_json())


def overgrasp_scenario():
    return json.loads(_prosim.overgrasp_scenario_json())


def antislip_scenario(id, seed):
    return json.loads(_prosim.antislip_scenario_json(id, seed))


def _dump(obj):
    return "" if obj is None else json.dumps(obj)


def _unpack(rec):
    rec["events"] = json.loads(rec.pop("events_json"))
    return rec


def run_trial(scenario, config=None, condition="", seed=1):
    """Runs one scripted trial. Returns metrics, milestones, events and channel arrays."""
    return _unpack(_prosim.run_trial(json.dumps(scenario), _dump(config), condition, seed))


def run_batch(scenarios, out_dir, config=None, condition="", seed=1, jobs=1):
    recs = _prosim.run_batch([json.dumps(s) for s in scenarios], _dump(config), condition, seed,
                             os.fspath(out_dir), jobs)
    return [_unpack(r) for r in recs]


def export_trial(trace_csv, format="csv", out=None):
    return _prosim.export_trial(os.fspath(trace_csv), format, None if out is None else os.fspath(out))
