"""Python access to the nctorus library: algebra elements, spectra and the run harness."""

import json as _json

from . import _core
from ._core import (
    Error,
    NcElement,
    box_ceiling,
    dixmier_estimate,
    flat_spectrum,
    golden,
    max_abs_difference,
    resolvent_residue,
    run_criterion,
    weyl_slope,
)

__version__ = _core.__version__


def default_config():
    return _json.loads(_core.default_config())


def normalize_config(config):
    """Fill defaults, symmetrize h and validate; accepts a dict or JSON text."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_core.normalize_config(text))


def compose(p, q, order_cutoff):
    """Graded composition of two symbols given as GradedSymbol JSON dicts."""
    return _json.loads(_core.compose_json(_json.dumps(p), _json.dumps(q), order_cutoff))


def _runner(fn):
    def run(config, out_dir, tolerance_scale=1.0):
        text = config if isinstance(config, str) else _json.dumps(config)
        ok, report = fn(text, str(out_dir), tolerance_scale)
        return ok, _json.loads(report)

    run.__name__ = fn.__name__
    run.__doc__ = "Returns (pass, report dict); files go under out_dir/<command>/."
    return run


run_weyl = _runner(_core.run_weyl)
run_heat = _runner(_core.run_heat)
run_residue = _runner(_core.run_residue)
run_connes_trace = _runner(_core.run_connes_trace)

__all__ = [
    "Error",
    "NcElement",
    "box_ceiling",
    "compose",
    "default_config",
    "dixmier_estimate",
    "flat_spectrum",
    "golden",
    "max_abs_difference",
    "normalize_config",
    "resolvent_residue",
    "run_connes_trace",
    "run_criterion",
    "run_heat",
    "run_residue",
    "run_weyl",
    "weyl_slope",
]
