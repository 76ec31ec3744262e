"""JSON schemas of the CLI reports (draft 2020-12)."""
from __future__ import annotations

NUM = {"type": "number"}
NUM_OR_NULL = {"type": ["number", "null"]}
INTS = {"type": "array", "items": {"type": "integer", "minimum": 0}}

_ENVELOPE = {
    "type": "object",
    "required": ["command", "version", "config", "result"],
    "properties": {
        "command": {"type": "string"},
        "version": {"type": "string"},
        "config": {"type": "object"},
        "timestamp": {"type": "string"},
        "exit_code": {"type": "integer"},
    },
}

_MESH = {
    "type": "object",
    "required": ["dimension", "counts", "boundary_facets", "betti", "admissibility"],
    "properties": {
        "dimension": {"type": "integer"},
        "counts": INTS,
        "boundary_facets": {"type": "integer"},
        "gamma_t_facets": {"type": "integer"},
        "betti": INTS,
        "euler_characteristic": {"type": "integer"},
        "h": NUM,
        "repaired_cells": INTS,
        "admissibility": {"type": "object", "required": ["admissible", "sliceable", "messages"]},
    },
}

_BETTI = {
    "type": "object",
    "required": ["dims", "integer", "spectral", "dual"],
    "properties": {"dims": INTS, "integer": INTS, "spectral": INTS, "dual": INTS},
}

_CONSTANTS = {
    "type": "object",
    "required": ["c_pq", "c_p", "c_m", "c_ks", "c_kt", "c_k", "c1", "c2", "c_tilde", "harmonic_dims", "eigen", "mesh"],
    "properties": {
        "c_pq": {"type": "array", "items": NUM_OR_NULL},
        **{k: NUM_OR_NULL for k in ("c_p", "c_m", "c_ks", "c_kt", "c_k", "c1", "c2", "c_tilde", "c_tilde_summed_lower")},
        "harmonic_dims": INTS,
        "eigen": {"type": "object"},
        "mesh": {"type": "object", "required": ["h", "cells"]},
        "slices": {"type": "integer"},
        "messages": {"type": "array", "items": {"type": "string"}},
    },
}

_DECOMPOSE = {
    "type": "object",
    "required": ["degree", "norm_F", "norm_exact", "norm_harmonic", "norm_coexact", "orthogonality",
                 "reconstruction_residual", "harmonic_dimension"],
    "properties": {
        "degree": {"type": "integer"},
        "norm_F": NUM,
        "norm_exact": NUM,
        "norm_harmonic": NUM,
        "norm_coexact": NUM,
        "reconstruction_residual": NUM,
        "pythagoras_residual": NUM,
        "harmonic_off_span": NUM,
        "orthogonality": {"type": "object", "additionalProperties": NUM},
        "harmonic_dimension": {"type": "integer"},
        "exact_bounds": {"type": "object"},
        "coexact_bounds": {"type": "object"},
    },
}

_VERIFY = {
    "type": "object",
    "required": ["case", "constants", "bound_name", "bound", "samples", "seed", "ratios", "max_ratio",
                 "eigen_sharp_ratio", "proof_chain", "passed", "media"],
    "properties": {
        "case": {"enum": ["i", "ii", "ii'"]},
        "constants": {"type": "object"},
        "bound_name": {"enum": ["c1", "c2"]},
        "bound": NUM,
        "slack": NUM,
        "samples": {"type": "integer"},
        "seed": {"type": "integer"},
        "ratios": {"type": "array", "items": NUM_OR_NULL},
        "max_ratio": NUM_OR_NULL,
        "worst_sample": {"type": "integer"},
        "eigen_sharp_ratio": NUM_OR_NULL,
        "sharp_ok": {"type": ["boolean", "null"]},
        "sharp_within_bound": {"type": ["boolean", "null"]},
        "proof_chain": {"type": "object"},
        "skew": {"type": "object"},
        "alternative": {"type": ["object", "null"]},
        "passed": {"type": "boolean"},
        "messages": {"type": "array", "items": {"type": "string"}},
        "media": {"type": ["object", "null"]},
    },
}

_SWEEP = {
    "type": "object",
    "required": ["columns", "rows"],
    "properties": {
        "columns": {"type": "array", "items": {"type": "string"}},
        "rows": {"type": "array", "items": {"type": "object"}},
    },
}

RESULTS = {
    "mesh": _MESH,
    "betti": _BETTI,
    "constants": _CONSTANTS,
    "decompose": _DECOMPOSE,
    "verify": _VERIFY,
    "sweep": _SWEEP,
}


def report_schema(command: str) -> dict:
    """Full schema of the JSON report written by ``command``."""
    schema = {"$schema": "https://json-schema.org/draft/2020-12/schema", "title": f"kml {command} report"}
    schema.update(_ENVELOPE)
    schema["properties"] = {**_ENVELOPE["properties"], "result": RESULTS[command]}
    return schema
