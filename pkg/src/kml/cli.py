"""Command-line frontend: ``kml {mesh,betti,constants,decompose,verify,sweep,schema}``.

Exit codes: 0 success, 1 usage or input error, 2 inequality violation,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, hodge, mesh, spectra, tensor
from .errors import KmlError, MeshError, PreconditionError, SolverError, TopologyMismatchError
from .forms import Cochain, constrained_space
from .schemas import RESULTS, report_schema

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_NUMERICAL = 0, 1, 2, 3

SWEEP_COLUMNS = ["mesh", "h", "cells", "c_p", "c_m", "c_ks", "c_kt", "c_k", "c1", "c2", "c_tilde",
                 "sharp_ratio", "harmonic_dims"]


class UsageError(KmlError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- config resolution ----------------------------------------------------------------


def parse_generator(spec: str) -> mesh.SimplicialComplex:
    """``box:N,n`` or ``annulus:angular,radial``."""
    try:
        kind, _, args = spec.partition(":")
        nums = [int(a) for a in args.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad generator spec {spec!r}") from exc
    if kind == "box" and len(nums) == 2:
        return mesh.build_box_mesh(*nums)
    if kind == "annulus" and len(nums) == 2:
        return mesh.build_annulus_mesh(*nums)
    raise UsageError(f"bad generator spec {spec!r}; expected box:N,n or annulus:angular,radial")


def partition_preset(complex: mesh.SimplicialComplex, spec: str) -> mesh.BoundaryPartition:
    """none | all | side:<x|y|z><+|-> | inner | outer | angular:<deg0>,<deg1>."""
    tol = 1e-9
    if spec == "none":
        return mesh.tag_boundary(complex, lambda x: False)
    if spec == "all":
        return mesh.tag_boundary(complex, lambda x: True)
    if spec.startswith("side:") and len(spec) == 7:
        axis = "xyz".find(spec[5])
        sign = spec[6]
        if axis < 0 or axis >= complex.dim or sign not in "+-":
            raise UsageError(f"bad side preset {spec!r}")
        lo = complex.vertices[:, axis].min()
        hi = complex.vertices[:, axis].max()
        target = hi if sign == "+" else lo
        return mesh.tag_boundary(complex, lambda x: abs(x[axis] - target) < tol)
    if spec in ("inner", "outer"):
        r = np.linalg.norm(complex.vertices, axis=1)
        target = r.min() if spec == "inner" else r.max()
        facets = complex.boundary_facets
        verts = complex.simplices[complex.dim - 1][facets]
        on = np.all(np.abs(np.linalg.norm(complex.vertices[verts], axis=2) - target) < tol, axis=1)
        return mesh.BoundaryPartition(complex, facets[on])
    if spec.startswith("angular:"):
        try:
            a0, a1 = (float(v) for v in spec[8:].split(","))
        except ValueError as exc:
            raise UsageError(f"bad angular preset {spec!r}") from exc

        def inside(x):
            ang = math.degrees(math.atan2(x[1], x[0])) % 360.0
            return a0 <= ang <= a1

        return mesh.tag_boundary(complex, inside)
    raise UsageError(f"unknown partition preset {spec!r}")


def slice_preset(complex, partition, spec: str | None, doc_slices):
    if spec is None:
        return doc_slices
    if spec == "none":
        return None
    if spec == "single":
        return mesh.SliceSpec.single(complex)
    if spec == "auto":
        sl = mesh.auto_slice(complex, partition)
        if sl is None:
            raise PreconditionError("auto-slicing failed")
        return sl
    if spec == "halves":
        cent = complex.centroids(complex.dim)
        if np.all(np.linalg.norm(cent, axis=1) > 1e-12) and complex.betti()[1] > 0:
            return mesh.annulus_halves(complex)
        mid = 0.5 * (complex.vertices[:, 0].min() + complex.vertices[:, 0].max())
        return mesh.axis_halves(complex, 0, mid)
    raise UsageError(f"unknown slice preset {spec!r}")


def mu_preset(complex: mesh.SimplicialComplex, spec: str) -> np.ndarray:
    """identity | scaled:<s> | varying | path to JSON {"mu": [[N x N] per vertex]}."""
    n = complex.dim
    x = complex.vertices
    if spec == "identity":
        return np.tile(np.eye(n), (complex.n_vertices, 1, 1))
    if spec.startswith("scaled:"):
        s = float(spec[7:])
        return np.tile(s * np.eye(n), (complex.n_vertices, 1, 1))
    if spec == "varying":
        # SPD at every vertex with det >= 0.75^2 - 0.25^2 = 0.5; the P1 interpolant keeps
        # that floor because det^(1/N) is concave on SPD matrices
        mu = np.tile(np.eye(n), (complex.n_vertices, 1, 1))
        for a in range(2):
            mu[:, a, a] = 0.75 + 0.5 * np.sin(np.pi * x[:, a]) ** 2
        off = 0.25 * np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, -1])
        mu[:, 0, 1] += off
        mu[:, 1, 0] += off
        return mu
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"unknown mu preset or missing file {spec!r}")
    try:
        data = np.asarray(json.loads(path.read_text())["mu"], dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"mu file {spec!r} must hold {{\"mu\": [N x N matrix per vertex]}}") from exc
    return data


def load_source(args):
    """Complex, partition, slices and resolved config pieces from the mesh options."""
    if bool(args.gen) == bool(args.mesh):
        raise UsageError("give exactly one of --gen or --mesh")
    doc = None
    if args.gen:
        complex = parse_generator(args.gen)
        source = {"generator": args.gen}
    else:
        try:
            data = Path(args.mesh).read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read mesh file: {exc}") from exc
        doc = mesh.load_mesh_document(data)
        complex = doc.complex
        source = {"file": str(args.mesh)}
    if args.gt is not None:
        partition = partition_preset(complex, args.gt)
    elif doc is not None and doc.partition is not None:
        partition = doc.partition
    else:
        partition = partition_preset(complex, "none")
    slices = slice_preset(complex, partition, getattr(args, "slices", None), doc.slices if doc else None)
    return complex, partition, slices, doc, source


# -- output ---------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def render(command: str, config: dict, result: dict, exit_code: int, timestamp: bool) -> str:
    report = {"command": command, "version": __version__, "config": config, "result": result, "exit_code": exit_code}
    if timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _config(args, source: dict, **extra) -> dict:
    skip = {"func", "out", "no_timestamp", "threads", "gen", "mesh", "csv"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg.update(source)
    cfg.update(extra)
    return cfg


# -- commands -------------------------------------------------------------------------


def cmd_mesh(args):
    complex, partition, slices, doc, source = load_source(args)
    report = mesh.validate_admissible(complex, partition, slices, auto=not args.no_auto_slice)
    betti = complex.betti()
    result = {
        "dimension": complex.dim,
        "counts": [complex.count(q) for q in range(complex.dim + 1)],
        "boundary_facets": int(len(complex.boundary_facets)),
        "gamma_t_facets": int(len(partition.gamma_t)),
        "betti": betti,
        "euler_characteristic": int(sum((-1) ** q * complex.count(q) for q in range(complex.dim + 1))),
        "h": complex.mesh_size,
        "repaired_cells": doc.repaired_cells if doc else [],
        "admissibility": report.as_dict(),
    }
    if args.save:
        Path(args.save).write_bytes(mesh.save_mesh(complex, partition, report.slices))
    return "mesh", _config(args, source), result, EXIT_OK


def cmd_betti(args):
    complex, partition, _, _, source = load_source(args)
    integer = hodge.integer_betti(complex, partition)
    spectral = hodge.spectral_betti(complex, partition)
    dual = hodge.integer_betti(complex, partition.swapped())
    dims = hodge.betti_pair(complex, partition)
    result = {"dims": dims, "integer": integer, "spectral": spectral, "dual": dual}
    return "betti", _config(args, source), result, EXIT_OK


def _constants(complex, partition, slices, degrees, sharp):
    rep = spectra.estimate_constants(complex, partition, slices, degrees=degrees, sharp=sharp)
    return rep.as_dict()


def _csv_row(label: str, rep: dict) -> dict:
    row = {
        "mesh": label,
        "h": rep["mesh"]["h"],
        "cells": rep["mesh"]["cells"],
        **{k: rep.get(k) for k in ("c_p", "c_m", "c_ks", "c_kt", "c_k", "c1", "c2", "c_tilde")},
        "sharp_ratio": (rep["c_tilde"] / rep["c1"]) if rep.get("c_tilde") and rep.get("c1") else None,
        "harmonic_dims": ";".join(str(d) for d in rep["harmonic_dims"]),
    }
    return row


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else r[k])) for k in SWEEP_COLUMNS})
    return buf.getvalue()


def cmd_constants(args):
    complex, partition, slices, _, source = load_source(args)
    degrees = None if args.q is None else [args.q]
    result = _constants(complex, partition, slices, degrees, not args.no_sharp)
    if args.csv:
        Path(args.csv).write_text(_csv_text([_csv_row(source.get("generator", source.get("file")), result)]))
    return "constants", _config(args, source), result, EXIT_OK


def cmd_decompose(args):
    complex, partition, _, _, source = load_source(args)
    if args.cochain:
        try:
            data = json.loads(Path(args.cochain).read_text())
            q, values = int(data["degree"]), np.asarray(data["values"], dtype=float)
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"cochain file must hold {{\"degree\": q, \"values\": [...]}}: {exc}") from exc
        F = Cochain(complex, q, values)
    else:
        if args.q is None:
            raise UsageError("--q is required with a random cochain")
        q = args.q
        space = constrained_space(complex, partition, q)
        rng = np.random.default_rng(args.seed)
        F = space.prolong(rng.standard_normal(space.dim))
    split = hodge.hodge_decompose(complex, partition, q, F)
    result = split.as_dict()
    if args.parts_out:
        out = Path(args.parts_out)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("exact", "harmonic", "coexact"):
            part = getattr(split, name)
            (out / f"{name}.json").write_text(json.dumps({"degree": q, "values": part.values.tolist()}))
    return "decompose", _config(args, source), result, EXIT_OK


def cmd_verify(args):
    complex, partition, slices, _, source = load_source(args)
    if args.mu:
        if args.case != "i":
            raise UsageError("--mu applies to case i only")
        mu = mu_preset(complex, args.mu)
        rep = tensor.verify_media_variant(complex, partition, mu, args.samples, args.seed,
                                          eigen=not args.no_eigen, slack=args.slack)
    else:
        rep = tensor.verify_main_inequality(complex, partition, args.case, slices, args.samples, args.seed,
                                            eigen=not args.no_eigen, slack=args.slack)
    code = EXIT_OK if rep.passed else EXIT_VIOLATION
    return "verify", _config(args, source), rep.as_dict(), code


def cmd_sweep(args):
    if not args.gen_list:
        raise UsageError("sweep needs at least one --gen")
    rows = []
    reps = []
    for spec in args.gen_list:
        complex = parse_generator(spec)
        partition = partition_preset(complex, args.gt or "none")
        slices = slice_preset(complex, partition, args.slices, None)
        degrees = None if args.q is None else [args.q]
        rep = _constants(complex, partition, slices, degrees, not args.no_sharp)
        reps.append(rep)
        rows.append(_csv_row(spec, rep))
    if args.csv:
        Path(args.csv).write_text(_csv_text(rows))
    source = {"generators": list(args.gen_list)}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in {"func", "out", "no_timestamp", "threads", "gen_list", "csv"}}
    cfg.update(source)
    return "sweep", cfg, {"columns": SWEEP_COLUMNS, "rows": rows}, EXIT_OK


def cmd_schema(args):
    sys.stdout.write(json.dumps(report_schema(args.report), sort_keys=True, indent=2) + "\n")
    return None


# -- parser ----------------------------------------------------------------------------


def _mesh_options(p, slices=True):
    p.add_argument("--gen", help="generator: box:N,n or annulus:angular,radial")
    p.add_argument("--mesh", help="mesh JSON file")
    p.add_argument("--gt", help="Gamma_t preset: none, all, side:<x|y|z><+|->, inner, outer, angular:a0,a1")
    if slices:
        p.add_argument("--slices", help="slice preset: none, single, auto, halves (default: from mesh file)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kml", description="Mixed boundary Hodge decompositions and Korn-Maxwell constants.")
    parser.add_argument("--version", action="version", version=f"kml {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--out", help="report path (default stdout)")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp (byte-stable output)")
        p.add_argument("--threads", type=int, default=None, help="cap BLAS threads (also KML_THREADS)")

    p = sub.add_parser("mesh", help="generate/inspect a mesh and its admissibility")
    _mesh_options(p)
    p.add_argument("--save", help="write the mesh document here")
    p.add_argument("--no-auto-slice", action="store_true")
    common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("betti", help="harmonic dimensions by two routes")
    _mesh_options(p, slices=False)
    common(p)
    p.set_defaults(func=cmd_betti)

    p = sub.add_parser("constants", help="estimate all constants")
    _mesh_options(p)
    p.add_argument("--q", type=int, help="only this Poincare degree")
    p.add_argument("--no-sharp", action="store_true", help="skip the sharp mixed constant")
    p.add_argument("--csv", help="also write a CSV row here")
    common(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("decompose", help="Hodge split of a cochain")
    _mesh_options(p, slices=False)
    p.add_argument("--cochain", help="JSON {degree, values}")
    p.add_argument("--q", type=int, help="degree of a random cochain")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parts-out", help="directory for exact/harmonic/coexact cochain files")
    common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="sampled check of the mixed Korn-Maxwell inequality")
    _mesh_options(p)
    p.add_argument("--case", choices=tensor.CASES, default="i")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--mu", help="media variant: identity, scaled:<s>, varying or JSON file")
    p.add_argument("--no-eigen", action="store_true", help="skip the eigen-sharp oracle")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="refinement table (CSV)")
    p.add_argument("--gen", dest="gen_list", action="append", default=[], help="repeat per mesh, coarse to fine")
    p.add_argument("--gt", help="Gamma_t preset")
    p.add_argument("--slices", help="slice preset")
    p.add_argument("--q", type=int, help="only this Poincare degree")
    p.add_argument("--no-sharp", action="store_true")
    p.add_argument("--csv", help="CSV path")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schema", help="print the JSON schema of a report")
    p.add_argument("report", choices=sorted(RESULTS))
    p.set_defaults(func=cmd_schema)
    return parser


def _thread_limit(args):
    threads = getattr(args, "threads", None)
    if threads is None and os.environ.get("KML_THREADS"):
        try:
            threads = int(os.environ["KML_THREADS"])
        except ValueError as exc:
            raise UsageError("KML_THREADS must be an integer") from exc
    if threads is None:
        return contextlib.nullcontext()
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help/--version exit 0, parse errors exit 1
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        with _thread_limit(args):
            out = args.func(args)
    except (UsageError, MeshError, PreconditionError, ValueError) as exc:
        sys.stderr.write(f"kml: error: {exc}\n")
        return EXIT_USAGE
    except (SolverError, TopologyMismatchError) as exc:
        sys.stderr.write(f"kml: numerical failure: {exc}\n")
        diag = getattr(exc, "diagnostics", None)
        if diag:
            sys.stderr.write(json.dumps(_clean(diag), sort_keys=True) + "\n")
        return EXIT_NUMERICAL
    if out is None:
        return EXIT_OK
    command, config, result, code = out
    _write(render(command, config, result, code, not args.no_timestamp), args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
