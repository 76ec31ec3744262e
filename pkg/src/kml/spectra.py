"""Best discrete constants of the Poincare/Maxwell/Korn chain by eigenproblems.

Every constant is c = lambda_1^{-1/2}, where lambda_1 is the first eigenvalue
above a known kernel of a symmetric generalized eigenproblem A x = lambda B x.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from ._linalg import DENSE_LIMIT, NegativeShiftSolver, kernel_and_gap
from .errors import PreconditionError, SolverError
from .forms import barycentric_gradients, stiffness_matrix
from .hodge import ConstrainedComplex
from .mesh import (
    BoundaryPartition,
    SimplicialComplex,
    SliceSpec,
    _components,
    validate_admissible,
)

SHIFT = -1e-3


@dataclass
class EigenEstimate:
    """c = lambda^{-1/2}; ``residual`` is |A x - lambda B x| / |x| for the eigenvector."""

    constant: float
    eigenvalue: float
    residual: float
    kernel_dim: int
    size: int
    method: str

    def as_dict(self) -> dict:
        return asdict(self)


def _estimate(gap, expected_kernel: int | None, size: int, what: str) -> EigenEstimate:
    kdim = gap.kernel.shape[1]
    if expected_kernel is not None and kdim != expected_kernel:
        raise SolverError(
            f"{what}: kernel dimension {kdim} differs from the expected {expected_kernel}",
            {"kernel_values": gap.kernel_values.tolist(), "threshold": gap.threshold},
        )
    if gap.first_value is None:
        raise SolverError(f"{what}: no eigenvalue above the kernel", {"size": size})
    lam = gap.first_value
    return EigenEstimate(1.0 / math.sqrt(lam), lam, gap.first_residual, kdim, size, gap.method)


# -- Poincare / Maxwell ---------------------------------------------------------


def poincare_estimate(complex: SimplicialComplex, partition: BoundaryPartition, q: int) -> EigenEstimate:
    if not 0 <= q <= complex.dim:
        raise ValueError(f"degree {q} outside 0..{complex.dim}")
    cc = ConstrainedComplex.of(complex, partition)
    if cc.size(q) == 0:
        raise SolverError(f"no free DOFs at degree {q}", {"degree": q})
    expected = cc.integer_betti()[q]
    gap = cc.spectrum(q, expected=expected)
    return _estimate(gap, expected, cc.size(q), f"Hodge Laplacian of degree {q}")


def poincare_constant(complex: SimplicialComplex, partition: BoundaryPartition, q: int) -> float:
    """Best c with |E| <= c (|dE|^2 + |delta E|^2)^{1/2} for E orthogonal to harmonic fields."""
    return poincare_estimate(complex, partition, q).constant


def maxwell_constant(complex: SimplicialComplex, partition: BoundaryPartition) -> float:
    return poincare_constant(complex, partition, 1)


# -- Korn -------------------------------------------------------------------------


def vector_stiffness(complex: SimplicialComplex) -> sp.csr_matrix:
    """int |grad v|^2 for P1 vector fields, DOF index n * n_vertices + i."""
    k = stiffness_matrix(complex, 0).matrix
    return sp.block_diag([k] * complex.dim, format="csr")


def sym_stiffness(complex: SimplicialComplex) -> sp.csr_matrix:
    """int |sym grad v|^2 for P1 vector fields, assembled from constant cell gradients."""
    key = "K_sym"
    if key in complex._cache:
        return complex._cache[key]
    n, nv = complex.dim, complex.n_vertices
    g = barycentric_gradients(complex)  # (c, i, m)
    vol = complex.volumes
    gg = np.einsum("cim,cjm->cij", g, g)
    rows, cols, vals = [], [], []
    cells = complex.cells
    for a in range(n):
        for b in range(n):
            # 1/2 vol [delta_ab g_i . g_j + g_i[b] g_j[a]]
            local = 0.5 * vol[:, None, None] * np.einsum("ci,cj->cij", g[:, :, b], g[:, :, a])
            if a == b:
                local = local + 0.5 * vol[:, None, None] * gg
            rows.append(np.repeat(a * nv + cells, n + 1, axis=1).ravel())
            cols.append(np.tile(b * nv + cells, (1, n + 1)).ravel())
            vals.append(local.ravel())
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * nv, n * nv))
    m = ((m + m.T) * 0.5).tocsr()
    complex._cache[key] = m
    return m


def _vector_prolongation(complex: SimplicialComplex, groups: list, fixed: np.ndarray) -> sp.csr_matrix:
    """Map reduced DOFs to full P1 vector DOFs.

    Each vertex not in ``fixed`` and not grouped owns a DOF; each vertex group
    shares one DOF; vertices in ``fixed`` are zero. Repeated for every component.
    """
    nv = complex.n_vertices
    owner = np.full(nv, -1, dtype=np.int64)
    grouped = np.zeros(nv, dtype=bool)
    next_dof = 0
    for grp in groups:
        owner[grp] = next_dof
        grouped[grp] = True
        next_dof += 1
    fixed_mask = np.zeros(nv, dtype=bool)
    fixed_mask[np.asarray(fixed, dtype=np.int64)] = True
    for v in range(nv):
        if not grouped[v] and not fixed_mask[v]:
            owner[v] = next_dof
            next_dof += 1
    live = np.flatnonzero(owner >= 0)
    rows, cols = [], []
    for a in range(complex.dim):
        rows.append(a * nv + live)
        cols.append(a * next_dof + owner[live])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(complex.dim * nv, complex.dim * next_dof))


def _korn_solve(complex: SimplicialComplex, prolong: sp.csr_matrix, expected_kernel: int, what: str) -> EigenEstimate:
    if prolong.shape[1] == 0:
        raise PreconditionError(f"{what}: no interior DOFs")
    a = (prolong.T @ sym_stiffness(complex) @ prolong).tocsr()
    b = (prolong.T @ vector_stiffness(complex) @ prolong).tocsr()
    kwargs = {}
    if a.shape[0] > DENSE_LIMIT:
        kwargs["shift_solve"] = NegativeShiftSolver(a, b, SHIFT)
    gap = kernel_and_gap(a, b, expected=expected_kernel, **kwargs)
    return _estimate(gap, expected_kernel, a.shape[0], what)


def _closure_vertex_groups(complex: SimplicialComplex, facets: np.ndarray) -> list:
    """Vertex sets of the edge-connected components of the closure of a facet set."""
    if len(facets) == 0:
        return []
    verts = complex.faces_of(complex.dim - 1, facets, 0)
    edges = complex.simplices[1][complex.faces_of(complex.dim - 1, facets, 1)] if complex.dim > 1 else np.zeros((0, 2), int)
    nbr: dict[int, list[int]] = {int(v): [] for v in verts}
    for a, b in edges:
        nbr[int(a)].append(int(b))
        nbr[int(b)].append(int(a))
    comps = _components([int(v) for v in verts], lambda v: nbr[v])
    return [np.array(sorted(c), dtype=np.int64) for c in sorted(comps, key=min)]


def _rigid_kernel_dim(n: int) -> int:
    return n * (n - 1) // 2


def korn_standard_estimate(complex: SimplicialComplex, partition: BoundaryPartition) -> EigenEstimate:
    n = complex.dim
    if partition.is_empty:
        # pin vertex 0: the remaining kernel of sym grad is the rotations about it
        p = _vector_prolongation(complex, [], np.array([0]))
        return _korn_solve(complex, p, _rigid_kernel_dim(n), "Korn (no boundary condition)")
    fixed = partition.closure(0)
    p = _vector_prolongation(complex, [], fixed)
    return _korn_solve(complex, p, 0, "Korn (zero trace on Gamma_t)")


def korn_standard_constant(complex: SimplicialComplex, partition: BoundaryPartition) -> float:
    """Best c with |grad v| <= c |sym grad v| (v = 0 on Gamma_t, or grad v orthogonal to so(N))."""
    return korn_standard_estimate(complex, partition).constant


def korn_tangential_estimate(complex: SimplicialComplex, gamma_t: np.ndarray) -> EigenEstimate:
    """v constant on every connected component of closure(Gamma_t); constants factored out."""
    n = complex.dim
    if len(gamma_t) == 0:
        p = _vector_prolongation(complex, [], np.array([0]))
        return _korn_solve(complex, p, _rigid_kernel_dim(n), "Korn (no boundary condition)")
    groups = _closure_vertex_groups(complex, np.asarray(gamma_t))
    p = _vector_prolongation(complex, groups[1:], groups[0])
    return _korn_solve(complex, p, 0, "Korn (constant on Gamma_t components)")


def korn_tangential_constant(complex: SimplicialComplex, partition: BoundaryPartition) -> float:
    return korn_tangential_estimate(complex, partition.gamma_t).constant


def _piece_gamma_t(complex: SimplicialComplex, partition: BoundaryPartition, slices: SliceSpec, j: int,
                   sub: SimplicialComplex, vmap: np.ndarray) -> np.ndarray:
    patch = slices.gamma_t_patch(partition, j)
    if len(patch) == 0:
        return np.zeros(0, dtype=np.int64)
    local = np.full(complex.n_vertices, -1, dtype=np.int64)
    local[vmap] = np.arange(len(vmap))
    facets = np.sort(local[complex.simplices[complex.dim - 1][patch]], axis=1)
    return sub.lookup(sub.dim - 1, facets)


@dataclass
class IrrotationalKorn:
    constant: float
    per_slice: list
    slices: SliceSpec = field(repr=False)


def korn_irrotational_estimate(complex: SimplicialComplex, partition: BoundaryPartition,
                               slices: SliceSpec | None = None) -> IrrotationalKorn:
    if slices is None:
        report = validate_admissible(complex, partition)
        if not report.sliceable:
            raise PreconditionError("domain is not verified sliceable; provide a SliceSpec", )
        slices = report.slices
    problems = slices.check_partition(complex.n_cells)
    if problems:
        raise PreconditionError("; ".join(problems))
    per = []
    for j, cells in enumerate(slices.pieces):
        sub, vmap = complex.subcomplex(cells)
        gt = _piece_gamma_t(complex, partition, slices, j, sub, vmap)
        if not partition.is_empty and len(gt) == 0:
            raise PreconditionError(f"slice {j} does not touch Gamma_t although Gamma_t is not empty")
        if sub.betti()[1] != 0:
            raise PreconditionError(f"slice {j} is not simply connected")
        per.append(korn_tangential_estimate(sub, gt))
    return IrrotationalKorn(max(e.constant for e in per), per, slices)


def korn_irrotational_constant(complex: SimplicialComplex, partition: BoundaryPartition,
                               slices: SliceSpec | None = None) -> float:
    """max over slices of the per-slice Korn constant for gradients of piecewise potentials."""
    return korn_irrotational_estimate(complex, partition, slices).constant


# -- composites -----------------------------------------------------------------


def composite_constants(c_k: float, c_m: float) -> tuple[float, float]:
    """(c1, c2) = (max{sqrt2 c_k, c_m sqrt(1 + 2 c_k^2)}, sqrt2 max{c_k, c_m (1 + c_k)})."""
    if not (c_k > 0 and c_m > 0):
        raise ValueError(f"constants must be positive, got c_k={c_k}, c_m={c_m}")
    c1 = max(math.sqrt(2.0) * c_k, c_m * math.sqrt(1.0 + 2.0 * c_k * c_k))
    c2 = math.sqrt(2.0) * max(c_k, c_m * (1.0 + c_k))
    return c1, c2


# -- sharp mixed constant ----------------------------------------------------------


def sharp_mixed_estimate(complex: SimplicialComplex, partition: BoundaryPartition, mu=None,
                         deflate: bool = True) -> EigenEstimate:
    """c~ = lambda_1^{-1/2} for B x = lambda A x, A = |T|^2, B = |sym(mu T)|^2 + |Curl T|^2.

    For empty Gamma_t the constant skew fields form the kernel of B; they are
    deflated (so the constant bounds |T - S_T|) unless ``deflate`` is False.
    """
    from .tensor import TensorForms

    forms_ = TensorForms.of(complex, partition)
    a = forms_.mass
    b = (forms_.sym_form(mu) + forms_.curl).tocsr()
    expected = _rigid_kernel_dim(complex.dim) if partition.is_empty else 0
    kwargs = {}
    if a.shape[0] > DENSE_LIMIT:
        kwargs["shift_solve"] = NegativeShiftSolver(b, a, SHIFT)
    gap = kernel_and_gap(b, a, expected=expected, **kwargs)
    kdim = gap.kernel.shape[1]
    if kdim and (not deflate or not partition.is_empty):
        vec = gap.kernel[:, 0]
        skew = forms_.pi_so_free(vec)
        raise SolverError(
            "sym T and Curl T both vanish on a nonzero field (constant skew tensor)",
            {"eigenvector_skew_mean": skew.tolist(), "kernel_dim": kdim},
        )
    return _estimate(gap, expected, a.shape[0], "mixed sym/Curl form")


def sharp_mixed_constant(complex: SimplicialComplex, partition: BoundaryPartition, mu=None) -> float:
    return sharp_mixed_estimate(complex, partition, mu).constant


# -- report ------------------------------------------------------------------------


@dataclass
class ConstantsReport:
    c_pq: list
    c_p: float | None
    c_m: float | None
    c_ks: float | None
    c_kt: float | None
    c_k: float | None
    c1: float | None
    c2: float | None
    c_tilde: float | None
    c_tilde_summed_lower: float | None
    harmonic_dims: list
    eigen: dict
    mesh: dict
    slices: int
    messages: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def _try(fn, messages, label):
    try:
        return fn()
    except (SolverError, PreconditionError) as exc:
        messages.append(f"{label}: {exc}")
        return None


def estimate_constants(complex: SimplicialComplex, partition: BoundaryPartition, slices: SliceSpec | None = None,
                       degrees=None, sharp: bool = True) -> ConstantsReport:
    """All constants of the chain on one mesh (failures are reported, not raised)."""
    messages: list[str] = []
    eigen: dict = {}
    # c_m = c_{p,1} feeds the composites, so degree 1 is always estimated
    degrees = range(complex.dim + 1) if degrees is None else sorted(set(degrees) | {1})
    c_pq: list = [None] * (complex.dim + 1)
    for q in degrees:
        est = _try(lambda q=q: poincare_estimate(complex, partition, q), messages, f"c_p,{q}")
        if est is not None:
            c_pq[q] = est.constant
            eigen[f"c_p,{q}"] = est.as_dict()
    ks = _try(lambda: korn_standard_estimate(complex, partition), messages, "c_k,s")
    kt = _try(lambda: korn_tangential_estimate(complex, partition.gamma_t), messages, "c_k,t")
    irr = _try(lambda: korn_irrotational_estimate(complex, partition, slices), messages, "c_k")
    for name, est in (("c_k,s", ks), ("c_k,t", kt)):
        if est is not None:
            eigen[name] = est.as_dict()
    if irr is not None:
        eigen["c_k"] = [e.as_dict() for e in irr.per_slice]
    c_k = irr.constant if irr is not None else None
    c_m = c_pq[1] if complex.dim >= 1 else None
    c1 = c2 = None
    if c_k is not None and c_m is not None:
        c1, c2 = composite_constants(c_k, c_m)
    c_tilde = None
    if sharp:
        st = _try(lambda: sharp_mixed_estimate(complex, partition), messages, "c_tilde")
        if st is not None:
            c_tilde = st.constant
            eigen["c_tilde"] = st.as_dict()
    cc = ConstrainedComplex.of(complex, partition)
    return ConstantsReport(
        c_pq=c_pq,
        c_p=c_pq[0],
        c_m=c_m,
        c_ks=ks.constant if ks else None,
        c_kt=kt.constant if kt else None,
        c_k=c_k,
        c1=c1,
        c2=c2,
        c_tilde=c_tilde,
        c_tilde_summed_lower=c_tilde / math.sqrt(2.0) if c_tilde else None,
        harmonic_dims=cc.integer_betti(),
        eigen=eigen,
        mesh={"dimension": complex.dim, "h": complex.mesh_size, "cells": complex.n_cells,
              "vertices": complex.n_vertices, "gamma_t_facets": int(len(partition.gamma_t))},
        slices=len(irr.slices) if irr is not None else 0,
        messages=messages,
    )
