"""Orthogonal Hodge-Helmholtz splitting of constrained Whitney cochains.

Everything happens on the d-side complex  V^0 -> V^1 -> ... -> V^N  whose
q-th space drops the DOFs on closure(Gamma_t). The weak codifferential of
this complex (the M-adjoint of d) carries the natural condition on Gamma_n,
so its harmonic forms are the discrete Dirichlet-Neumann fields.

Projections are computed from the symmetric mixed Hodge-Laplace system at
degree k,

    [ -M_{k-1}        d^T M_k        0     ] [sigma]   [0]
    [ M_k d        d^T M_{k+1} d   M_k Hb  ] [  u  ] = [f]
    [   0            Hb^T M_k        0     ] [  p  ]   [0]

with Hb the harmonic basis at degree k. For the exact part of F at degree q
one solves at k = q - 1 with f = d^T M_q F (then u = E_d, sigma = 0); for the
coexact part one solves at k = q + 1 with f = M_{q+1} d F (then u = H_delta
and sigma = delta H_delta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _integer
from ._linalg import DENSE_LIMIT, kernel_and_gap, lu_factor, spd_factor
from .errors import PreconditionError, SolverError, TopologyMismatchError
from .forms import Cochain, coboundary, constrained_space, mass_matrix
from .mesh import BoundaryPartition, SimplicialComplex

SHIFT = -1e-3


def _partition_key(partition: BoundaryPartition) -> bytes:
    return partition.gamma_t.tobytes()


class ConstrainedComplex:
    """Free-DOF restriction of the Whitney complex for one boundary partition."""

    def __init__(self, complex: SimplicialComplex, partition: BoundaryPartition):
        if partition.complex is not complex:
            raise ValueError("partition belongs to a different complex")
        self.complex = complex
        self.partition = partition
        n = complex.dim
        self.spaces = [constrained_space(complex, partition, q, "d") for q in range(n + 1)]
        self.P = [s.prolongation for s in self.spaces]
        self.M = [(self.P[q].T @ mass_matrix(complex, q).matrix @ self.P[q]).tocsr() for q in range(n + 1)]
        self.d_int = [(self.P[q + 1].T @ coboundary(complex, q).matrix @ self.P[q]).tocsr() for q in range(n)]
        self.d = [m.astype(float) for m in self.d_int]
        self._msolve: dict = {}
        self._harmonic: dict = {}
        self._mixed: dict = {}
        self._gap: dict = {}

    @classmethod
    def of(cls, complex: SimplicialComplex, partition: BoundaryPartition) -> "ConstrainedComplex":
        key = ("constrained", _partition_key(partition))
        if key not in complex._cache:
            complex._cache[key] = cls(complex, partition)
        return complex._cache[key]

    @property
    def dim(self) -> int:
        return self.complex.dim

    def size(self, q: int) -> int:
        if q < 0 or q > self.dim:
            return 0
        return self.spaces[q].dim

    def mass_solve(self, q: int, rhs):
        if q not in self._msolve:
            self._msolve[q] = spd_factor(self.M[q], f"constrained mass matrix of degree {q}")
        return self._msolve[q].solve(np.asarray(rhs, dtype=float))

    # -- Hodge Laplacian --------------------------------------------------------

    def laplacian_apply(self, q: int, x: np.ndarray) -> np.ndarray:
        """L_q x = d^T M d x + M d delta x  on free DOFs (x may have columns)."""
        out = np.zeros_like(x, dtype=float)
        if q < self.dim:
            d = self.d[q]
            out += d.T @ (self.M[q + 1] @ (d @ x))
        if q > 0 and self.size(q - 1):
            d = self.d[q - 1]
            out += self.M[q] @ (d @ self.mass_solve(q - 1, d.T @ (self.M[q] @ x)))
        return out

    def laplacian_sparse_part(self, q: int):
        n = self.size(q)
        if q < self.dim:
            return (self.d[q].T @ self.M[q + 1] @ self.d[q]).tocsr()
        return sp.csr_matrix((n, n))

    def shift_solver(self, q: int, sigma: float = SHIFT):
        """(L_q - sigma M_q)^{-1} through the mixed block system (stays sparse)."""
        n_lo = self.size(q - 1) if q > 0 else 0
        a = self.laplacian_sparse_part(q) - sigma * self.M[q]
        if n_lo:
            dm = (self.M[q] @ self.d[q - 1]).tocsr()
            block = sp.bmat([[-self.M[q - 1], dm.T], [dm, a]], format="csc")
        else:
            block = sp.csc_matrix(a)
        lu = lu_factor(block, "shifted Hodge-Laplace system")

        def solve(x):
            x = np.asarray(x, dtype=float)
            rhs = np.concatenate([np.zeros(n_lo), x])
            return lu.solve(rhs)[n_lo:]

        solve.sigma = sigma
        return solve

    def spectrum(self, q: int, expected: int | None = None):
        """Kernel and first nonzero eigenpair of L_q x = lambda M_q x (cached)."""
        if q not in self._gap:
            n = self.size(q)
            kwargs = {}
            if n > DENSE_LIMIT:
                kwargs["shift_solve"] = self.shift_solver(q)
            self._gap[q] = kernel_and_gap(
                None, self.M[q], expected=expected, apply_a=lambda x, q=q: self.laplacian_apply(q, x), **kwargs
            )
        return self._gap[q]

    # -- integer topology --------------------------------------------------------

    def integer_betti(self) -> list[int]:
        ranks = [0] + [_integer.integer_rank(m) for m in self.d_int] + [0]
        return [self.size(q) - ranks[q] - ranks[q + 1] for q in range(self.dim + 1)]

    # -- harmonic fields ----------------------------------------------------------

    def harmonic(self, q: int) -> "HarmonicBasis":
        if q not in self._harmonic:
            self._harmonic[q] = _harmonic_basis(self, q)
        return self._harmonic[q]

    # -- mixed solves -------------------------------------------------------------

    def mixed(self, k: int) -> "_MixedSystem":
        if k not in self._mixed:
            self._mixed[k] = _MixedSystem(self, k)
        return self._mixed[k]


@dataclass
class HarmonicBasis:
    """M-orthonormal basis of the discrete harmonic Dirichlet-Neumann q-fields."""

    degree: int
    vectors: np.ndarray  # (n_free, dim), free coordinates
    space: object = field(repr=False)
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    threshold: float = 0.0
    integer_dim: int = 0

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def cochains(self) -> list[Cochain]:
        return [self.space.prolong(v) for v in self.vectors.T]


def _harmonic_basis(cc: ConstrainedComplex, q: int) -> HarmonicBasis:
    n = cc.size(q)
    expected = cc.integer_betti()[q]
    if n == 0:
        return HarmonicBasis(q, np.zeros((0, 0)), cc.spaces[q], integer_dim=expected)
    gap = cc.spectrum(q, expected=expected)
    vecs = gap.kernel
    if vecs.shape[1]:
        gram = vecs.T @ (cc.M[q] @ vecs)
        chol = np.linalg.cholesky(0.5 * (gram + gram.T))
        vecs = np.linalg.solve(chol, vecs.T).T
    return HarmonicBasis(q, vecs, cc.spaces[q], gap.kernel_values, gap.threshold, expected)


class _MixedSystem:
    """Factorized mixed Hodge-Laplace system at degree k."""

    def __init__(self, cc: ConstrainedComplex, k: int):
        self.cc = cc
        self.k = k
        n_lo = cc.size(k - 1) if k > 0 else 0
        n_k = cc.size(k)
        hb = cc.harmonic(k).vectors if n_k else np.zeros((0, 0))
        n_h = hb.shape[1]
        m_k = cc.M[k]
        a = cc.laplacian_sparse_part(k)
        blocks = [[None] * 3 for _ in range(3)]
        if n_lo:
            dm = (m_k @ cc.d[k - 1]).tocsr()
            blocks[0][0] = -cc.M[k - 1]
            blocks[0][1] = dm.T
            blocks[1][0] = dm
        blocks[1][1] = a if n_k else None
        if n_h:
            mh = sp.csr_matrix(m_k @ hb)
            blocks[1][2] = mh
            blocks[2][1] = mh.T
        sizes = [n_lo, n_k, n_h]
        keep = [i for i in range(3) if sizes[i]]
        grid = [[blocks[i][j] if blocks[i][j] is not None else sp.csr_matrix((sizes[i], sizes[j])) for j in keep] for i in keep]
        self.sizes = sizes
        self.matrix = sp.bmat(grid, format="csc") if keep else sp.csc_matrix((0, 0))
        self._lu = lu_factor(self.matrix, f"mixed Hodge-Laplace system of degree {k}")

    def solve(self, f: np.ndarray):
        """Returns (sigma, u, p, relative residual) for load vector(s) f."""
        n_lo, n_k, n_h = self.sizes
        f = np.asarray(f, dtype=float)
        shape = (n_lo,) + f.shape[1:]
        rhs = np.concatenate([np.zeros(shape), f, np.zeros((n_h,) + f.shape[1:])], axis=0)
        sol = self._lu.solve(rhs) if rhs.shape[0] else rhs
        r = self.matrix @ sol - rhs
        # one step of iterative refinement keeps residuals near machine precision
        if rhs.shape[0]:
            sol = sol - self._lu.solve(r)
            r = self.matrix @ sol - rhs
        scale = max(float(np.linalg.norm(rhs)), 1e-300)
        return sol[:n_lo], sol[n_lo:n_lo + n_k], sol[n_lo + n_k:], float(np.linalg.norm(r)) / scale


# -- public API -------------------------------------------------------------------


def _free_values(cc: ConstrainedComplex, F: Cochain) -> np.ndarray:
    if F.complex is not cc.complex:
        raise ValueError("cochain belongs to a different complex")
    space = cc.spaces[F.degree]
    if not space.contains(F):
        raise PreconditionError(
            f"cochain has nonzero values on {len(space.constrained)} constrained DOFs of closure(Gamma_t)"
        )
    return space.restrict(F)


def harmonic_space(complex: SimplicialComplex, partition: BoundaryPartition, q: int) -> HarmonicBasis:
    if not 0 <= q <= complex.dim:
        raise ValueError(f"degree {q} outside 0..{complex.dim}")
    basis = ConstrainedComplex.of(complex, partition).harmonic(q)
    if basis.dim != basis.integer_dim:
        raise TopologyMismatchError(
            f"eigen kernel dimension {basis.dim} != integer cohomology rank {basis.integer_dim} at degree {q}"
        )
    return basis


@dataclass
class ProjectionResult:
    potential: Cochain
    image: Cochain
    residual: float
    bounds: dict


def _poincare(cc: ConstrainedComplex, q: int) -> float | None:
    from .spectra import poincare_constant

    try:
        return poincare_constant(cc.complex, cc.partition, q)
    except SolverError:
        return None


def project_exact(complex: SimplicialComplex, partition: BoundaryPartition, q: int, F: Cochain,
                  check_bounds: bool = True) -> ProjectionResult:
    """E_d in V^{q-1} (minimum norm) with dE_d the M-orthogonal projection of F onto d V^{q-1}."""
    if q < 1 or F.degree != q:
        raise ValueError(f"project_exact needs degree q >= 1 matching F (q={q}, F.degree={F.degree})")
    cc = ConstrainedComplex.of(complex, partition)
    f = _free_values(cc, F)
    out = _project_exact_free(cc, q, f[:, None])
    e, de, res = out[0][:, 0], out[1][:, 0], out[2]
    potential = cc.spaces[q - 1].prolong(e)
    image = cc.spaces[q].prolong(de)
    bounds = _bounds(cc, q, q - 1, f, e, de, check_bounds)
    return ProjectionResult(potential, image, res, bounds)


def _project_exact_free(cc: ConstrainedComplex, q: int, f: np.ndarray):
    if q == 0 or cc.size(q - 1) == 0:
        return np.zeros((cc.size(q - 1), f.shape[1])), np.zeros_like(f), 0.0
    d = cc.d[q - 1]
    load = d.T @ (cc.M[q] @ f)
    _, u, _, res = cc.mixed(q - 1).solve(load)
    return u, d @ u, res


def project_coexact(complex: SimplicialComplex, partition: BoundaryPartition, q: int, F: Cochain,
                    check_bounds: bool = True) -> ProjectionResult:
    """H_delta in V^{q+1} with delta H_delta the M-orthogonal projection of F onto delta V^{q+1}."""
    if q > complex.dim - 1 or F.degree != q:
        raise ValueError(f"project_coexact needs degree q <= N-1 matching F (q={q}, F.degree={F.degree})")
    cc = ConstrainedComplex.of(complex, partition)
    f = _free_values(cc, F)
    h, dh, res = _project_coexact_free(cc, q, f[:, None])
    potential = cc.spaces[q + 1].prolong(h[:, 0])
    image = cc.spaces[q].prolong(dh[:, 0])
    bounds = _bounds(cc, q, q + 1, f, h[:, 0], dh[:, 0], check_bounds)
    return ProjectionResult(potential, image, res, bounds)


def _project_coexact_free(cc: ConstrainedComplex, q: int, f: np.ndarray):
    if q >= cc.dim or cc.size(q + 1) == 0:
        return np.zeros((cc.size(q + 1), f.shape[1])), np.zeros_like(f), 0.0
    load = cc.M[q + 1] @ (cc.d[q] @ f)
    sigma, u, _, res = cc.mixed(q + 1).solve(load)
    return u, sigma, res


def _norm(m, x) -> float:
    return math.sqrt(max(float(x @ (m @ x)), 0.0))


def _bounds(cc: ConstrainedComplex, q: int, pot_degree: int, f, pot, image, check: bool) -> dict:
    nf = _norm(cc.M[q], f)
    out = {
        "norm_F": nf,
        "norm_image": _norm(cc.M[q], image),
        "norm_potential": _norm(cc.M[pot_degree], pot) if cc.size(pot_degree) else 0.0,
        "image_bound_ok": _norm(cc.M[q], image) <= nf * (1 + 1e-10),
    }
    if check:
        c = _poincare(cc, pot_degree) if cc.size(pot_degree) else 0.0
        out["poincare_constant"] = c
        if c is not None:
            out["potential_bound"] = math.sqrt(1 + c * c) * nf
            out["potential_bound_ok"] = out["norm_potential"] <= out["potential_bound"] * (1 + 1e-6)
    return out


@dataclass
class HodgeSplit:
    F: Cochain
    exact: Cochain
    harmonic: Cochain
    coexact: Cochain
    exact_potential: Cochain | None
    coexact_potential: Cochain | None
    diagnostics: dict

    def as_dict(self) -> dict:
        return {"degree": self.F.degree, **self.diagnostics}


def _split_free(cc: ConstrainedComplex, q: int, f: np.ndarray):
    """Vectorized split of free-coordinate columns f into (E, dE, h, H, dH, residuals)."""
    e, de, r1 = _project_exact_free(cc, q, f)
    hpot, dh, r2 = _project_coexact_free(cc, q, f)
    harm = f - de - dh
    return e, de, harm, hpot, dh, max(r1, r2)


def hodge_decompose(complex: SimplicialComplex, partition: BoundaryPartition, q: int, F: Cochain,
                    check_bounds: bool = True) -> HodgeSplit:
    """F = dE_d + h + delta H_delta, all three parts M-orthogonal."""
    if F.degree != q:
        raise ValueError(f"F has degree {F.degree}, expected {q}")
    cc = ConstrainedComplex.of(complex, partition)
    f = _free_values(cc, F)
    e, de, harm, hpot, dh, res = _split_free(cc, q, f[:, None])
    e, de, harm, hpot, dh = e[:, 0], de[:, 0], harm[:, 0], hpot[:, 0], dh[:, 0]
    m = cc.M[q]
    nf = _norm(m, f)
    scale = max(nf, 1e-300)
    basis = harmonic_space(complex, partition, q)
    hv = basis.vectors
    coef = hv.T @ (m @ harm) if basis.dim else np.zeros(0)
    off_span = harm - hv @ coef if basis.dim else harm
    diag = {
        "norm_F": nf,
        "norm_exact": _norm(m, de),
        "norm_harmonic": _norm(m, harm),
        "norm_coexact": _norm(m, dh),
        "reconstruction_residual": _norm(m, f - de - harm - dh) / scale,
        "orthogonality": {
            "exact_harmonic": abs(float(de @ (m @ harm))) / scale**2,
            "exact_coexact": abs(float(de @ (m @ dh))) / scale**2,
            "harmonic_coexact": abs(float(harm @ (m @ dh))) / scale**2,
        },
        "pythagoras_residual": abs(nf**2 - _norm(m, de) ** 2 - _norm(m, harm) ** 2 - _norm(m, dh) ** 2) / scale**2,
        "harmonic_off_span": _norm(m, off_span) / scale,
        "harmonic_dimension": basis.dim,
        "solver_residual": res,
    }
    if q >= 1:
        diag["exact_bounds"] = _bounds(cc, q, q - 1, f, e, de, check_bounds)
    if q <= complex.dim - 1:
        diag["coexact_bounds"] = _bounds(cc, q, q + 1, f, hpot, dh, check_bounds)
    return HodgeSplit(
        F=F,
        exact=cc.spaces[q].prolong(de),
        harmonic=cc.spaces[q].prolong(harm),
        coexact=cc.spaces[q].prolong(dh),
        exact_potential=cc.spaces[q - 1].prolong(e) if q >= 1 else None,
        coexact_potential=cc.spaces[q + 1].prolong(hpot) if q < complex.dim else None,
        diagnostics=diag,
    )


def integer_betti(complex: SimplicialComplex, partition: BoundaryPartition) -> list[int]:
    """Ranks of the relative cohomology H^q(Omega, Gamma_t) by exact integer elimination."""
    return ConstrainedComplex.of(complex, partition).integer_betti()


def spectral_betti(complex: SimplicialComplex, partition: BoundaryPartition) -> list[int]:
    cc = ConstrainedComplex.of(complex, partition)
    expected = cc.integer_betti()
    return [
        (cc.spectrum(q, expected=expected[q]).kernel.shape[1] if cc.size(q) else 0)
        for q in range(complex.dim + 1)
    ]


def betti_pair(complex: SimplicialComplex, partition: BoundaryPartition) -> list[int]:
    """Harmonic dimensions per degree, asserted equal by eigen kernel and integer rank.

    Also checks the duality dim H^q(Omega, Gamma_t) = dim H^{N-q}(Omega, Gamma_n).
    """
    spectral = spectral_betti(complex, partition)
    exact = integer_betti(complex, partition)
    if spectral != exact:
        raise TopologyMismatchError(f"eigen kernel dimensions {spectral} != integer ranks {exact}")
    dual = integer_betti(complex, partition.swapped())
    if exact != dual[::-1]:
        raise TopologyMismatchError(f"duality violated: {exact} vs swapped {dual}")
    return exact
