"""Lowest-order Whitney forms: coboundary, mass matrices, constrained spaces.

A q-cochain carries one coefficient per q-simplex. The Whitney basis form of
the sorted simplex (i0, ..., iq) is

    phi = q! * sum_k (-1)^k lambda_{i_k} dlambda_{i_0} ^ ... (omit i_k) ... ^ dlambda_{i_q}

and all mass integrals are evaluated exactly with the barycentric moment
formula  int lambda_a lambda_b = vol (1 + [a == b]) / ((N + 1)(N + 2)).
"""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._linalg import spd_factor
from .errors import DegenerateCellError
from .mesh import BoundaryPartition, SimplicialComplex


@dataclass(frozen=True, eq=False)
class Cochain:
    complex: SimplicialComplex
    degree: int
    values: np.ndarray

    def __post_init__(self):
        if not 0 <= self.degree <= self.complex.dim:
            raise ValueError(f"degree {self.degree} outside 0..{self.complex.dim}")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.complex.count(self.degree),):
            raise ValueError(
                f"a {self.degree}-cochain needs {self.complex.count(self.degree)} values, got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, complex: SimplicialComplex, degree: int) -> "Cochain":
        return cls(complex, degree, np.zeros(complex.count(degree)))

    def __add__(self, other: "Cochain") -> "Cochain":
        _same_space(self, other)
        return Cochain(self.complex, self.degree, self.values + other.values)

    def __sub__(self, other: "Cochain") -> "Cochain":
        _same_space(self, other)
        return Cochain(self.complex, self.degree, self.values - other.values)

    def __mul__(self, scalar: float) -> "Cochain":
        return Cochain(self.complex, self.degree, self.values * scalar)

    __rmul__ = __mul__


def _same_space(u: Cochain, v: Cochain):
    if u.complex is not v.complex:
        raise ValueError("cochains live on different complexes")
    if u.degree != v.degree:
        raise ValueError(f"degree mismatch: {u.degree} vs {v.degree}")


@dataclass(frozen=True, eq=False)
class FormOperator:
    matrix: sp.csr_matrix
    row_degree: int
    col_degree: int
    kind: str

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        if isinstance(other, Cochain):
            if other.degree != self.col_degree:
                raise ValueError(f"operator expects degree {self.col_degree}, got {other.degree}")
            return Cochain(other.complex, self.row_degree, self.matrix @ other.values)
        return self.matrix @ other

    def to_coo_text(self) -> str:
        """``row col value`` lines (0-based), preceded by a shape header."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        buf = io.StringIO()
        buf.write(f"# {self.kind} {self.row_degree}<-{self.col_degree} shape {coo.shape[0]} {coo.shape[1]}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            buf.write(f"{r} {c} {v!r}\n")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class ConstrainedSpace:
    """Free/constrained split of the q-cochains.

    ``side == "d"`` removes the simplices in closure(Gamma_t). ``side ==
    "delta"`` keeps all DOFs (the normal condition on Gamma_n is natural)
    and only records ``marked``, the Gamma_n facets.
    """

    complex: SimplicialComplex
    degree: int
    side: str
    free: np.ndarray
    constrained: np.ndarray
    marked: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.free)

    @property
    def prolongation(self) -> sp.csr_matrix:
        n = self.complex.count(self.degree)
        return sp.csr_matrix((np.ones(self.dim), (self.free, np.arange(self.dim))), shape=(n, self.dim))

    def prolong(self, free_values) -> Cochain:
        free_values = np.asarray(free_values, dtype=float)
        full = np.zeros(self.complex.count(self.degree))
        full[self.free] = free_values
        return Cochain(self.complex, self.degree, full)

    def restrict(self, u: Cochain | np.ndarray) -> np.ndarray:
        values = u.values if isinstance(u, Cochain) else np.asarray(u)
        return values[..., self.free]

    def contains(self, u: Cochain | np.ndarray, tol: float = 0.0) -> bool:
        values = u.values if isinstance(u, Cochain) else np.asarray(u)
        if len(self.constrained) == 0:
            return True
        return bool(np.all(np.abs(values[..., self.constrained]) <= tol))


# -- assembly ---------------------------------------------------------------


def coboundary(complex: SimplicialComplex, q: int) -> FormOperator:
    """Integer signed incidence d_q : C^q -> C^{q+1}."""
    n = complex.dim
    if q == n:
        raise ValueError(f"d of a top-degree form is zero; coboundary needs q < {n}")
    if not 0 <= q < n:
        raise ValueError(f"coboundary needs 0 <= q < {n}, got {q}")
    key = ("d", q)
    if key not in complex._cache:
        complex._cache[key] = FormOperator(complex.incidence(q), q + 1, q, "coboundary")
    return complex._cache[key]


def barycentric_gradients(complex: SimplicialComplex) -> np.ndarray:
    """(n_cells, N + 1, N) constant gradients of the barycentric coordinates."""
    key = "bary_grad"
    if key not in complex._cache:
        x = complex.vertices[complex.cells]
        edges = x[:, 1:] - x[:, :1]
        scale = max(complex.volumes.max(), 1e-300)
        bad = np.flatnonzero(complex.volumes <= 1e-14 * scale)
        if len(bad):
            raise DegenerateCellError(bad[0], complex.signed_volumes[bad[0]])
        inv = np.linalg.inv(edges)  # columns are grad lambda_1..N
        grads = np.empty((complex.n_cells, complex.dim + 1, complex.dim))
        grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        complex._cache[key] = grads
    return complex._cache[key]


def _local_faces(n: int, q: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(n + 1), q + 1))


def _wedge_gram(grads: np.ndarray, a: tuple, b: tuple) -> np.ndarray:
    """Pointwise inner product of dlambda_a and dlambda_b (wedges), per cell."""
    if len(a) == 0:
        return np.ones(grads.shape[0])
    ga = grads[:, list(a), :]
    gb = grads[:, list(b), :]
    return np.linalg.det(ga @ np.transpose(gb, (0, 2, 1)))


def local_mass_matrices(complex: SimplicialComplex, q: int) -> np.ndarray:
    """(n_cells, n_local, n_local) exact Whitney mass matrices."""
    n = complex.dim
    grads = barycentric_gradients(complex)
    faces = _local_faces(n, q)
    vol = complex.volumes
    moment = vol / ((n + 1) * (n + 2))
    scale = math.factorial(q) ** 2
    out = np.zeros((complex.n_cells, len(faces), len(faces)))
    for i, fa in enumerate(faces):
        for j, fb in enumerate(faces):
            if j < i:
                continue
            acc = np.zeros(complex.n_cells)
            for k, a in enumerate(fa):
                rest_a = fa[:k] + fa[k + 1:]
                for l, b in enumerate(fb):
                    rest_b = fb[:l] + fb[l + 1:]
                    sign = (-1) ** (k + l)
                    acc += sign * moment * (2.0 if a == b else 1.0) * _wedge_gram(grads, rest_a, rest_b)
            out[:, i, j] = out[:, j, i] = scale * acc
    return out


def _scatter(complex: SimplicialComplex, q: int, local: np.ndarray) -> sp.csr_matrix:
    idx = complex.cell_faces[q]
    m = idx.shape[1]
    rows = np.repeat(idx, m, axis=1).ravel()
    cols = np.tile(idx, (1, m)).ravel()
    size = complex.count(q)
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(size, size))


def mass_matrix(complex: SimplicialComplex, q: int) -> FormOperator:
    """L2 Gram matrix of the Whitney q-forms (SPD, verified by factorization)."""
    if not 0 <= q <= complex.dim:
        raise ValueError(f"mass matrix needs 0 <= q <= {complex.dim}, got {q}")
    key = ("M", q)
    if key not in complex._cache:
        m = _scatter(complex, q, local_mass_matrices(complex, q))
        m = ((m + m.T) * 0.5).tocsr()
        spd_factor(m, what=f"mass matrix of degree {q}")
        complex._cache[key] = FormOperator(m, q, q, "mass")
    return complex._cache[key]


def mass_solver(complex: SimplicialComplex, q: int):
    key = ("Minv", q)
    if key not in complex._cache:
        complex._cache[key] = spd_factor(mass_matrix(complex, q).matrix, what=f"mass matrix of degree {q}")
    return complex._cache[key]


def stiffness_matrix(complex: SimplicialComplex, q: int) -> FormOperator:
    """d_q^T M_{q+1} d_q: the form (du, dv)."""
    d = coboundary(complex, q).matrix
    k = (d.T @ mass_matrix(complex, q + 1).matrix @ d).tocsr()
    return FormOperator(k, q, q, "stiffness")


def constrained_space(complex: SimplicialComplex, partition: BoundaryPartition, q: int, side: str = "d") -> ConstrainedSpace:
    if side not in ("d", "delta"):
        raise ValueError(f"side must be 'd' or 'delta', got {side!r}")
    if partition.complex is not complex:
        raise ValueError("partition belongs to a different complex")
    total = np.arange(complex.count(q))
    if side == "d":
        constrained = partition.closure(q)
        marked = partition.gamma_t
    else:
        constrained = np.zeros(0, dtype=np.int64)
        marked = partition.gamma_n
    free = np.setdiff1d(total, constrained)
    return ConstrainedSpace(complex, q, side, free, constrained, marked)


def apply_weak_codifferential(complex: SimplicialComplex, partition: BoundaryPartition, q: int, H: Cochain) -> Cochain:
    """Adjoint of d on the constrained (q-1)-space: P^T M_{q-1} P (delta H) = P^T d^T M_q H.

    The result vanishes on closure(Gamma_t); ``partition=None`` uses all DOFs.
    """
    if not 1 <= q <= complex.dim:
        raise ValueError(f"codifferential needs 1 <= q <= {complex.dim}, got {q}")
    if H.degree != q:
        raise ValueError(f"expected a {q}-cochain, got degree {H.degree}")
    if partition is not None and partition.complex is not complex:
        raise ValueError("partition belongs to a different complex")
    d = coboundary(complex, q - 1).matrix
    rhs = d.T @ (mass_matrix(complex, q).matrix @ H.values)
    if partition is None or partition.is_empty:
        return Cochain(complex, q - 1, mass_solver(complex, q - 1).solve(rhs))
    space = constrained_space(complex, partition, q - 1)
    out = np.zeros(complex.count(q - 1))
    if space.dim:
        p = space.prolongation
        m = (p.T @ mass_matrix(complex, q - 1).matrix @ p).tocsc()
        out[space.free] = spd_factor(m, f"constrained {q - 1}-form mass matrix").solve(rhs[space.free])
    return Cochain(complex, q - 1, out)


def l2_inner(u: Cochain, v: Cochain) -> float:
    _same_space(u, v)
    return float(u.values @ (mass_matrix(u.complex, u.degree).matrix @ v.values))


def l2_norm(u: Cochain) -> float:
    return math.sqrt(max(l2_inner(u, u), 0.0))


# -- pointwise evaluation -----------------------------------------------------


def proxy_components(n: int, q: int) -> list[tuple[tuple[int, int, ...], int]]:
    """Components of the proxy vector as (coordinate index set, sign).

    Degree 1 gives the vector (dx_1, ..., dx_N); degree 2 with N = 3 gives the
    classical (23, 31, 12) ordering, so the proxy of d of a 1-form is curl;
    every other case uses lexicographic index sets with sign +1.
    """
    if n == 3 and q == 2:
        return [((1, 2), 1), ((0, 2), -1), ((0, 1), 1)]
    return [(c, 1) for c in itertools.combinations(range(n), q)]


def whitney_form_coefficients(grads: np.ndarray, face: tuple, bary: np.ndarray) -> dict:
    """Coefficients of one local Whitney form at a barycentric point.

    ``grads`` is the (N + 1, N) barycentric-gradient array of one cell.
    Returns {coordinate index set: coefficient of dx_I}.
    """
    n = grads.shape[1]
    q = len(face) - 1
    out = {}
    for comp in itertools.combinations(range(n), q):
        acc = 0.0
        for k, a in enumerate(face):
            rest = face[:k] + face[k + 1:]
            minor = np.linalg.det(grads[np.ix_(list(rest), list(comp))]) if q else 1.0
            acc += (-1) ** k * bary[a] * minor
        out[comp] = math.factorial(q) * acc
    return out


def evaluate_proxy(complex: SimplicialComplex, u: Cochain, cell: int, bary) -> float | np.ndarray:
    """Value of the Whitney interpolant's proxy at a barycentric point of a cell."""
    if u.complex is not complex:
        raise ValueError("cochain belongs to a different complex")
    if not 0 <= cell < complex.n_cells:
        raise IndexError(f"cell {cell} out of range 0..{complex.n_cells - 1}")
    n, q = complex.dim, u.degree
    bary = np.asarray(bary, dtype=float)
    if bary.shape != (n + 1,) or np.any(bary < -1e-12) or abs(bary.sum() - 1) > 1e-12:
        raise ValueError("point must be given by N + 1 nonnegative barycentric coordinates summing to 1")
    grads = barycentric_gradients(complex)[cell]
    faces = _local_faces(n, q)
    idx = complex.cell_faces[q][cell]
    comps = proxy_components(n, q)
    value = np.zeros(len(comps))
    for face, g in zip(faces, idx):
        coeff = whitney_form_coefficients(grads, face, bary)
        for j, (c, sign) in enumerate(comps):
            value[j] += sign * u.values[g] * coeff[c]
    if q == 0 or q == n:
        return float(value[0])
    return value


def integrate_top(complex: SimplicialComplex, u: Cochain) -> float:
    """Integral of an N-form over the domain (sum of cell coefficients, oriented)."""
    if u.degree != complex.dim:
        raise ValueError("integrate_top needs an N-cochain")
    return float(np.sum(u.values * complex.orientation))

