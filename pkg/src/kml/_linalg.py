"""Sparse factorizations and small-eigenvalue solvers shared by the modules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

DENSE_LIMIT = 2500


def spd_factor(matrix, what: str = "matrix"):
    """Symmetric-pivot LU of an SPD matrix; all pivots positive or SolverError.

    With the diagonal pivot threshold at zero SuperLU keeps the symmetric
    fill-reducing ordering, so the factorization is a scaled Cholesky and a
    nonpositive pivot certifies that the matrix is not positive definite.
    """
    m = sp.csc_matrix(matrix, dtype=float)
    if m.shape[0] == 0:
        return _EmptySolver()
    try:
        lu = spla.splu(m, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SolverError(f"{what} is singular", {"reason": str(exc)}) from exc
    pivots = lu.U.diagonal()
    if np.any(pivots <= 0) or not np.array_equal(lu.perm_r, lu.perm_c):
        raise SolverError(f"{what} is not positive definite", {"min_pivot": float(pivots.min())})
    return lu


class _EmptySolver:
    def solve(self, rhs):
        return np.zeros_like(np.asarray(rhs, dtype=float))


def lu_factor(matrix, what: str = "system"):
    m = sp.csc_matrix(matrix, dtype=float)
    if m.shape[0] == 0:
        return _EmptySolver()
    try:
        return spla.splu(m)
    except RuntimeError as exc:
        raise SolverError(f"{what} is singular", {"reason": str(exc)}) from exc


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    largest: float
    method: str


def _dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)


def _residuals(apply_a, b, values, vectors):
    if vectors.shape[1] == 0:
        return np.zeros(0)
    av = apply_a(vectors)
    bv = b @ vectors
    num = np.linalg.norm(av - bv * values, axis=0)
    return num / np.maximum(np.linalg.norm(vectors, axis=0), 1e-300)


def smallest_eigenpairs(a, b, count: int, *, apply_a=None, shift_solve=None, largest=None) -> EigenResult:
    """Smallest ``count`` eigenpairs of a x = lambda b x (b SPD), b-orthonormal.

    ``a`` may be a matrix or, together with ``apply_a``, only a shape holder.
    ``shift_solve(rhs)`` must apply (a - sigma b)^{-1} for the negative shift
    returned by ``shift_solve.sigma``; it is only used on the sparse path.
    """
    n = b.shape[0]
    count = min(count, n)
    if apply_a is None:
        def apply_a(x, _a=a):
            return _a @ x
    if n == 0 or count == 0:
        return EigenResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0), 0.0, "empty")
    if n <= DENSE_LIMIT:
        ad = _dense(a) if a is not None else apply_a(np.eye(n))
        ad = 0.5 * (ad + ad.T)
        bd = _dense(b)
        vals, vecs = sla.eigh(ad, bd)
        res = _residuals(apply_a, b, vals[:count], vecs[:, :count])
        return EigenResult(vals[:count], vecs[:, :count], res, float(vals[-1]), "dense")

    if shift_solve is None:
        raise SolverError("sparse eigen solve needs a shift-invert operator", {"n": n})
    op = spla.LinearOperator((n, n), matvec=shift_solve, dtype=float)
    v0 = np.cos(np.arange(1, n + 1) * 0.7548776662466927)
    try:
        vals, vecs = spla.eigsh(
            spla.LinearOperator((n, n), matvec=lambda x: apply_a(x[:, None])[:, 0], dtype=float),
            k=count, M=b, sigma=shift_solve.sigma, which="LM", OPinv=op, v0=v0, tol=1e-12, maxiter=20 * n,
        )
    except spla.ArpackError as exc:
        raise SolverError("shift-invert Lanczos failed", {"reason": str(exc), "k": count}) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    gram = vecs.T @ (b @ vecs)
    chol = np.linalg.cholesky(0.5 * (gram + gram.T))
    vecs = np.linalg.solve(chol, vecs.T).T
    if largest is None:
        largest = _largest_eigenvalue(apply_a, b, n)
    res = _residuals(apply_a, b, vals, vecs)
    return EigenResult(vals, vecs, res, float(largest), "shift-invert")


def _largest_eigenvalue(apply_a, b, n: int) -> float:
    b_lu = spd_factor(b, "mass")
    op = spla.LinearOperator((n, n), matvec=lambda x: b_lu.solve(apply_a(x[:, None])[:, 0]), dtype=float)
    v0 = np.cos(np.arange(1, n + 1) * 0.5698402909980532)
    val = spla.eigs(op, k=1, which="LR", v0=v0, tol=1e-4, return_eigenvectors=False)
    return float(np.real(val[0]))


@dataclass
class SpectralGap:
    kernel: np.ndarray
    kernel_values: np.ndarray
    first_value: float | None
    first_vector: np.ndarray | None
    first_residual: float | None
    largest: float
    threshold: float
    method: str


def kernel_and_gap(a, b, *, expected: int | None = None, apply_a=None, shift_solve=None,
                   rel_threshold: float = 1e-9, want_gap: bool = True) -> SpectralGap:
    """Numerical kernel (eigenvalues <= rel_threshold * lambda_max) and first nonzero pair."""
    n = b.shape[0]
    if n == 0:
        return SpectralGap(np.zeros((0, 0)), np.zeros(0), None, None, None, 0.0, 0.0, "empty")
    count = (expected or 0) + 4
    while True:
        res = smallest_eigenpairs(a, b, count if n > DENSE_LIMIT else n, apply_a=apply_a, shift_solve=shift_solve)
        threshold = rel_threshold * max(abs(res.largest), 1e-300)
        zero = int(np.sum(res.values <= threshold))
        if zero < len(res.values) or len(res.values) >= n:
            break
        count *= 2
    kernel = res.vectors[:, :zero]
    if want_gap and zero < len(res.values):
        return SpectralGap(kernel, res.values[:zero], float(res.values[zero]), res.vectors[:, zero],
                           float(res.residuals[zero]), res.largest, threshold, res.method)
    return SpectralGap(kernel, res.values[:zero], None, None, None, res.largest, threshold, res.method)


class NegativeShiftSolver:
    """Callable applying (a - sigma b)^{-1} via a sparse LU (sigma < 0)."""

    def __init__(self, a, b, sigma: float):
        self.sigma = sigma
        self._lu = lu_factor(sp.csc_matrix(a - sigma * b), "shifted operator")

    def __call__(self, x):
        return self._lu.solve(np.asarray(x, dtype=float))
