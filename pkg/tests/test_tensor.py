import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kml.errors import PreconditionError
from kml.forms import Cochain, apply_weak_codifferential, coboundary, constrained_space
from kml.mesh import annulus_halves, build_annulus_mesh, build_box_mesh
from kml.tensor import (
    SkewConstant,
    TensorField,
    TensorForms,
    grad_vector_field,
    helmholtz_split_tensor,
    pi_so,
    rigid_motion_projection,
    row_curl,
    so_basis,
    sym_skew_quadrature,
    verify_main_inequality,
    verify_media_variant,
)

from conftest import empty, full, side


def _affine_field(cx, a, b=None):
    """Whitney interpolant of the linear-in-x matrix field x -> A (exact line integrals)."""
    e = cx.simplices[1]
    t = cx.vertices[e[:, 1]] - cx.vertices[e[:, 0]]
    rows = np.asarray(a) @ t.T
    return TensorField(cx, rows)


def _vector(cx, fn):
    vals = np.array([fn(x) for x in cx.vertices]).T
    return [Cochain(cx, 0, row) for row in vals]


def _oracle_norms(t, points=None):
    """|T|^2, |sym T|^2, |skew T|^2 by a 7-point-per-cell reference rule (degree 5 in 2D)."""
    cx = t.complex
    from kml._quadrature import grundmann_moeller

    pts, w = grundmann_moeller(cx.dim, 2)
    out = np.zeros(3)
    for c in range(cx.n_cells):
        for p, wp in zip(pts, w):
            m = t.proxy(c, p)
            s, k = 0.5 * (m + m.T), 0.5 * (m - m.T)
            out += wp * cx.volumes[c] * np.array([np.sum(m * m), np.sum(s * s), np.sum(k * k)])
    return out


def test_grad_of_constant_is_zero(square4):
    t = grad_vector_field(_vector(square4, lambda x: [2.0, -1.0]))
    assert np.all(t.rows == 0)


def test_grad_of_skew_linear_field(square4):
    s = so_basis(2)[0] * 0.7
    t = grad_vector_field(_vector(square4, lambda x: s @ x))
    for cell in (0, 5, 31):
        np.testing.assert_allclose(t.proxy(cell, [0.2, 0.3, 0.5]), s, atol=1e-13)


def test_grad_proxy_is_p1_jacobian(square4, rng):
    vals = rng.standard_normal((2, square4.n_vertices))
    t = grad_vector_field([Cochain(square4, 0, r) for r in vals])
    for cell in (0, 9, 20):
        c = square4.cells[cell]
        x = square4.vertices[c]
        jac = np.linalg.solve(x[1:] - x[0], (vals[:, c[1:]] - vals[:, c[:1]]).T).T
        np.testing.assert_allclose(t.proxy(cell, [1 / 3] * 3), jac, atol=1e-12)


def test_curl_of_grad_vanishes(rng):
    cx = build_box_mesh(3, 2)
    # integer nodal values keep every sum exact, so Curl Grad vanishes bit for bit
    t = grad_vector_field([Cochain(cx, 0, rng.integers(-50, 50, cx.n_vertices)) for _ in range(3)])
    assert all(np.all(c.values == 0) for c in row_curl(t))
    t = grad_vector_field([Cochain(cx, 0, rng.standard_normal(cx.n_vertices)) for _ in range(3)])
    assert max(np.abs(c.values).max() for c in row_curl(t)) < 1e-13


def test_row_curl_stokes(square4):
    # row 0 proxy (-y/2, x/2) has curl 1, so each cell value is its area (with orientation)
    e = square4.simplices[1]
    x0, x1 = square4.vertices[e[:, 0]], square4.vertices[e[:, 1]]
    mid = 0.5 * (x0 + x1)
    t = x1 - x0
    line = -0.5 * mid[:, 1] * t[:, 0] + 0.5 * mid[:, 0] * t[:, 1]
    rows = np.vstack([line, np.zeros_like(line)])
    curl = row_curl(TensorField(square4, rows))[0].values
    np.testing.assert_allclose(curl * square4.orientation, square4.volumes, rtol=1e-12)


def test_constant_row_has_zero_curl(square4):
    t = _affine_field(square4, [[1.0, 2.0], [3.0, 4.0]])
    assert max(np.abs(c.values).max() for c in row_curl(t)) < 1e-14


def test_sym_skew_constants(square4):
    sym = sym_skew_quadrature(_affine_field(square4, [[1.0, 2.0], [2.0, 3.0]]))
    assert sym.norm_skew ** 2 <= 1e-14 * sym.norm ** 2
    s = np.array([[0.0, 1.5], [-1.5, 0.0]])
    skew = sym_skew_quadrature(_affine_field(square4, s))
    assert skew.norm_sym ** 2 <= 1e-14 * skew.norm ** 2
    assert skew.norm ** 2 == pytest.approx(np.sum(s * s) * square4.volume, rel=1e-12)


def test_sym_skew_matches_reference_quadrature(rng):
    cx = build_box_mesh(2, 3)
    t = TensorField(cx, rng.standard_normal((2, cx.count(1))))
    got = sym_skew_quadrature(t)
    ref = _oracle_norms(t)
    np.testing.assert_allclose([got.norm ** 2, got.norm_sym ** 2, got.norm_skew ** 2], ref, rtol=1e-11)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sym_skew_pythagoras(seed):
    cx = build_box_mesh(2, 3)
    t = TensorField(cx, np.random.default_rng(seed).standard_normal((2, cx.count(1))))
    q = sym_skew_quadrature(t)
    assert q.norm ** 2 == pytest.approx(q.norm_sym ** 2 + q.norm_skew ** 2, rel=1e-10)


def test_pi_so_examples(square4):
    s = np.array([[0.0, 0.8], [-0.8, 0.0]])
    np.testing.assert_allclose(pi_so(_affine_field(square4, s)).matrix, s, atol=1e-14)
    assert np.abs(pi_so(_affine_field(square4, [[1.0, 2.0], [2.0, -1.0]])).matrix).max() < 1e-14


def test_pi_so_linear_skew_part(square4):
    # Grad of a P1-interpolated quadratic field: the skew part changes from cell to cell
    vals = _vector(square4, lambda x: [x[0] * x[1] - 0.5 * x[1], 0.25 * x[0]])
    t = grad_vector_field(vals)
    # oracle: volume-weighted mean of the per-cell Jacobians
    mean = np.zeros((2, 2))
    for c, vol in zip(square4.cells, square4.volumes):
        x = square4.vertices[c]
        v = np.array([[r.values[i] for i in c] for r in vals])
        jac = np.linalg.solve(x[1:] - x[0], (v[:, 1:] - v[:, :1]).T).T
        mean += vol * jac
    mean /= square4.volume
    np.testing.assert_allclose(pi_so(t).matrix, 0.5 * (mean - mean.T), atol=1e-14)


def test_skew_constant_requires_exact_skew():
    with pytest.raises(ValueError):
        SkewConstant(np.array([[0.0, 1.0], [-1.0 + 1e-15, 0.0]]))


def test_rigid_motion_examples(square4, rng):
    s = np.array([[0.0, 0.4], [-0.4, 0.0]])
    b = np.array([1.0, -2.0])
    r = rigid_motion_projection(_vector(square4, lambda x: s @ x + b))
    np.testing.assert_allclose(r.skew.matrix, s, atol=1e-13)
    np.testing.assert_allclose(r.shift, b, atol=1e-13)
    sym = np.array([[1.0, 0.3], [0.3, -2.0]])
    r = rigid_motion_projection(_vector(square4, lambda x: sym @ x))
    assert np.abs(r.skew.matrix).max() < 1e-13
    np.testing.assert_allclose(r.shift, sym @ np.array([0.5, 0.5]), atol=1e-13)
    vals = [Cochain(square4, 0, rng.standard_normal(square4.n_vertices)) for _ in range(2)]
    r = rigid_motion_projection(vals)
    assert r.mean_residual <= 1e-10 and r.skew_residual <= 1e-10


def test_helmholtz_split_of_gradient(square4, rng):
    part = side(square4, 1, 0.0)
    s0 = constrained_space(square4, part, 0)
    t = grad_vector_field([s0.prolong(rng.standard_normal(s0.dim)) for _ in range(2)])
    split = helmholtz_split_tensor(t, part)
    np.testing.assert_allclose(split.closed.rows, t.rows, atol=1e-10)
    assert np.abs(split.coexact.rows).max() < 1e-10


def test_helmholtz_split_of_coexact_rows(square4, rng):
    part = full(square4)
    rows = [apply_weak_codifferential(square4, part, 2, Cochain(square4, 2, rng.standard_normal(square4.n_cells)))
            for _ in range(2)]
    t = TensorField(square4, np.array([r.values for r in rows]))
    split = helmholtz_split_tensor(t, part)
    assert np.abs(split.closed.rows).max() < 1e-10
    np.testing.assert_allclose(split.coexact.rows, t.rows, atol=1e-10)


def test_helmholtz_split_pythagoras(rng):
    ann = build_annulus_mesh(12, 2)
    part = empty(ann)
    t = TensorField(ann, rng.standard_normal((2, ann.count(1))))
    d = helmholtz_split_tensor(t, part).diagnostics
    assert d["pythagoras_residual"] <= 1e-8
    assert d["norm_curl_R"] <= 1e-8 * d["norm_T"]


def test_case_ii_prime_skew_equivalence(square4, rng):
    part = empty(square4)
    # positive: a constant skew field projects onto itself
    s = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.abs(pi_so(_affine_field(square4, s)).matrix - s).max() < 1e-14
    # negative: removing the mean skew part leaves S_T = 0, and S_T = 0 implies orthogonality to so(N)
    t = TensorField(square4, rng.standard_normal((2, square4.count(1))))
    st_ = pi_so(t).matrix
    t0 = t - _affine_field(square4, st_)
    assert np.abs(pi_so(t0).matrix).max() < 1e-13
    tf = TensorForms.of(square4, part)
    x = tf.to_free(t0)
    for b in so_basis(2):
        assert abs(float(tf.constant_field(b) @ (tf.mass @ x))) < 1e-12 * max(1.0, t.norm())


def test_verify_case_i_small(square4):
    rep = verify_main_inequality(square4, side(square4, 1, 0.0), "i", samples=200, seed=3)
    assert rep.passed
    assert all(v for k, v in rep.proof_chain.items() if k.endswith("_ok"))
    assert rep.max_ratio <= rep.bound


def test_verify_case_i_gradient_reduces_to_korn(square4, rng):
    from kml.spectra import korn_irrotational_constant

    part = side(square4, 1, 0.0)
    s0 = constrained_space(square4, part, 0)
    t = grad_vector_field([s0.prolong(rng.standard_normal(s0.dim)) for _ in range(2)])
    q = sym_skew_quadrature(t, part)
    assert t.norm() / q.norm_sym <= korn_irrotational_constant(square4, part) * (1 + 1e-8)


def test_verify_case_preconditions(square4):
    with pytest.raises(PreconditionError):
        verify_main_inequality(square4, empty(square4), "i", samples=10)
    with pytest.raises(PreconditionError):
        verify_main_inequality(square4, full(square4), "ii'", samples=10)
    with pytest.raises(PreconditionError):
        verify_main_inequality(square4, empty(square4), "ii", samples=10)
    ann = build_annulus_mesh(12, 2)
    with pytest.raises(PreconditionError):
        verify_main_inequality(ann, empty(ann), "ii'", samples=10)


def test_verify_case_ii_annulus_small():
    ann = build_annulus_mesh(12, 2)
    rep = verify_main_inequality(ann, empty(ann), "ii", slices=annulus_halves(ann), samples=100, seed=1)
    assert rep.passed


def test_media_scaling_monotone(square4):
    part = side(square4, 1, 0.0)
    n = square4.n_vertices
    base = verify_media_variant(square4, part, np.tile(np.eye(2), (n, 1, 1)), samples=100, seed=5, eigen=False)
    doubled = verify_media_variant(square4, part, np.tile(2 * np.eye(2), (n, 1, 1)), samples=100, seed=5, eigen=False)
    r1, r2 = np.array(base.ratios), np.array(doubled.ratios)
    assert np.all(r2 >= r1 / 2 * (1 - 1e-12))
    assert np.all(r2 <= r1 * (1 + 1e-12))


def test_media_singular_mu_rejected(square4):
    part = side(square4, 1, 0.0)
    mu = np.tile(np.eye(2), (square4.n_vertices, 1, 1))
    mu[7] = np.diag([1.0, 0.0])
    with pytest.raises(PreconditionError, match="det mu"):
        verify_media_variant(square4, part, mu, samples=10, seed=0)
