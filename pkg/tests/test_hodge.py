import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kml.errors import PreconditionError
from kml.forms import Cochain, apply_weak_codifferential, coboundary, constrained_space, l2_inner, l2_norm
from kml.hodge import (
    betti_pair,
    harmonic_space,
    hodge_decompose,
    integer_betti,
    project_coexact,
    project_exact,
    spectral_betti,
)
from kml.mesh import build_annulus_mesh, build_box_mesh

from conftest import empty, full, side


def _float_rank_betti(cx, part):
    """Relative cohomology ranks from floating-point ranks of restricted incidence matrices."""
    frees = [constrained_space(cx, part, q).free for q in range(cx.dim + 1)]
    ranks = []
    for q in range(cx.dim):
        d = coboundary(cx, q).matrix.toarray()[np.ix_(frees[q + 1], frees[q])]
        ranks.append(np.linalg.matrix_rank(d) if d.size else 0)
    return [len(frees[q]) - (ranks[q] if q < cx.dim else 0) - (ranks[q - 1] if q else 0) for q in range(cx.dim + 1)]


def _random_free(cx, part, q, rng):
    space = constrained_space(cx, part, q)
    return space.prolong(rng.standard_normal(space.dim))


CONFIGS = [
    ("box", "all"),
    ("box", "none"),
    ("box", "bottom"),
    ("annulus", "none"),
    ("annulus", "outer"),
    ("box3", "bottom"),
]


def _config(mesh, gt):
    cx = {"box": lambda: build_box_mesh(2, 4), "annulus": lambda: build_annulus_mesh(12, 2),
          "box3": lambda: build_box_mesh(3, 2)}[mesh]()
    if gt == "all":
        return cx, full(cx)
    if gt == "none":
        return cx, empty(cx)
    if gt == "bottom":
        return cx, side(cx, 1, 0.0)
    r = np.linalg.norm(cx.vertices, axis=1).max()
    from kml.mesh import tag_boundary
    return cx, tag_boundary(cx, lambda x: np.linalg.norm(x) > 0.5 * (0.5 + r))


@pytest.mark.parametrize("mesh,gt", CONFIGS)
def test_betti_routes_agree_with_float_oracle(mesh, gt):
    cx, part = _config(mesh, gt)
    oracle = _float_rank_betti(cx, part)
    assert integer_betti(cx, part) == oracle
    assert spectral_betti(cx, part) == oracle
    assert betti_pair(cx, part) == oracle


def test_betti_examples():
    box = build_box_mesh(2, 4)
    ann = build_annulus_mesh(16, 2)
    assert betti_pair(box, full(box)) == [0, 0, 1]
    assert betti_pair(box, side(box, 1, 0.0)) == [0, 0, 0]
    assert betti_pair(ann, empty(ann)) == [1, 1, 0]


def test_harmonic_space_examples(square4):
    part = side(square4, 0, 0.0)
    assert harmonic_space(square4, part, 0).dim == 0
    assert harmonic_space(square4, part, 1).dim == 0
    basis = harmonic_space(square4, empty(square4), 0)
    assert basis.dim == 1
    v = basis.cochains()[0].values
    np.testing.assert_allclose(v, v[0], rtol=1e-8)


def test_harmonic_basis_orthonormal_and_closed(annulus):
    part = empty(annulus)
    basis = harmonic_space(annulus, part, 1)
    assert basis.dim == 1
    h = basis.cochains()[0]
    assert l2_norm(h) == pytest.approx(1.0, rel=1e-10)
    dh = coboundary(annulus, 1).matrix @ h.values
    assert np.abs(dh).max() < 1e-8
    assert np.abs(apply_weak_codifferential(annulus, part, 1, h).values).max() < 1e-8


@pytest.mark.parametrize("mesh,gt", CONFIGS)
@pytest.mark.parametrize("q", [0, 1, 2])
def test_split_invariants(mesh, gt, q, rng):
    cx, part = _config(mesh, gt)
    F = _random_free(cx, part, q, rng)
    split = hodge_decompose(cx, part, q, F)
    d = split.diagnostics
    assert d["reconstruction_residual"] <= 1e-10
    assert max(d["orthogonality"].values()) <= 1e-10
    assert d["pythagoras_residual"] <= 1e-10
    assert d["harmonic_off_span"] <= 1e-8
    assert d["harmonic_dimension"] == integer_betti(cx, part)[q]
    if q >= 1:
        assert d["exact_bounds"]["image_bound_ok"]
        assert d["exact_bounds"]["potential_bound_ok"]
    if q < cx.dim:
        assert d["coexact_bounds"]["image_bound_ok"]
    # the parts are closed/coclosed as required
    if q < cx.dim:
        dd = coboundary(cx, q).matrix @ (split.exact + split.harmonic).values
        assert np.abs(dd).max() <= 1e-8 * max(1.0, np.abs(F.values).max())
    recon = split.exact + split.harmonic + split.coexact
    np.testing.assert_allclose(recon.values, F.values, atol=1e-9)


def test_split_idempotent(rng):
    cx, part = _config("box", "bottom")
    F = _random_free(cx, part, 1, rng)
    split = hodge_decompose(cx, part, 1, F)
    for part_field, slot in ((split.exact, "exact"), (split.coexact, "coexact")):
        again = hodge_decompose(cx, part, 1, part_field)
        np.testing.assert_allclose(getattr(again, slot).values, part_field.values, atol=1e-9)


def test_exact_projection_of_gradient(rng):
    cx, part = _config("box", "bottom")
    u = _random_free(cx, part, 0, rng)
    F = Cochain(cx, 1, coboundary(cx, 0).matrix @ u.values)
    res = project_exact(cx, part, 1, F)
    np.testing.assert_allclose(res.image.values, F.values, atol=1e-9)
    harm = harmonic_space(*_config("annulus", "none"), 1).cochains()[0]
    ann, ann_part = harm.complex, empty(harm.complex)
    assert np.abs(project_exact(ann, ann_part, 1, harm).image.values).max() < 1e-8


def test_exact_projection_norm_bound(rng):
    cx = build_box_mesh(2, 8)
    part = full(cx)
    for _ in range(5):
        F = _random_free(cx, part, 1, rng)
        res = project_exact(cx, part, 1, F)
        assert l2_norm(res.image) <= l2_norm(F) * (1 + 1e-10)
        assert res.bounds["potential_bound_ok"]


def test_coexact_projection_examples(rng):
    cx, part = _config("box", "bottom")
    G = Cochain(cx, 2, rng.standard_normal(cx.count(2)))
    F = apply_weak_codifferential(cx, part, 2, G)
    np.testing.assert_allclose(project_coexact(cx, part, 1, F).image.values, F.values, atol=1e-9)
    u = _random_free(cx, part, 0, rng)
    dF = Cochain(cx, 1, coboundary(cx, 0).matrix @ u.values)
    assert np.abs(project_coexact(cx, part, 1, dF).image.values).max() < 1e-9


def test_coexact_orthogonal_to_harmonic(rng):
    ann = build_annulus_mesh(16, 2)
    part = empty(ann)
    F = Cochain(ann, 1, rng.standard_normal(ann.count(1)))
    image = project_coexact(ann, part, 1, F).image
    for h in harmonic_space(ann, part, 1).cochains():
        assert abs(l2_inner(image, h)) <= 1e-8 * l2_norm(F)


def test_split_of_gradient_and_harmonic():
    cx = build_box_mesh(2, 4)
    part = full(cx)
    hat = np.zeros(cx.n_vertices)
    hat[constrained_space(cx, part, 0).free[0]] = 1.0
    F = Cochain(cx, 1, coboundary(cx, 0).matrix @ hat)
    split = hodge_decompose(cx, part, 1, F)
    np.testing.assert_allclose(split.exact.values, F.values, atol=1e-10)
    assert np.abs(split.harmonic.values).max() < 1e-10
    assert np.abs(split.coexact.values).max() < 1e-10
    ann = build_annulus_mesh(16, 2)
    h = harmonic_space(ann, empty(ann), 1).cochains()[0]
    split = hodge_decompose(ann, empty(ann), 1, h)
    np.testing.assert_allclose(split.harmonic.values, h.values, atol=1e-8)


def test_constrained_input_required(square4):
    F = Cochain(square4, 1, np.ones(square4.count(1)))
    with pytest.raises(PreconditionError):
        hodge_decompose(square4, full(square4), 1, F)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0, 1, 2]))
def test_split_property(seed, q):
    cx, part = _config("box", "bottom")
    F = _random_free(cx, part, q, np.random.default_rng(seed))
    d = hodge_decompose(cx, part, q, F, check_bounds=False).diagnostics
    assert d["reconstruction_residual"] <= 1e-10
    assert d["pythagoras_residual"] <= 1e-10
