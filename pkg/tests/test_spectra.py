import math

import numpy as np
import pytest
import scipy.linalg as sla

from kml import _linalg, hodge, spectra
from kml.errors import PreconditionError, SolverError
from kml.forms import constrained_space, mass_matrix, stiffness_matrix
from kml.mesh import SliceSpec, annulus_halves, axis_halves, build_annulus_mesh, build_box_mesh
from kml.spectra import (
    composite_constants,
    estimate_constants,
    korn_irrotational_constant,
    korn_irrotational_estimate,
    korn_standard_constant,
    korn_tangential_constant,
    maxwell_constant,
    poincare_constant,
    sharp_mixed_estimate,
)

from conftest import empty, full, side


def _p1_gradients(cx):
    out = []
    for c in cx.cells:
        x = cx.vertices[c]
        coef = np.linalg.inv(np.hstack([np.ones((len(c), 1)), x]))
        out.append(coef[1:].T)  # (N+1, N)
    return np.array(out)


def _korn_oracle(cx, fixed):
    """Dense ratio |grad v|^2 / |sym grad v|^2 with v = 0 at ``fixed`` vertices."""
    n, nv = cx.dim, cx.n_vertices
    g = _p1_gradients(cx)
    vol = cx.volumes
    size = n * nv
    ks = np.zeros((size, size))
    kf = np.zeros((size, size))
    for c, gc, v in zip(cx.cells, g, vol):
        # basis e_a phi_i: grad = e_a (x) g_i
        idx = [a * nv + i for a in range(n) for i in c]
        grads = []
        for a in range(n):
            for i in range(n + 1):
                m = np.zeros((n, n))
                m[a] = gc[i]
                grads.append(m)
        for p, gp in zip(idx, grads):
            for r, gr in zip(idx, grads):
                kf[p, r] += v * np.sum(gp * gr)
                ks[p, r] += v * np.sum(0.5 * (gp + gp.T) * 0.5 * (gr + gr.T))
    free = [a * nv + i for a in range(n) for i in range(nv) if i not in set(fixed)]
    lam = sla.eigh(ks[np.ix_(free, free)], kf[np.ix_(free, free)], eigvals_only=True)
    return lam


def test_composite_examples():
    c1, c2 = composite_constants(1.0, 1.0)
    assert c1 == pytest.approx(math.sqrt(3), abs=1e-12)
    assert c2 == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    c1, _ = composite_constants(math.sqrt(2), 1.0)
    assert c1 == pytest.approx(math.sqrt(5), abs=1e-12)
    with pytest.raises(ValueError):
        composite_constants(0.0, 1.0)
    with pytest.raises(ValueError):
        composite_constants(1.0, -1.0)


def test_poincare_matches_dense_oracle():
    cx = build_box_mesh(2, 6)
    part = full(cx)
    free = constrained_space(cx, part, 0).free
    k = stiffness_matrix(cx, 0).matrix.toarray()[np.ix_(free, free)]
    m = mass_matrix(cx, 0).matrix.toarray()[np.ix_(free, free)]
    lam = sla.eigh(k, m, eigvals_only=True)[0]
    assert poincare_constant(cx, part, 0) == pytest.approx(lam ** -0.5, rel=1e-10)


def test_poincare_dirichlet_and_neumann_limits():
    target_d = 1 / (math.sqrt(2) * math.pi)
    target_n = 1 / math.pi
    cx = build_box_mesh(2, 16)
    assert poincare_constant(cx, full(cx), 0) == pytest.approx(target_d, rel=0.02)
    assert poincare_constant(cx, empty(cx), 0) == pytest.approx(target_n, rel=0.02)


def test_poincare_sweep_monotone_and_converging():
    target = 1 / (math.sqrt(2) * math.pi)
    values = []
    for n in (4, 8, 16):
        cx = build_box_mesh(2, n)
        values.append(poincare_constant(cx, full(cx), 0))
    errs = [abs(v - target) for v in values]
    assert errs[0] > errs[1] > errs[2]
    assert math.log2(errs[1] / errs[2]) > 1.5


def test_maxwell_constant_positive(square4):
    assert maxwell_constant(square4, side(square4, 1, 0.0)) > 0


@pytest.mark.parametrize("mesh", [(2, 4), (2, 6), (3, 2), "annulus"])
def test_korn_standard_full_boundary_at_most_sqrt2(mesh):
    cx = build_annulus_mesh(12, 2) if mesh == "annulus" else build_box_mesh(*mesh)
    assert korn_standard_constant(cx, full(cx)) <= math.sqrt(2) + 1e-8


def test_korn_standard_matches_oracle():
    cx = build_box_mesh(2, 3)
    part = side(cx, 0, 0.0)
    fixed = part.closure(0).tolist()
    lam = _korn_oracle(cx, fixed)[0]
    c = korn_standard_constant(cx, part)
    assert c == pytest.approx(lam ** -0.5, rel=1e-9)
    assert c > 1


def test_korn_no_interior_dofs():
    cx = build_box_mesh(2, 1)
    with pytest.raises(PreconditionError, match="no interior DOFs"):
        korn_standard_constant(cx, full(cx))


def test_korn_empty_gamma_t_has_rotation_kernel():
    cx = build_box_mesh(2, 3)
    est = spectra.korn_standard_estimate(cx, empty(cx))
    assert est.kernel_dim == 1
    lam = _korn_oracle(cx, [0])
    assert abs(lam[0]) < 1e-10
    assert est.constant == pytest.approx(lam[1] ** -0.5, rel=1e-8)


def test_tangential_korn_below_standard(square4):
    part = side(square4, 1, 0.0)
    assert korn_tangential_constant(square4, part) <= korn_standard_constant(square4, part) * (1 + 1e-10)
    assert korn_tangential_constant(square4, part) >= 1 - 1e-12


def test_irrotational_single_slice_equals_tangential(square4):
    part = side(square4, 1, 0.0)
    assert korn_irrotational_constant(square4, part, SliceSpec.single(square4)) == pytest.approx(
        korn_tangential_constant(square4, part), rel=1e-12
    )


def test_irrotational_two_slices_is_max(square4):
    part = side(square4, 1, 0.0)
    slices = axis_halves(square4, 0, 0.5)
    irr = korn_irrotational_estimate(square4, part, slices)
    per = []
    for j, cells in enumerate(slices.pieces):
        sub, _ = square4.subcomplex(cells)
        bottom = side(sub, 1, 0.0)
        per.append(korn_tangential_constant(sub, bottom))
    assert [e.constant for e in irr.per_slice] == pytest.approx(per, rel=1e-12)
    assert irr.constant == pytest.approx(max(per), rel=1e-12)


def test_irrotational_annulus_halves():
    ann = build_annulus_mesh(16, 2)
    c = korn_irrotational_constant(ann, empty(ann), annulus_halves(ann))
    assert math.isfinite(c) and c >= 1


def test_irrotational_rejects_slice_without_gamma_t(square4):
    part = side(square4, 1, 0.0)
    with pytest.raises(PreconditionError):
        korn_irrotational_constant(square4, part, axis_halves(square4, 1, 0.5))


def test_sharp_without_deflation_names_skew_eigenvector(square4):
    with pytest.raises(SolverError) as exc:
        sharp_mixed_estimate(square4, empty(square4), deflate=False)
    assert "eigenvector_skew_mean" in exc.value.diagnostics


def test_estimate_constants_report(square4):
    rep = estimate_constants(square4, side(square4, 1, 0.0))
    assert rep.messages == []
    assert rep.c1 == pytest.approx(composite_constants(rep.c_k, rep.c_m)[0])
    assert rep.harmonic_dims == [0, 0, 0]
    assert rep.c_tilde <= math.sqrt(2) * rep.c1


def test_sparse_path_matches_dense(monkeypatch):
    cx = build_box_mesh(2, 8)
    part = side(cx, 1, 0.0)
    dense = [poincare_constant(cx, part, q) for q in range(3)]
    dense_k = korn_standard_constant(cx, part)
    for mod in (_linalg, hodge, spectra):
        monkeypatch.setattr(mod, "DENSE_LIMIT", 10)
    cx2 = build_box_mesh(2, 8)
    part2 = side(cx2, 1, 0.0)
    estimates = [spectra.poincare_estimate(cx2, part2, q) for q in range(3)]
    assert all(e.method != "dense" for e in estimates)
    sparse = [e.constant for e in estimates]
    assert sparse == pytest.approx(dense, rel=1e-7)
    assert korn_standard_constant(cx2, part2) == pytest.approx(dense_k, rel=1e-7)
    assert hodge.betti_pair(cx2, part2) == [0, 0, 0]
