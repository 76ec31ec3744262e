import numpy as np
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.matrices.normalforms import smith_normal_form

from kml._integer import integer_rank, invariant_factors, torsion

small_int_matrices = st.integers(1, 5).flatmap(
    lambda r: st.integers(1, 5).flatmap(
        lambda c: st.lists(st.lists(st.integers(-3, 3), min_size=c, max_size=c), min_size=r, max_size=r)
    )
)


def test_invariant_factors_small():
    assert invariant_factors([[2, 4], [6, 8]]) == [2, 4]


def test_torsion_detected():
    assert torsion([[1, 0], [0, 1]]) == []
    assert torsion([[2, 0], [0, 3]]) == [6]
    assert torsion([[2, 0], [0, 4]]) == [2, 4]


def test_zero_matrix_rank():
    assert integer_rank(np.zeros((3, 4), dtype=int)) == 0


@settings(max_examples=150, deadline=None)
@given(small_int_matrices)
def test_matches_sympy_smith_form(rows):
    a = np.array(rows, dtype=np.int64)
    snf = smith_normal_form(sympy.Matrix(rows), domain=sympy.ZZ)
    expected = [abs(int(snf[i, i])) for i in range(min(snf.shape)) if snf[i, i] != 0]
    assert invariant_factors(a) == expected
    assert integer_rank(a) == np.linalg.matrix_rank(a.astype(float))
