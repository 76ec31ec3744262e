import numpy as np
import pytest

from kml.mesh import build_annulus_mesh, build_box_mesh, tag_boundary


@pytest.fixture(scope="session")
def square4():
    return build_box_mesh(2, 4)


@pytest.fixture(scope="session")
def annulus():
    return build_annulus_mesh(16, 2)


def side(complex, axis, value, tol=1e-9):
    return tag_boundary(complex, lambda x: abs(x[axis] - value) < tol)


def full(complex):
    return tag_boundary(complex, lambda x: True)


def empty(complex):
    return tag_boundary(complex, lambda x: False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
