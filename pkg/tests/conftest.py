import numpy as np
import pytest
from scipy import linalg

from symplectic_core import SymplecticMatrix, random_symplectic, standard_form
from weyl import PhaseGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20231)


@pytest.fixture
def make_symplectic(rng):
    def make(dim, scale=1.0):
        return random_symplectic(dim, rng, scale)
    return make


@pytest.fixture
def hyperbolic_plane():
    """dS = diag(e, 1/e), the time-one map of q = x xi."""
    return SymplecticMatrix.from_array(np.diag([np.e, 1 / np.e]))


@pytest.fixture
def mixed_map():
    """diag(e, 1/e) on (x1, xi1) and exp(-J) on (x2, xi2), coordinates (x1, x2, xi1, xi2)."""
    a = np.eye(4)
    a[0, 0], a[2, 2] = np.e, 1 / np.e
    rot = linalg.expm(-standard_form(1))
    a[np.ix_([1, 3], [1, 3])] = rot
    return SymplecticMatrix.from_array(a)


@pytest.fixture
def hyperbolic_exp():
    """exp(B) with B = diag(X, -X^T)."""
    def build(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = x.shape[0]
        b = np.block([[x, np.zeros((m, m))], [np.zeros((m, m)), -x.T]])
        return linalg.expm(b)
    return build


@pytest.fixture
def small_grid():
    return PhaseGrid(L=12.0, N=256, hbar=0.2)
