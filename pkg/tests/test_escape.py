import numpy as np
import pytest
from numpy.testing import assert_allclose

from escape import (EscapeFunction, diagonal_normal_form, eval_escape, gradient_escape, hamiltonian_action,
                    lower_envelope, verify_positivity)
from lab_errors import DimensionMismatchError, PositivityViolation, UnsupportedSpectrumError
from symplectic_core import QuadraticForm, SymplecticMatrix, build_quadratic_hamiltonian, classify_spectrum


def test_escape_vanishes_at_origin():
    ef = EscapeFunction(dim_hyp=1, dim_ell=1)
    assert eval_escape(ef, [0.0, 0.0], [0.0, 0.0]) == 0


def test_escape_values():
    ef = EscapeFunction(dim_hyp=1, dim_ell=1)
    g = eval_escape(ef, [1.0, 2.0], [0.0, 1.0])
    assert_allclose(g.real, 0.5 * np.log(2.0))
    assert_allclose(g.imag, 0.5 * (4.0 - 1.0))


def test_escape_gradient_matches_differences(rng):
    ef = EscapeFunction(dim_hyp=2, dim_ell=1)
    x, xi = rng.normal(size=3), rng.normal(size=3)
    gx, gxi = gradient_escape(ef, x, xi)
    eps = 1e-6
    for i in range(3):
        dx = np.zeros(3)
        dx[i] = eps
        fd_x = (eval_escape(ef, x + dx, xi) - eval_escape(ef, x - dx, xi)) / (2 * eps)
        fd_xi = (eval_escape(ef, x, xi + dx) - eval_escape(ef, x, xi - dx)) / (2 * eps)
        assert_allclose(gx[i], fd_x, atol=1e-8)
        assert_allclose(gxi[i], fd_xi, atol=1e-8)


def test_split_rejects_wrong_dimension():
    with pytest.raises(DimensionMismatchError):
        EscapeFunction(dim_hyp=2).split(np.zeros(3))


def test_hamiltonian_action_dimension_mismatch():
    q = QuadraticForm.from_bilinear(np.eye(2))
    with pytest.raises(DimensionMismatchError):
        hamiltonian_action(q, EscapeFunction(dim_hyp=1), [1.0], [1.0])


def test_model_ratio_is_one(rng):
    q = QuadraticForm.from_bilinear([[1.0]])
    report = verify_positivity(q, samples=20000, rng=rng)
    assert abs(report.min_ratio - 1) <= 1e-12


def test_model_action_equals_envelope(rng):
    q = QuadraticForm.from_bilinear([[1.0]])
    pts = rng.uniform(-50, 50, size=(100, 2))
    action = hamiltonian_action(q, EscapeFunction(1), pts[:, :1], pts[:, 1:])
    assert_allclose(action.real, lower_envelope(pts[:, :1], pts[:, 1:]), rtol=1e-13)


def test_diagonal_ratio_bounded_by_smallest_rate(rng):
    q = QuadraticForm.from_bilinear(np.diag([2.0, 3.0]))
    report = verify_positivity(q, samples=20000, rng=rng)
    assert report.min_ratio >= 2 - 1e-12
    assert report.samples > 20000


@pytest.mark.parametrize("x", [
    [[1.0, -5.0], [5.0, 1.0]],
    [[1.0, 1.0], [0.0, 1.0]],
])
def test_classified_blocks_are_positive(hyperbolic_exp, rng, x):
    cls = classify_spectrum(SymplecticMatrix.from_array(hyperbolic_exp(x), tol=1e-8))
    report = verify_positivity(build_quadratic_hamiltonian(cls), samples=20000, rng=rng)
    assert report.min_ratio > 0


def test_negative_reals_are_positive(rng):
    cls = classify_spectrum(SymplecticMatrix.from_array(np.diag([-2.0, -0.5])))
    report = verify_positivity(build_quadratic_hamiltonian(cls), samples=20000, rng=rng)
    assert_allclose(report.min_ratio, np.log(2.0), rtol=1e-10)


def test_elliptic_modes_are_dropped(mixed_map, rng):
    qh = build_quadratic_hamiltonian(classify_spectrum(mixed_map))
    report = verify_positivity(qh, samples=5000, rng=rng)
    assert abs(report.min_ratio - 1) <= 1e-10
    assert len(report.argmin_point) == 2


def test_wrong_sign_is_reported(rng):
    q = QuadraticForm.from_bilinear([[-1.0]])
    with pytest.raises(PositivityViolation) as e:
        verify_positivity(q, samples=1000, rng=rng)
    assert e.value.report.min_ratio < 0
    assert len(e.value.report.argmin_point) == 2


def test_diagonal_normal_form(rng):
    q = QuadraticForm.from_bilinear(np.diag([2.0, 3.0]))
    nf = diagonal_normal_form(q, rng=rng)
    assert_allclose(nf.r, [3 ** -0.5, 2 ** -0.5])
    assert nf.min_eigenvalues == (1.0, 1.0)
    x, xi = np.array([0.5, -1.0]), np.array([2.0, 0.25])
    lhs = hamiltonian_action(q, EscapeFunction(2), x, xi).real
    assert_allclose(nf.evaluate(*nf.transform(x, xi)), lhs, rtol=1e-12)


def test_normal_form_refuses_jordan_blocks():
    with pytest.raises(UnsupportedSpectrumError):
        diagonal_normal_form(QuadraticForm.from_bilinear([[1.0, 1.0], [0.0, 1.0]]))


def test_single_rate_normal_form(rng):
    nf = diagonal_normal_form(QuadraticForm.from_bilinear([[4.0]]), rng=rng)
    assert_allclose(nf.r, [0.5])
    assert_allclose(nf.M, [[1.0]])


def test_escape_is_antisymmetric_under_swap(rng):
    ef = EscapeFunction(dim_hyp=2, dim_ell=1)
    x, xi = rng.normal(scale=5.0, size=(2, 200, 3))
    assert_allclose(eval_escape(ef, xi, x), -eval_escape(ef, x, xi), atol=1e-12)


def test_elliptic_action_is_imaginary(rng):
    q = QuadraticForm.from_oscillators([0.7])
    pts = rng.uniform(-10, 10, size=(1000, 2))
    action = hamiltonian_action(q, EscapeFunction(dim_hyp=0, dim_ell=1), pts[:, :1], pts[:, 1:])
    assert np.all(action.real == 0)
    assert_allclose(action.imag, 4 * 0.7 * pts[:, 0] * pts[:, 1], rtol=1e-12)


def test_escape_gradient_is_bounded(rng):
    ef = EscapeFunction(dim_hyp=2)
    pts = rng.normal(size=(10000, 4)) * np.logspace(-3, 3, 10000)[:, None]
    gx, gxi = gradient_escape(ef, pts[:, :2], pts[:, 2:])
    norms = np.sqrt(np.sum(np.abs(gx) ** 2, axis=1) + np.sum(np.abs(gxi) ** 2, axis=1))
    assert norms.max() <= 1 + 1e-12
