import numpy as np
import pytest
from numpy.testing import assert_allclose

from lab_errors import AliasingError, NyquistError, UnsupportedSpectrumError
from monodromy_model import (ModelParams, build_elliptic_monodromy, build_hyperbolic_monodromy, conjugate_by_weight,
                             conjugated_contraction, conjugated_generator, escape_weight_action, fit_spectral_gap,
                             model_propagator, position_variance, rescale_state, unitarity_defect, unscale_state)
from quasimode import hermite_mode
from weyl import PhaseGrid, microlocal_basis


def small_params(**kw):
    values = dict(lam=1.0, h=0.01, hbar_tilde=0.2, s=0.3, grid=PhaseGrid(L=12.0, N=256, hbar=0.2))
    values.update(kw)
    return ModelParams(**values)


def gaussian(grid, sigma, center=0.0):
    u = np.exp(-(grid.x - center) ** 2 / (4 * sigma ** 2)).astype(complex)
    return u / grid.norm(u)


def test_params_validation():
    with pytest.raises(ValueError):
        small_params(h=0.3)
    with pytest.raises(ValueError):
        small_params(s=0.6)
    with pytest.raises(ValueError):
        small_params(grid=PhaseGrid(L=12.0, N=256, hbar=0.1))


def test_h_grid_is_contracted():
    p = small_params(h=0.05)
    assert_allclose(p.h_grid.L, 12.0 * 0.5)
    assert p.h_grid.hbar == 0.05


def test_model_monodromy_is_unitary():
    m = build_hyperbolic_monodromy(small_params())
    assert unitarity_defect(m) <= 1e-9


def test_zero_rate_gives_identity():
    assert np.array_equal(build_hyperbolic_monodromy(small_params(lam=0.0)), np.eye(256))


def test_group_law():
    p = small_params()
    m1 = model_propagator(p, 0.3)
    m2 = model_propagator(p, 0.7)
    assert_allclose(m1 @ m2, build_hyperbolic_monodromy(p, 1.0), atol=1e-10)


def test_monodromy_dilates_gaussian():
    lam = 0.5
    p = small_params(lam=lam)
    u = gaussian(p.grid, 0.5)
    v = build_hyperbolic_monodromy(p) @ u
    assert_allclose(position_variance(v, p.grid), position_variance(u, p.grid) * np.exp(2 * lam), rtol=1e-3)


def test_unit_rate_at_hbar_tilde_dilates_by_e_squared():
    p = small_params(lam=1.0, h=0.2)
    u = gaussian(p.grid, 0.5)
    v = build_hyperbolic_monodromy(p) @ u
    assert_allclose(position_variance(v, p.grid), position_variance(u, p.grid) * np.e ** 2, rtol=0.05)


def test_coarse_grid_is_refused():
    with pytest.raises(NyquistError):
        build_hyperbolic_monodromy(small_params(grid=PhaseGrid(L=12.0, N=16, hbar=0.2)))


def test_monodromy_does_not_depend_on_h():
    a = build_hyperbolic_monodromy(small_params(h=0.01))
    b = build_hyperbolic_monodromy(small_params(h=0.0025))
    assert_allclose(a, b, atol=1e-10)


def test_rescaling_is_unitary_and_scales_variance():
    h, ht = 0.01, 0.2
    grid_h = PhaseGrid(L=12.0 * np.sqrt(h / ht), N=256, hbar=h)
    u = gaussian(grid_h, 0.2)
    v = rescale_state(u, h, ht, grid_h)
    grid_ht = PhaseGrid(L=12.0, N=256, hbar=ht)
    assert_allclose(grid_ht.norm(v), 1.0, rtol=1e-12)
    assert_allclose(position_variance(v, grid_ht), position_variance(u, grid_h) * ht / h, rtol=1e-10)
    assert_allclose(unscale_state(v, h, ht, grid_ht), u, atol=1e-12)


def test_rescaling_refuses_aliased_state():
    grid = PhaseGrid(L=1.0, N=64, hbar=0.01)
    u = np.where(np.arange(64) % 2 == 0, 1.0, -1.0).astype(complex)
    with pytest.raises(AliasingError):
        rescale_state(u, 0.01, 0.2, grid)


def test_unconjugated_norm_is_one():
    res = conjugated_contraction(small_params(s=0.0))
    assert abs(res.norm_conjugated - 1) <= 1e-9


def test_conjugation_contracts():
    res = conjugated_contraction(small_params())
    assert res.norm_conjugated < 1
    assert res.norm_reversed > res.norm_conjugated
    assert res.unitarity_defect <= 1e-9


def test_contraction_improves_with_weight_strength():
    p = small_params()
    rs = [conjugated_contraction(p.with_s(s)).norm_conjugated for s in (0.0, 0.1, 0.2, 0.3, 0.4)]
    assert abs(rs[0] - 1) <= 1e-9
    assert np.all(np.diff(rs) < 0)


def test_conjugation_by_zero_weight_is_identity():
    p = small_params()
    m = build_hyperbolic_monodromy(p)
    assert conjugate_by_weight(p, m, 0.0) is m


def test_conjugated_generator_has_negative_imaginary_part():
    report = conjugated_generator(small_params())
    assert report.max_imag < 0
    assert report.norm_bound < 1


def test_escape_weight_action_round_trip():
    p = small_params(h=0.05, s=0.2)
    grid_h = p.h_grid
    u = gaussian(grid_h, 0.3)
    w = escape_weight_action(p, u)
    back = escape_weight_action(p.with_s(-0.2), w)
    assert_allclose(back, u, atol=1e-8)


def test_gap_fit_is_finite():
    p = small_params()
    c, n, gaps = fit_spectral_gap(p, (0.01, 0.005), gap_width=0.25)
    assert all(g > 0 for g in gaps)
    assert np.isfinite(c) and np.isfinite(n)


def test_elliptic_monodromy_fixes_ladder_mode():
    h, alpha = 1e-3, 1.0
    grid = PhaseGrid(L=1.0, N=256, hbar=h)
    p = ModelParams(alpha=alpha, h=h, hbar_tilde=h, s=0.0, grid=grid)
    v = hermite_mode(2, h, grid).vector
    z = (alpha / 2) * 5 * h + 2 * np.pi * h
    m = build_elliptic_monodromy(p, z, grid=grid)
    assert np.linalg.norm(m @ v - v) / np.linalg.norm(v) <= 1e-8


def test_elliptic_eigenphase_is_linear_in_mode_index():
    h, alpha = 1e-3, 1.0
    grid = PhaseGrid(L=1.0, N=256, hbar=h)
    p = ModelParams(alpha=alpha, h=h, hbar_tilde=h, s=0.0, grid=grid)
    m = build_elliptic_monodromy(p, 0.0, grid=grid)
    phases = []
    for k in range(6):
        v = hermite_mode(k, h, grid).vector
        phases.append(np.angle(np.vdot(v, m @ v) / np.vdot(v, v)))
    assert_allclose(np.diff(np.unwrap(phases)), -alpha, atol=1e-8)


def test_resonant_rotation_is_refused():
    h = 1e-3
    grid = PhaseGrid(L=1.0, N=256, hbar=h)
    p = ModelParams(alpha=np.pi, h=h, hbar_tilde=h, s=0.0, grid=grid)
    with pytest.raises(UnsupportedSpectrumError):
        build_elliptic_monodromy(p, 0.0, grid=grid)


@pytest.mark.slow
def test_acceptance_contraction_sweep():
    grid = PhaseGrid(L=12.0, N=1024, hbar=0.2)
    p = ModelParams(lam=1.0, h=0.01, hbar_tilde=0.2, s=0.3, grid=grid)
    h_values = (0.01, 0.005, 0.0025, 0.00125)
    rs = [conjugated_contraction(p.with_h(h)).norm_conjugated for h in h_values]
    assert max(rs) < 1
    assert max(rs) - min(rs) <= 1e-9


@pytest.mark.slow
def test_gap_exponent_stable_under_refinement():
    h_values = (0.01, 0.005, 0.0025, 0.00125)
    coarse = ModelParams(grid=PhaseGrid(L=12.0, N=1024, hbar=0.2))
    fine = ModelParams(grid=PhaseGrid(L=12.0, N=2048, hbar=0.2))
    _, n1, _ = fit_spectral_gap(coarse, h_values)
    _, n2, _ = fit_spectral_gap(fine, h_values)
    assert np.isfinite(n1)
    assert abs(n1 - n2) <= 0.3


def test_microlocal_subspace_used_by_contraction_is_nontrivial():
    p = small_params()
    assert microlocal_basis(p.grid, p.width).shape[1] >= 1
