import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tprabi import analysis, fock
from tprabi.analysis import TailKind
from tprabi.errors import ConventionError, InvalidArgument, SectorViolation
from tprabi.fock import FockSpinVector, Sector
from tprabi.model import ModelParams, SpinorGridFunction
from tprabi.verify import swapped

from conftest import collapse_states, fock_spectrum, hermite_grid

X = hermite_grid(12.0, 1e-2)


@pytest.mark.parametrize("n", range(5))
def test_hermite_functions_are_fourier_eigenfunctions(n):
    h = fock.hermite_function(n, X)
    k = np.linspace(-6, 6, 61)
    np.testing.assert_allclose(analysis.fourier_transform(X, h, k),
                               (-1j) ** n * fock.hermite_function(n, k), atol=1e-8)


def test_parseval():
    f = np.exp(-(X - 1) ** 2) * np.cos(3 * X)
    k = hermite_grid(12.0, 1e-2)
    F = analysis.fourier_transform(X, f, k)
    assert np.sum(np.abs(F) ** 2) * 1e-2 == pytest.approx(np.sum(f ** 2) * 1e-2, rel=1e-8)


def test_graded_quadrature_integrates_smooth_functions():
    n_half, h = 20000, 1e-3
    offsets, weights = analysis.graded_quadrature(n_half, h, 0.05, 0.01)
    x = offsets * h
    assert offsets[0] == 0 and offsets[-1] == n_half
    assert np.sum(weights) == pytest.approx(n_half * h, rel=1e-12)
    f = np.exp(-x / 0.05) + np.exp(-x ** 2)
    assert np.sum(weights * f) == pytest.approx(0.05 * (1 - math.exp(-400)) + math.sqrt(math.pi) / 2 * math.erf(20),
                                                rel=1e-6)


def test_harmonic_residual_vanishes_on_hermite_functions():
    x = hermite_grid(12.0, 1e-3)
    params = ModelParams(1.0, 0.0, 0.0)
    for n in range(4):
        assert analysis.residual_fourth_order(fock.hermite_function(n, x), x, 1, n, params) < 1e-4


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-2.0, 2.0))
def test_fourth_order_residual_rejects_generic_smooth_functions(width, shift):
    x = hermite_grid(12.0, 1e-2)
    psi = np.exp(-((x - shift) / width) ** 2)
    params = ModelParams(1.0, 1.0, 0.25)
    assert analysis.residual_fourth_order(psi, x, 1, -0.3, params) > 1e-2


def test_residuals_on_subcritical_fock_states():
    params = ModelParams(1.0, 2.0, 0.4)
    x = hermite_grid(30.0, 1e-3)
    result = fock_spectrum(1.0, 2.0, 0.4, 3)
    for E, v in zip(result.eigenvalues, result.vectors):
        s = fock.reconstruct_wavefunction(v, x, 1.0)
        assert analysis.residual_fourth_order(s.psi_plus, x, 1, E, params) < 1e-4
        assert analysis.residual_fourth_order(s.psi_minus, x, -1, E, params) < 1e-4
        assert max(analysis.residual_coupled(s, E, params)) < 1e-6
        assert max(analysis.residual_coupled(swapped(s), E, params)) > 1e-2
    with pytest.raises(InvalidArgument):
        analysis.residual_fourth_order(x, x, 0, 0.0, params)


def test_fourier_pair_on_collapse_ground_state():
    state = collapse_states(4.0, 4)[0]
    params = ModelParams.at_collapse(4.0)
    result = analysis.fourier_pair_check(state.wavefunction, state.E, params)
    assert result.max_residual < 1e-3
    assert result.phase == Sector.EVEN_DOWN.fourier_phase
    assert all(abs(p - result.phase) < 1e-3 for p in result.phase_fit)
    # the identities with psi_plus and psi_minus exchanged do not hold
    wrong = analysis.fourier_pair_check(swapped(state.wavefunction), state.E, params)
    assert wrong.max_residual > 1e-1


def test_fourier_pair_argument_checks():
    state = collapse_states(4.0, 4)[0]
    with pytest.raises(ConventionError):
        analysis.fourier_pair_check(state.wavefunction, state.E, ModelParams.at_collapse(8.0, 2.0))
    with pytest.raises(InvalidArgument):
        analysis.fourier_pair_check(state.wavefunction, state.E, ModelParams(1.0, 4.0, 0.4))


@pytest.mark.parametrize("sector", list(Sector))
def test_sector_phase_by_quadrature(sector):
    # direct transform of psi_plus, compared to psi_minus on the same grid
    params = ModelParams.at_collapse(4.0)
    result = fock_spectrum(1.0, 4.0, 0.5, 8)
    v = [u for u in result.vectors if u.sector is sector][0]
    x = hermite_grid(40.0, 2e-3)
    s = fock.reconstruct_wavefunction(v, x, 1.0)
    k = x[::500]
    F = analysis.fourier_transform(x, s.psi_plus, k)
    target = s.psi_minus[::500]
    for p in (1, 1j, -1, -1j):
        err = np.max(np.abs(F - p * target)) / np.max(np.abs(target))
        assert (err < 1e-4) == (p == sector.fourier_phase)


def test_sigma_z_phase_check():
    assert analysis.sigma_z_phase_check(FockSpinVector.basis_state(0, "down", 10)) == 0.0
    result = fock_spectrum(1.0, 1.0, 0.3, 8, 200)
    assert max(analysis.sigma_z_phase_check(v) for v in result.vectors) < 1e-10
    mixed = FockSpinVector.from_bare(result.vectors[0].to_bare() + result.vectors[1].to_bare())
    with pytest.raises(SectorViolation):
        analysis.sigma_z_phase_check(mixed)


def test_tail_classifier_on_oscillator_ground_state():
    x = hermite_grid(30.0, 1e-2)
    fit = analysis.tail_classifier(np.exp(-x ** 2 / 2), x)
    assert fit.kind is TailKind.GAUSSIAN
    assert fit.curvature == pytest.approx(-0.5, rel=1e-6)
    fit = analysis.tail_classifier(np.exp(-0.3 * np.abs(x)), x)
    assert fit.kind is TailKind.EXPONENTIAL
    assert fit.slope == pytest.approx(-0.3, rel=1e-6)
    with pytest.raises(analysis.FitWindowError):
        analysis.tail_classifier(np.zeros_like(x), x)


def test_tail_of_collapse_state_is_exponential():
    state = collapse_states(1.3)[0]
    wf = state.wavefunction
    assert analysis.tail_classifier(wf.psi_plus, wf.x).kind is TailKind.EXPONENTIAL
    kappa = math.sqrt(-state.e_tilde.e_tilde)
    assert analysis.log_slope(wf.psi_minus, wf.x) == pytest.approx(-kappa, rel=0.02)


def test_l2_distance():
    x = hermite_grid(10.0, 1e-2)
    a = SpinorGridFunction(x, fock.hermite_function(0, x), 0 * x, 1e-2)
    assert analysis.l2_distance(a, a.scaled(-1)) == pytest.approx(0, abs=1e-12)
    assert analysis.l2_distance(a, a.scaled(-1), align_sign=False) == pytest.approx(2, rel=1e-8)
    with pytest.raises(InvalidArgument):
        analysis.l2_distance(a, SpinorGridFunction(x[1:], x[1:], x[1:], 1e-2))
