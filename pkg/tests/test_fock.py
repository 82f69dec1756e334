import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tprabi import fock
from tprabi.errors import InvalidArgument, SectorViolation
from tprabi.fock import FockSpinVector, Sector
from tprabi.analysis import l2_distance
from tprabi.model import ModelParams

from conftest import fock_spectrum, hermite_grid


def dense_oracle(params, cutoff):
    """H built from truncated ladder matrices with Kronecker products."""
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1)), 1)
    ad = a.T
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.diag([1.0, -1.0])
    return (params.omega * np.kron(ad @ a, np.eye(2)) + 0.5 * params.omega0 * np.kron(np.eye(cutoff + 1), sx)
            + params.epsilon * np.kron(ad @ ad + a @ a, sz))


@pytest.mark.parametrize("params", [ModelParams(1.0, 2.0, 0.4), ModelParams(1.3, 0.7, 0.2)])
def test_band_matrix_matches_dense_oracle(params):
    H = fock.build_hamiltonian(params, 20)
    np.testing.assert_allclose(H.to_dense(), dense_oracle(params, 20), atol=1e-12)
    v = np.random.default_rng(1).standard_normal(H.dimension)
    np.testing.assert_allclose(H.matvec(v), dense_oracle(params, 20) @ v, atol=1e-10)


def test_entry_and_bandwidth():
    H = fock.build_hamiltonian(ModelParams(1.0, 2.0, 0.4), 10)
    assert H.entry(0, 1) == pytest.approx(1.0)          # omega0/2 spin flip
    assert H.entry(0, 4) == pytest.approx(0.4 * math.sqrt(2))
    assert H.entry(1, 5) == pytest.approx(-0.4 * math.sqrt(2))
    assert H.entry(0, 6) == 0.0
    with pytest.raises(InvalidArgument):
        fock.build_hamiltonian(ModelParams(1.0, 1.0, 0.1), 1)


def test_eps_zero_is_exact():
    # E = omega n +- omega0/2
    res = fock.spectrum(ModelParams(1.0, 2.0, 0.0), 8, 50)
    expected = sorted(n + s for n in range(6) for s in (-1, 1))[:8]
    np.testing.assert_allclose(res.eigenvalues, expected, atol=1e-10)


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.45])
def test_omega0_zero_squeezed_levels(eps):
    res = fock_spectrum(1.0, 0.0, eps, 22)
    levels = math.sqrt(1 - 4 * eps ** 2) * (np.arange(11) + 0.5) - 0.5
    np.testing.assert_allclose(res.eigenvalues, np.repeat(levels, 2), atol=1e-6)


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.45])
def test_squeezed_formula_vs_brute_force(eps):
    # the formula applies to untruncated H; at N=50 the lowest few are converged
    params = ModelParams(1.0, 0.0, eps)
    dense = np.linalg.eigvalsh(dense_oracle(params, 50))[:4]
    np.testing.assert_allclose(fock.spectrum(params, 4, 50, check_convergence=False).eigenvalues,
                               dense, atol=1e-10)
    if eps < 0.4:
        np.testing.assert_allclose(dense[::2], math.sqrt(1 - 4 * eps ** 2) * np.array([0.5, 1.5]) - 0.5,
                                   atol=1e-6)


def test_degenerate_pairs_at_omega0_zero():
    res = fock.spectrum(ModelParams(1.0, 0.0, 0.4), 4, 2000)
    np.testing.assert_allclose(res.eigenvalues, [-0.2, -0.2, 0.4, 0.4], atol=1e-8)


def test_matches_dense_diagonalization():
    params = ModelParams(1.0, 1.5, 0.35)
    dense = np.linalg.eigvalsh(dense_oracle(params, 60))[:8]
    res = fock.spectrum(params, 8, 60, check_convergence=False)
    np.testing.assert_allclose(res.eigenvalues, dense, atol=1e-10)
    assert np.all(res.residual_norms < 1e-10)


def test_eigenvectors_lie_in_one_sector():
    res = fock_spectrum(1.0, 1.0, 0.3, 8)
    assert {v.sector for v in res.vectors} == set(Sector)
    for v in res.vectors:
        assert fock.sector_of(v) is v.sector
        assert v.norm == pytest.approx(1.0, abs=1e-10)


def test_ground_state_sector_at_collapse():
    res = fock_spectrum(1.0, 4.0, 0.5, 1)
    assert res.sectors == [Sector.EVEN_DOWN]


def test_sector_helpers():
    v = FockSpinVector.basis_state(0, "down", 10)
    assert v.sector is Sector.EVEN_DOWN
    assert FockSpinVector.basis_state(2, "up", 10).sector is Sector.EVEN_DOWN
    assert FockSpinVector.basis_state(1, "up", 10).sector is Sector.ODD_UP
    mixed = FockSpinVector.basis_state(0, "+", 10)
    with pytest.raises(SectorViolation):
        fock.sector_of(mixed)
    np.testing.assert_allclose(FockSpinVector.from_bare(v.to_bare()).coeffs, v.coeffs)
    np.testing.assert_allclose(FockSpinVector.from_flat(v.flat()).coeffs, v.coeffs)


def test_convergence_flags():
    res = fock.spectrum(ModelParams(1.0, 2.0, 0.3), 4, 200)
    assert res.converged.all()


def test_beyond_collapse_flags_unconverged():
    with pytest.warns(RuntimeWarning):
        report = fock.convergence_guard(ModelParams(1.0, 2.0, 0.6), 100, 3)
    assert not report.flags.any()
    assert report.warning


def test_minimal_tail_keeps_eigenvector():
    params = ModelParams(1.0, 2.0, 0.45)
    res = fock.spectrum(params, 3, 400, check_convergence=False)
    H = fock.build_hamiltonian(params, 400)
    for E, v in zip(res.eigenvalues, res.vectors):
        r = H.matvec(v.flat()) - E * v.flat()
        assert np.linalg.norm(r) < 1e-10
        # on the sector chain the tail decays smoothly far below 1e-16
        n = v.sector.photons(400)
        chain = np.abs(v.to_bare()).max(axis=1)[n][-60:]
        assert np.all(chain > 0) and np.all(np.diff(chain) < 0)
        assert chain[-1] < 1e-30


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 60), st.integers(0, 60))
def test_hermite_orthonormal(n, m):
    x = hermite_grid(16.0, 2e-3)
    overlap = np.trapezoid(fock.hermite_function(n, x) * fock.hermite_function(m, x), x)
    assert overlap == pytest.approx(float(n == m), abs=1e-10)


def test_hermite_high_order_finite():
    x = np.array([0.0, 10.0, 50.0, 80.0])
    values = fock.hermite_function(1500, x)
    assert np.all(np.isfinite(values))
    # beyond the turning point sqrt(2n+1) ~ 54.8 the function decays
    assert abs(values[3]) < 1e-20


def test_reconstruct_wavefunction_basics():
    v = FockSpinVector.basis_state(0, "+", 20)
    x = hermite_grid(8.0, 1e-2)
    s = fock.reconstruct_wavefunction(v, x, 1.0)
    np.testing.assert_allclose(s.psi_plus, np.exp(-x ** 2 / 2) / np.pi ** 0.25, atol=1e-14)
    assert not s.psi_minus.any()
    with pytest.raises(InvalidArgument):
        fock.reconstruct_wavefunction(v, np.linspace(-1, 2, 31), 1.0)


def test_truncated_reconstruction_converges():
    res = fock_spectrum(1.0, 4.0, 0.5, 1)
    x = hermite_grid(30.0, 1e-3)
    full = fock.reconstruct_wavefunction(res.vectors[0], x, 1.0)
    errors = []
    for n_states in (5, 15, 30):
        part = fock.truncate_to_sector_states(res.vectors[0], n_states)
        errors.append(l2_distance(full, fock.reconstruct_wavefunction(part, x, 1.0)))
    assert errors[0] > errors[1] > errors[2]
