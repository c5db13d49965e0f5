import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.array_model import AngleGrid, ArrayGeometry, build_dictionary, steering_matrix
from src.errors import DimensionError, DomainError, InfeasibleError, RefusalError
from src.omp import (
    AngleSpectrum,
    angle_spectrum,
    estimate_doas,
    l0_oracle,
    normalize_spectrum,
    omp_recover,
)
from src.sensing import EffectiveDictionary, effective_dictionary, make_measurement_matrix
from src.synth import derive_stream


def _identity_psi(dictionary):
    phi = make_measurement_matrix("identity", dictionary.shape[0], dictionary.shape[0])
    return effective_dictionary(phi, dictionary)


def _noisy_snapshot(geometry, doas, seed, sigma=0.5):
    rng = derive_stream(seed, 0)
    n = geometry.n_sensors
    noise = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return steering_matrix(geometry, doas).sum(axis=1) + noise


def test_noiseless_recovery_is_exact(ula15, dictionary15):
    y = steering_matrix(ula15, [-50.0, 60.0]).sum(axis=1)
    result = omp_recover(_identity_psi(dictionary15), y, 2)
    assert sorted(result.support) == [40, 150]
    assert_allclose(result.coefficients, [1.0, 1.0], atol=1e-8)
    assert result.residual_norms[-1] <= 1e-8 * np.linalg.norm(y)


def test_support_is_invariant_to_complex_scaling(ula15, dictionary15):
    psi = _identity_psi(dictionary15)
    y = _noisy_snapshot(ula15, [-40.0, 0.0, 24.0], seed=6)
    alpha = 0.3 - 2.0j
    assert omp_recover(psi, alpha * y, 3).support == omp_recover(psi, y, 3).support


def test_residual_orthogonal_to_selected_atoms(ula15, dictionary15):
    psi = _identity_psi(dictionary15)
    y = _noisy_snapshot(ula15, [-40.0, 0.0, 24.0], seed=1)
    result = omp_recover(psi, y, 5)
    chosen = psi.matrix[:, list(result.support)]
    assert np.max(np.abs(chosen.conj().T @ result.residual)) <= 1e-8 * np.linalg.norm(y)


def test_residual_norms_are_monotone(ula15, dictionary15):
    y = _noisy_snapshot(ula15, [-40.0, 0.0, 24.0], seed=2)
    result = omp_recover(_identity_psi(dictionary15), y, 8)
    norms = np.array(result.residual_norms)
    assert len(norms) == result.iterations_run + 1
    assert norms[0] == pytest.approx(np.linalg.norm(y))
    assert np.all(np.diff(norms) <= 1e-12 * norms[0])


def test_no_atom_is_selected_twice(ula15, dictionary15):
    y = _noisy_snapshot(ula15, [-40.0, 0.0, 24.0], seed=3)
    result = omp_recover(_identity_psi(dictionary15), y, 12)
    assert len(set(result.support)) == len(result.support) == 12


def test_zero_measurement():
    dictionary = build_dictionary(ArrayGeometry(n_sensors=8))
    result = omp_recover(_identity_psi(dictionary), np.zeros(8), 2)
    assert result.support == ()
    assert result.residual_norms == (0.0,)
    assert result.iterations_run == 0


def test_tie_breaks_to_lowest_index():
    atoms = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]], dtype=complex)
    psi = EffectiveDictionary(matrix=atoms, column_norms=np.ones(3))
    result = omp_recover(psi, np.array([1.0, 0.0]), 1)
    assert result.support == (0,)


def test_early_stop_on_tolerance(ula15, dictionary15):
    y = steering_matrix(ula15, [20.0]).sum(axis=1)
    result = omp_recover(_identity_psi(dictionary15), y, 3, tol=1e-9)
    assert result.support == (110,)
    assert result.iterations_run == 1


def test_sparsity_validation(dictionary15):
    phi = make_measurement_matrix("gaussian", 6, 15, seed=0)
    psi = effective_dictionary(phi, dictionary15)
    with pytest.raises(InfeasibleError):
        omp_recover(psi, np.ones(6), 7)
    with pytest.raises(DomainError):
        omp_recover(psi, np.ones(6), 0)
    with pytest.raises(DimensionError):
        omp_recover(psi, np.ones(5), 2)


def test_angle_spectrum_and_estimate(ula15, dictionary15, grid181):
    y = steering_matrix(ula15, [-50.0, 60.0]).sum(axis=1)
    result = omp_recover(_identity_psi(dictionary15), y, 2)
    spectrum = angle_spectrum(result, grid181)
    assert np.count_nonzero(spectrum.power) == 2
    assert spectrum.power[40] == pytest.approx(1.0)
    assert spectrum.power[150] == pytest.approx(1.0)
    assert normalize_spectrum(spectrum, scale=0.2).power.max() == pytest.approx(0.2)
    estimate = estimate_doas(spectrum, 2)
    assert estimate.angles_deg == (-50.0, 60.0)
    assert not estimate.shortfall


def test_estimate_shortfall_and_ties():
    grid = AngleGrid.from_points([-20.0, -10.0, 0.0, 10.0])
    sparse = AngleSpectrum(grid=grid, power=np.array([0.0, 0.0, 3.0, 0.0]))
    assert estimate_doas(sparse, 2) == ((0.0,), True)
    tied = AngleSpectrum(grid=grid, power=np.array([1.0, 0.0, 1.0, 1.0]))
    assert estimate_doas(tied, 2).angles_deg == (-20.0, 0.0)


def test_zero_spectrum_normalizes_to_zero(grid181):
    spectrum = normalize_spectrum(AngleSpectrum(grid=grid181, power=np.zeros(181)))
    assert spectrum.power.max() == 0.0


def test_angle_spectrum_validation(grid181):
    with pytest.raises(DomainError):
        AngleSpectrum(grid=grid181, power=-np.ones(181))
    with pytest.raises(DimensionError):
        AngleSpectrum(grid=grid181, power=np.ones(10))


def test_omp_agrees_with_l0_oracle_on_coarse_grid(coarse_grid):
    geometry = ArrayGeometry(n_sensors=8)
    dictionary = build_dictionary(geometry, coarse_grid)
    psi = _identity_psi(dictionary)
    inner = [j for j, theta in enumerate(coarse_grid.points) if -40.0 <= theta <= 40.0]

    checked = 0
    for i, j in itertools.combinations(inner, 2):
        if coarse_grid.points[j] - coarse_grid.points[i] < 20.0:
            continue
        y = dictionary.matrix[:, i] + dictionary.matrix[:, j]
        oracle = l0_oracle(psi, y, 2)
        assert oracle == (i, j)
        assert tuple(sorted(omp_recover(psi, y, 2).support)) == oracle
        checked += 1
    assert checked == 28


def test_l0_oracle_refuses_large_search(dictionary15):
    with pytest.raises(RefusalError):
        l0_oracle(_identity_psi(dictionary15), np.ones(15), 4)
