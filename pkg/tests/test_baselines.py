import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.array_model import AngleGrid, ArrayGeometry, build_dictionary, steering_vector
from src.baselines import (
    CovarianceMatrix,
    capon_spectrum,
    esprit_doas,
    music_spectrum,
    propagator_spectrum,
    sample_covariance,
    spectrum_peaks,
)
from src.errors import DimensionError, DomainError, InvariantViolation, NumericalError
from src.omp import AngleSpectrum
from src.synth import SourceScenario, analytic_covariance, derive_stream, synthesize_snapshots

TRUE_DOAS = (-40.0, 0.0, 24.0)


def _analytic(geometry, doas, *, groups=None, noiseless=False, snr_db=10.0):
    scenario = SourceScenario(doas_deg=doas, coherence_groups=groups, noiseless=noiseless, snr_db=snr_db)
    return CovarianceMatrix(analytic_covariance(geometry, scenario))


def test_covariance_validation():
    with pytest.raises(DimensionError):
        CovarianceMatrix(np.ones((2, 3)))
    with pytest.raises(InvariantViolation):
        CovarianceMatrix(np.array([[1.0, 1j], [1j, 1.0]]))
    with pytest.raises(InvariantViolation):
        CovarianceMatrix(np.diag([1.0, -1.0]))


def test_sample_covariance_is_hermitian_psd(ula15):
    scenario = SourceScenario(doas_deg=TRUE_DOAS, n_snapshots=40)
    r = sample_covariance(synthesize_snapshots(ula15, scenario, derive_stream(1, 0)))
    assert r.snapshot_count == 40
    assert_allclose(r.matrix, r.matrix.conj().T)
    assert np.linalg.eigvalsh(r.matrix).min() > -1e-10


def test_identity_covariance_gives_flat_spectra(dictionary15):
    r = CovarianceMatrix(np.eye(15))
    for spectrum in (
        music_spectrum(r, dictionary15, 3),
        capon_spectrum(r, dictionary15),
        propagator_spectrum(r, dictionary15, 3),
    ):
        assert_allclose(spectrum.power, 1.0, rtol=1e-10)


def test_subspace_methods_on_analytic_covariance(ula15, dictionary15):
    noiseless = _analytic(ula15, TRUE_DOAS, noiseless=True)
    assert spectrum_peaks(music_spectrum(noiseless, dictionary15, 3), 3).angles_deg == TRUE_DOAS
    assert spectrum_peaks(propagator_spectrum(noiseless, dictionary15, 3), 3).angles_deg == TRUE_DOAS

    noisy = _analytic(ula15, TRUE_DOAS, snr_db=10.0)
    assert spectrum_peaks(music_spectrum(noisy, dictionary15, 3), 3).angles_deg == TRUE_DOAS
    capon = spectrum_peaks(capon_spectrum(noisy, dictionary15), 3)
    assert_allclose(capon.angles_deg, TRUE_DOAS, atol=1.0)


def test_spectra_are_normalized(ula15, dictionary15):
    r = _analytic(ula15, TRUE_DOAS)
    for spectrum in (music_spectrum(r, dictionary15, 3), capon_spectrum(r, dictionary15)):
        assert spectrum.power.max() == 1.0
        assert np.all(np.isfinite(spectrum.power))


def test_music_resolves_close_independent_pair_but_not_coherent_one(ula15, dictionary15):
    independent = _analytic(ula15, (0.0, 3.0), snr_db=20.0)
    assert spectrum_peaks(music_spectrum(independent, dictionary15, 2), 2).angles_deg == (0.0, 3.0)

    # par coerente: posto 1, um único pico entre as duas fontes
    coherent = _analytic(ula15, (0.0, 3.0), groups=((0, 1),), snr_db=20.0)
    peak = spectrum_peaks(music_spectrum(coherent, dictionary15, 1), 1).angles_deg[0]
    assert peak not in (0.0, 3.0)
    assert 0.0 < peak < 3.0

    # informado de duas fontes, no máximo um bin verdadeiro entre os dois picos
    top2 = spectrum_peaks(music_spectrum(coherent, dictionary15, 2), 2).angles_deg
    assert len({0.0, 3.0} & set(top2)) <= 1


def test_capon_requires_loading_for_singular_covariance(ula15, dictionary15):
    x = steering_vector(ula15, 10.0)
    r = sample_covariance(x)
    with pytest.raises(NumericalError):
        capon_spectrum(r, dictionary15)
    spectrum = capon_spectrum(r, dictionary15, diagonal_loading=0.1)
    assert spectrum_peaks(spectrum, 1).angles_deg == (10.0,)
    with pytest.raises(DomainError):
        capon_spectrum(r, dictionary15, diagonal_loading=-1.0)


def test_propagator_fails_on_noiseless_coherent_sources(ula15, dictionary15):
    r = _analytic(ula15, (1.0, -24.0), groups=((0, 1),), noiseless=True)
    with pytest.raises(NumericalError):
        propagator_spectrum(r, dictionary15, 2)


def test_esprit_on_analytic_covariance(ula15):
    r = _analytic(ula15, (-50.0, 60.0), noiseless=True)
    result = esprit_doas(r, ula15, 2)
    assert_allclose(result.angles_deg, (-50.0, 60.0), atol=1e-6)
    assert not result.aliased


def test_esprit_merges_coherent_sources(ula15):
    r = _analytic(ula15, (1.0, -24.0), groups=((0, 1),), snr_db=20.0)
    (angle,) = esprit_doas(r, ula15, 1).angles_deg
    assert abs(angle - 1.0) > 5.0
    assert abs(angle + 24.0) > 5.0


def test_source_count_validation(ula15, dictionary15):
    r = CovarianceMatrix(np.eye(15))
    with pytest.raises(DomainError):
        music_spectrum(r, dictionary15, 15)
    with pytest.raises(DomainError):
        esprit_doas(r, ula15, 0)
    small = build_dictionary(ArrayGeometry(n_sensors=4))
    with pytest.raises(DimensionError):
        music_spectrum(r, small, 1)


def test_spectrum_peaks():
    grid = AngleGrid.from_points([-2.0, -1.0, 0.0, 1.0, 2.0])
    spectrum = AngleSpectrum(grid=grid, power=np.array([0.1, 0.5, 0.2, 0.9, 0.3]))
    assert spectrum_peaks(spectrum, 1) == ((1.0,), False)
    assert spectrum_peaks(spectrum, 2) == ((-1.0, 1.0), False)
    assert spectrum_peaks(spectrum, 3) == ((-1.0, 1.0, 2.0), True)


def test_spectrum_edges_are_not_peaks():
    grid = AngleGrid.from_points([-2.0, -1.0, 0.0, 1.0])
    spectrum = AngleSpectrum(grid=grid, power=np.array([1.0, 0.5, 0.7, 0.2]))
    assert spectrum_peaks(spectrum, 1) == ((0.0,), False)


def test_esprit_on_independent_sources_at_20db(ula15):
    scenario = SourceScenario(doas_deg=(-50.0, 60.0), snr_db=20.0, n_snapshots=1000)
    r = sample_covariance(synthesize_snapshots(ula15, scenario, derive_stream(8, 0)))
    result = esprit_doas(r, ula15, 2)
    assert_allclose(result.angles_deg, (-50.0, 60.0), atol=0.1)
    assert not result.aliased


def test_flat_spectrum_peaks_are_flagged(grid181):
    spectrum = AngleSpectrum(grid=grid181, power=np.ones(181))
    assert spectrum_peaks(spectrum, 3) == ((-90.0, -89.0, -88.0), True)
