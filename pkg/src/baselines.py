"""
Referências baseadas em covariância: covariância amostral, MUSIC, Capon (MVDR),
método do propagador e ESPRIT, nas formulações clássicas.

Autovalores são ordenados de forma decrescente (entrada hermitiana). Não há
suavização espacial: com fontes coerentes a covariância perde posto e os
métodos de subespaço degradam.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from src.array_model import ArrayGeometry, Dictionary
from src.errors import DimensionError, DomainError, InvariantViolation, NumericalError
from src.omp import AngleSpectrum, DoaEstimate
from src.synth import SnapshotMatrix

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """R (N × N) hermitiana semidefinida positiva.

    `snapshot_count` é None para covariâncias analíticas.
    """

    matrix: np.ndarray
    snapshot_count: Optional[int] = None

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise DimensionError(f"covariância deve ser quadrada (recebido {r.shape})")
        scale = max(1.0, float(np.max(np.abs(r))))
        if np.max(np.abs(r - r.conj().T)) > HERMITIAN_TOL * scale:
            raise InvariantViolation("covariância não hermitiana")
        r = (r + r.conj().T) / 2.0
        trace = float(np.real(np.trace(r)))
        if linalg.eigvalsh(r)[0] < -PSD_TOL * max(trace, 1.0):
            raise InvariantViolation("covariância não é semidefinida positiva")
        object.__setattr__(self, "matrix", r)

    @property
    def n_sensors(self) -> int:
        return self.matrix.shape[0]


class EspritResult(NamedTuple):
    angles_deg: Tuple[float, ...]
    aliased: bool


# ------------------------------ Utilidades -----------------------------------


def _eigh_descending(r: CovarianceMatrix) -> Tuple[np.ndarray, np.ndarray]:
    try:
        values, vectors = linalg.eigh(r.matrix)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"falha na autodecomposição: {exc}") from exc
    return values[::-1], vectors[:, ::-1]


def _check_sources(m_sources: int, n_sensors: int) -> None:
    if int(m_sources) != m_sources or not 1 <= m_sources < n_sensors:
        raise DomainError(f"m_sources deve estar em [1, {n_sensors - 1}] (recebido {m_sources})")


def _check_dictionary(r: CovarianceMatrix, dictionary: Dictionary) -> None:
    if dictionary.shape[0] != r.n_sensors:
        raise DimensionError(f"dicionário com {dictionary.shape[0]} sensores para covariância {r.n_sensors}×{r.n_sensors}")


def _inverse_spectrum(dictionary: Dictionary, denominators: np.ndarray) -> AngleSpectrum:
    """P = 1/denominador, normalizado para máximo 1; nulos exatos ficam finitos."""
    floor = np.finfo(float).eps * dictionary.shape[0]
    power = 1.0 / np.maximum(np.real(denominators), floor)
    return AngleSpectrum(grid=dictionary.grid, power=power / power.max())


# ------------------------------ Estimadores ----------------------------------


def sample_covariance(x: Union[SnapshotMatrix, np.ndarray]) -> CovarianceMatrix:
    """R̂ = (1/K)·X·Xᴴ."""
    data = x.data if isinstance(x, SnapshotMatrix) else np.asarray(x)
    if data.ndim == 1:
        data = data[:, np.newaxis]
    k = data.shape[1]
    if k < 1:
        raise DomainError("são necessários K >= 1 snapshots")
    return CovarianceMatrix(matrix=data @ data.conj().T / k, snapshot_count=k)


def music_spectrum(r: CovarianceMatrix, dictionary: Dictionary, m_sources: int) -> AngleSpectrum:
    """P(θ) = 1 / (aᴴ E_n E_nᴴ a), E_n = autovetores dos N - M menores autovalores."""
    _check_sources(m_sources, r.n_sensors)
    _check_dictionary(r, dictionary)
    _, vectors = _eigh_descending(r)
    noise = vectors[:, m_sources:]
    denominators = np.sum(np.abs(noise.conj().T @ dictionary.matrix) ** 2, axis=0)
    return _inverse_spectrum(dictionary, denominators)


def capon_spectrum(r: CovarianceMatrix, dictionary: Dictionary, diagonal_loading: float = 0.0) -> AngleSpectrum:
    """P(θ) = 1 / (aᴴ (R + δI)⁻¹ a)."""
    if diagonal_loading < 0:
        raise DomainError("diagonal_loading deve ser >= 0")
    _check_dictionary(r, dictionary)
    loaded = r.matrix + diagonal_loading * np.eye(r.n_sensors)
    cond = np.linalg.cond(loaded)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(
            f"covariância singular (cond={cond:.3e}); use diagonal_loading > 0"
            + (f" (K={r.snapshot_count} < N={r.n_sensors})" if r.snapshot_count and r.snapshot_count < r.n_sensors else "")
        )
    weighted = linalg.solve(loaded, dictionary.matrix, assume_a="her")
    denominators = np.sum(dictionary.matrix.conj() * weighted, axis=0)
    return _inverse_spectrum(dictionary, denominators)


def propagator_spectrum(r: CovarianceMatrix, dictionary: Dictionary, m_sources: int) -> AngleSpectrum:
    """Método do propagador linear.

    R = [G | H] com G de largura M; P = (GᴴG)⁻¹GᴴH; Qᴴ = [Pᴴ, -I];
    espectro 1/‖Qᴴa(θ)‖².
    """
    _check_sources(m_sources, r.n_sensors)
    _check_dictionary(r, dictionary)
    g, h = r.matrix[:, :m_sources], r.matrix[:, m_sources:]
    gram = g.conj().T @ g
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(f"bloco GᴴG mal condicionado (cond={cond:.3e})")
    propagator = linalg.solve(gram, g.conj().T @ h, assume_a="her")
    q_h = np.hstack([propagator.conj().T, -np.eye(r.n_sensors - m_sources)])
    denominators = np.sum(np.abs(q_h @ dictionary.matrix) ** 2, axis=0)
    return _inverse_spectrum(dictionary, denominators)


def esprit_doas(r: CovarianceMatrix, geometry: ArrayGeometry, m_sources: int) -> EspritResult:
    """ESPRIT por mínimos quadrados entre as N-1 primeiras e as N-1 últimas linhas de E_s."""
    _check_sources(m_sources, r.n_sensors)
    if geometry.n_sensors != r.n_sensors:
        raise DimensionError("geometria e covariância com números de sensores diferentes")
    _, vectors = _eigh_descending(r)
    signal = vectors[:, :m_sources]
    rotation = linalg.lstsq(signal[:-1], signal[1:])[0]
    try:
        phases = np.angle(linalg.eigvals(rotation))
    except linalg.LinAlgError as exc:
        raise NumericalError(f"falha nos autovalores de rotação: {exc}") from exc

    bound = 2.0 * np.pi * geometry.spacing
    aliased = bool(np.any(np.abs(phases) > bound))
    if aliased:
        logger.debug("ESPRIT: fase além de 2πd, estimativa ambígua")
    sines = np.clip(-phases / bound, -1.0, 1.0)
    angles = np.sort(np.degrees(np.arcsin(sines)))
    return EspritResult(angles_deg=tuple(float(a) for a in angles), aliased=aliased)


def spectrum_peaks(spectrum: AngleSpectrum, m_sources: int) -> DoaEstimate:
    """Os `m_sources` maiores máximos locais estritos (bins internos), em ordem crescente.

    Com menos máximos que fontes, completa com os maiores bins restantes e marca
    `shortfall`. Empates favorecem o menor índice.
    """
    if m_sources < 1:
        raise DomainError("m_sources deve ser >= 1")
    power = spectrum.power
    interior = (power[1:-1] > power[:-2]) & (power[1:-1] > power[2:])
    peaks = np.flatnonzero(interior) + 1
    chosen = list(peaks[np.argsort(-power[peaks], kind="stable")][:m_sources])

    shortfall = len(chosen) < m_sources
    if shortfall:
        rest = np.setdiff1d(np.arange(power.size), chosen)
        rest = rest[np.argsort(-power[rest], kind="stable")]
        chosen.extend(rest[: m_sources - len(chosen)])

    angles = np.sort(spectrum.grid.points[np.array(chosen, dtype=int)])
    return DoaEstimate(angles_deg=tuple(float(a) for a in angles), shortfall=shortfall)
