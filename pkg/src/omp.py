"""
Orthogonal Matching Pursuit para estimação de DOA em grade fixa.

Fluxo de cada iteração c:
  1) λ_c = argmax_j |⟨r_{c-1}, γ_j⟩| / ‖γ_j‖ sobre j fora do suporte (empate -> menor índice)
  2) Λ_c = Λ_{c-1} ∪ {λ_c}, Ψ_c = [Ψ_{c-1} γ_λc]
  3) s_c = argmin ‖Ψ_c s - y‖₂ (QR com pivotamento, refeito a cada iteração)
  4) r_c = y - Ψ_c s_c
Para após `sparsity` iterações ou quando ‖r_c‖ <= tol·‖y‖.

O espectro angular é P(θ_j) = |ŝ_j|², zero fora do suporte.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple, Union

import numpy as np
from scipy import linalg

from src.array_model import AngleGrid
from src.errors import DimensionError, DomainError, InfeasibleError, RefusalError
from src.sensing import EffectiveDictionary, MeasuredVector

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
L0_BUDGET = 10**6
RANK_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class OmpResult:
    """Resultado do OMP.

    `residual_norms[0]` é ‖y‖; depois vem uma entrada por iteração.
    """

    support: Tuple[int, ...]
    coefficients: np.ndarray
    residual_norms: Tuple[float, ...]
    iterations_run: int
    residual: np.ndarray

    def dense_coefficients(self, size: int) -> np.ndarray:
        """ŝ sobre a grade inteira (zero fora do suporte)."""
        dense = np.zeros(size, dtype=complex)
        dense[list(self.support)] = self.coefficients
        return dense


@dataclass(frozen=True, eq=False)
class AngleSpectrum:
    grid: AngleGrid
    power: np.ndarray

    def __post_init__(self):
        power = np.asarray(self.power, dtype=float)
        if power.shape != (self.grid.size,):
            raise DimensionError(f"espectro com {power.shape} pontos para uma grade de {self.grid.size}")
        if not np.all(np.isfinite(power)) or np.any(power < 0):
            raise DomainError("o espectro deve ser finito e não negativo")
        object.__setattr__(self, "power", power)

    @property
    def angles_deg(self) -> np.ndarray:
        return self.grid.points


class DoaEstimate(NamedTuple):
    angles_deg: Tuple[float, ...]
    shortfall: bool


# ------------------------------ Utilidades -----------------------------------


def _measured(y: Union[MeasuredVector, np.ndarray]) -> np.ndarray:
    return y.data if isinstance(y, MeasuredVector) else np.asarray(y)


def _least_squares(atoms: np.ndarray, y: np.ndarray) -> np.ndarray:
    """min ‖atoms·s - y‖₂ via QR com pivotamento (solução básica se houver deficiência de posto)."""
    q, r, piv = linalg.qr(atoms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > RANK_RTOL * diag[0])) if diag[0] > 0 else 0
    z = np.zeros(atoms.shape[1], dtype=complex)
    if rank:
        z[:rank] = linalg.solve_triangular(r[:rank, :rank], (q.conj().T @ y)[:rank])
    coef = np.empty_like(z)
    coef[piv] = z
    return coef


def normalize_spectrum(spectrum: AngleSpectrum, scale: float = 1.0) -> AngleSpectrum:
    """Normaliza para máximo `scale` (espectro nulo continua nulo)."""
    peak = spectrum.power.max()
    if peak <= 0:
        return AngleSpectrum(grid=spectrum.grid, power=np.zeros_like(spectrum.power))
    return AngleSpectrum(grid=spectrum.grid, power=spectrum.power / peak * scale)


# ------------------------------ Algoritmo ------------------------------------


def omp_recover(
    psi: EffectiveDictionary,
    y: Union[MeasuredVector, np.ndarray],
    sparsity: int,
    tol: float = DEFAULT_TOL,
) -> OmpResult:
    atoms = psi.matrix
    m, ns = atoms.shape
    y_vec = _measured(y)
    if y_vec.shape != (m,):
        raise DimensionError(f"y deve ter comprimento {m} (recebido {y_vec.shape})")
    if int(sparsity) != sparsity or sparsity < 1:
        raise DomainError(f"sparsity deve ser inteiro positivo (recebido {sparsity})")
    if sparsity > m:
        raise InfeasibleError(f"sparsity={sparsity} excede o número de medições m={m}")
    if tol < 0:
        raise DomainError("tol deve ser não negativa")

    y_norm = float(np.linalg.norm(y_vec))
    if y_norm == 0:
        return OmpResult(
            support=(), coefficients=np.zeros(0, dtype=complex), residual_norms=(0.0,),
            iterations_run=0, residual=np.zeros(m, dtype=complex),
        )

    inv_norms = 1.0 / psi.column_norms
    support = []
    coef = np.zeros(0, dtype=complex)
    residual = y_vec.astype(complex)
    residual_norms = [y_norm]

    for _ in range(int(sparsity)):
        scores = np.abs(atoms.conj().T @ residual) * inv_norms
        scores[support] = -np.inf
        support.append(int(np.argmax(scores)))

        chosen = atoms[:, support]
        coef = _least_squares(chosen, y_vec)
        residual = y_vec - chosen @ coef
        residual_norms.append(float(np.linalg.norm(residual)))

        if residual_norms[-1] <= tol * y_norm:
            logger.debug("OMP parou após %d iterações (‖r‖=%.3e)", len(support), residual_norms[-1])
            break

    return OmpResult(
        support=tuple(support), coefficients=coef, residual_norms=tuple(residual_norms),
        iterations_run=len(support), residual=residual,
    )


def angle_spectrum(result: OmpResult, grid: AngleGrid) -> AngleSpectrum:
    if any(not 0 <= j < grid.size for j in result.support):
        raise DomainError("índices do suporte fora da grade")
    power = np.zeros(grid.size)
    power[list(result.support)] = np.abs(result.coefficients) ** 2
    return AngleSpectrum(grid=grid, power=power)


def estimate_doas(spectrum: AngleSpectrum, m_sources: int) -> DoaEstimate:
    """Ângulos dos `m_sources` maiores bins não nulos, em ordem crescente.

    Empates de potência favorecem o menor índice da grade. Se houver menos bins
    não nulos que fontes, devolve todos e marca `shortfall`.
    """
    if m_sources < 1:
        raise DomainError("m_sources deve ser >= 1")
    power = spectrum.power
    nonzero = np.flatnonzero(power > 0)
    ranked = nonzero[np.argsort(-power[nonzero], kind="stable")]
    chosen = np.sort(ranked[:m_sources])
    angles = tuple(float(a) for a in spectrum.grid.points[chosen])
    return DoaEstimate(angles_deg=angles, shortfall=len(nonzero) < m_sources)


def l0_oracle(
    psi: EffectiveDictionary,
    y: Union[MeasuredVector, np.ndarray],
    sparsity: int,
) -> Tuple[int, ...]:
    """Suporte de tamanho `sparsity` com menor resíduo de mínimos quadrados (busca exaustiva)."""
    atoms = psi.matrix
    ns = atoms.shape[1]
    y_vec = _measured(y)
    if sparsity < 1 or sparsity > ns:
        raise DomainError(f"sparsity deve estar em [1, {ns}]")
    n_supports = math.comb(ns, sparsity)
    if n_supports > L0_BUDGET:
        raise RefusalError(f"C({ns}, {sparsity}) = {n_supports} suportes excede o orçamento de {L0_BUDGET}")

    tie_tol = 1e-10 * max(float(np.linalg.norm(y_vec)), np.finfo(float).tiny)
    best, best_norm = None, np.inf
    # ordem lexicográfica: em empate fica o primeiro suporte encontrado
    for support in itertools.combinations(range(ns), sparsity):
        chosen = atoms[:, support]
        coef = _least_squares(chosen, y_vec)
        res = float(np.linalg.norm(y_vec - chosen @ coef))
        if res < best_norm - tie_tol:
            best, best_norm = support, res
    return tuple(best)
