"""
Matriz de medição Φ e compressão de um snapshot: y = Φx, Ψ = ΦA.

O padrão é Φ = identidade (m = N), o que isola a contribuição do OMP. A opção
gaussiana (entradas complexas circulares i.i.d. escaladas por 1/√m) exercita o
regime compressivo m < N.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from src.array_model import Dictionary
from src.errors import DimensionError, InvariantViolation, KindError

logger = logging.getLogger(__name__)

KINDS = ("identity", "gaussian")

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    kind: str
    m: int
    n: int
    matrix: np.ndarray
    seed: Optional[int] = None


@dataclass(frozen=True, eq=False)
class MeasuredVector:
    """y (comprimento m) com a proveniência: tipo de Φ e índice do snapshot."""

    data: np.ndarray
    kind: str
    snapshot_index: int = 0

    def __len__(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class EffectiveDictionary:
    """Ψ = ΦA (m × Ns) e a norma euclidiana de cada coluna."""

    matrix: np.ndarray
    column_norms: np.ndarray


def make_measurement_matrix(kind: str, m: int, n: int, seed: SeedLike = None) -> MeasurementMatrix:
    if kind not in KINDS:
        raise KindError(f"tipo de matriz de medição desconhecido: {kind!r} (use {', '.join(KINDS)})")
    if m < 1 or n < 1:
        raise DimensionError("m e n devem ser positivos")
    if m > n:
        raise DimensionError(f"m ({m}) não pode exceder n ({n})")

    if kind == "identity":
        if m != n:
            raise KindError(f"Φ identidade exige m = n (recebido m={m}, n={n})")
        matrix = np.eye(n, dtype=complex)
    else:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        matrix = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2.0 * m)

    matrix.setflags(write=False)
    return MeasurementMatrix(kind=kind, m=m, n=n, matrix=matrix, seed=seed if isinstance(seed, int) else None)


def compress(phi: MeasurementMatrix, x: np.ndarray, snapshot_index: int = 0) -> MeasuredVector:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != phi.n:
        raise DimensionError(f"x deve ser um vetor de comprimento {phi.n} (recebido {x.shape})")
    return MeasuredVector(data=phi.matrix @ x, kind=phi.kind, snapshot_index=snapshot_index)


def effective_dictionary(phi: MeasurementMatrix, dictionary: Dictionary) -> EffectiveDictionary:
    base = dictionary.matrix
    if base.shape[0] != phi.n:
        raise DimensionError(f"Φ tem {phi.n} colunas mas o dicionário tem {base.shape[0]} linhas")

    psi = base if phi.kind == "identity" else phi.matrix @ base
    norms = np.linalg.norm(psi, axis=0)
    if np.any(norms == 0):
        raise InvariantViolation(f"coluna nula em Ψ (índices {np.flatnonzero(norms == 0).tolist()})")
    return EffectiveDictionary(matrix=psi, column_norms=norms)


def check_measurement_count(phi: MeasurementMatrix, n_sources: int) -> float:
    """Avisa (sem falhar) quando m < M·ln(N) para Φ gaussiana; retorna o limite M·ln(N)."""
    bound = n_sources * math.log(phi.n)
    if phi.kind == "gaussian" and phi.m < bound:
        logger.warning("m=%d medições abaixo de M·ln(N)=%.2f (M=%d, N=%d)", phi.m, bound, n_sources, phi.n)
    return bound
