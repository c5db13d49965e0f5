"""
Modelo do arranjo linear uniforme (ULA).

- Geometria (N sensores, espaçamento d em comprimentos de onda).
- Vetores de direção e dicionário sobre a grade de varredura Ω.
- Aritmética de identificabilidade (spark e limite de fontes).

Convenção de fase: elemento k de a(θ) = exp(-i·2π·d·k·sin θ), θ medido a partir
da normal ao arranjo (broadside), em graus na API e convertido para radianos uma
única vez. O domínio [0°, 180°) medido a partir do eixo (endfire) é uma
reparametrização equivalente: φ = 90° - θ (ver `to_endfire_deg`).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.errors import DomainError, RefusalError

RANK_TOL = 1e-8
SPARK_MAX_GRID = 20


# ------------------------------- Tipos ---------------------------------------


@dataclass(frozen=True)
class ArrayGeometry:
    n_sensors: int
    spacing: float = 0.5

    def __post_init__(self):
        if int(self.n_sensors) != self.n_sensors or self.n_sensors < 2:
            raise DomainError(f"n_sensors deve ser inteiro >= 2 (recebido {self.n_sensors})")
        if not self.spacing > 0:
            raise DomainError(f"spacing deve ser positivo (recebido {self.spacing})")
        object.__setattr__(self, "n_sensors", int(self.n_sensors))
        object.__setattr__(self, "spacing", float(self.spacing))


@dataclass(frozen=True)
class AngleGrid:
    """Grade de varredura Ω em graus. Padrão: -90° a +90° com passo de 1° (181 pontos).

    Uma grade também pode ser dada por pontos explícitos (`from_points`).
    """

    start_deg: float = -90.0
    stop_deg: float = 90.0
    step_deg: float = 1.0
    explicit: Optional[Tuple[float, ...]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.explicit is not None:
            pts = np.asarray(self.explicit, dtype=float)
            object.__setattr__(self, "explicit", tuple(float(p) for p in pts))
            object.__setattr__(self, "start_deg", float(pts[0]) if pts.size else 0.0)
            object.__setattr__(self, "stop_deg", float(pts[-1]) if pts.size else 0.0)
            object.__setattr__(self, "step_deg", float(np.min(np.diff(pts))) if pts.size > 1 else 0.0)
        elif not self.step_deg > 0:
            raise DomainError(f"step_deg deve ser positivo (recebido {self.step_deg})")
        elif not self.start_deg < self.stop_deg:
            raise DomainError("start_deg deve ser menor que stop_deg")

        pts = self.points
        if pts.size < 2:
            raise DomainError("a grade precisa de pelo menos 2 pontos")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("os pontos da grade devem ser estritamente crescentes")
        if pts[0] < -90.0 or pts[-1] > 90.0:
            raise DomainError("os pontos da grade devem estar em [-90°, 90°]")

    @classmethod
    def from_points(cls, points: Sequence[float]) -> "AngleGrid":
        return cls(explicit=tuple(points))

    @cached_property
    def points(self) -> np.ndarray:
        if self.explicit is not None:
            pts = np.array(self.explicit, dtype=float)
        else:
            count = int(np.floor((self.stop_deg - self.start_deg) / self.step_deg + 1e-9)) + 1
            pts = self.start_deg + self.step_deg * np.arange(count)
        pts.setflags(write=False)
        return pts

    @property
    def size(self) -> int:
        return int(self.points.size)

    def index_of(self, theta_deg: float) -> int:
        """Índice do ponto da grade mais próximo de `theta_deg` (empate -> menor índice)."""
        return int(np.argmin(np.abs(self.points - theta_deg)))

    def contains(self, theta_deg: float) -> bool:
        return self.points[0] <= theta_deg <= self.points[-1]


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Matriz base A(Ω), N × Ns, cuja coluna j é a(Ω_j)."""

    matrix: np.ndarray
    grid: AngleGrid
    geometry: ArrayGeometry

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape


# ------------------------------ Operações ------------------------------------


def _check_angles(theta_deg: np.ndarray) -> None:
    if np.any(~np.isfinite(theta_deg)) or np.any(theta_deg < -90.0) or np.any(theta_deg > 90.0):
        raise DomainError(f"ângulo fora de [-90°, 90°]: {theta_deg.tolist()}")


def steering_matrix(geometry: ArrayGeometry, thetas_deg: Sequence[float]) -> np.ndarray:
    """Vetores de direção empilhados em colunas (N × len(thetas_deg))."""
    thetas = np.atleast_1d(np.asarray(thetas_deg, dtype=float))
    _check_angles(thetas)
    k = np.arange(geometry.n_sensors, dtype=float)
    sines = np.sin(np.deg2rad(thetas))
    phase = (-2.0 * np.pi * geometry.spacing) * np.outer(k, sines)
    return np.exp(1j * phase)


def steering_vector(geometry: ArrayGeometry, theta_deg: float) -> np.ndarray:
    return steering_matrix(geometry, [theta_deg])[:, 0]


def build_dictionary(geometry: ArrayGeometry, grid: Optional[AngleGrid] = None) -> Dictionary:
    grid = grid or AngleGrid()
    matrix = steering_matrix(geometry, grid.points)
    matrix.setflags(write=False)
    return Dictionary(matrix=matrix, grid=grid, geometry=geometry)


def to_endfire_deg(theta_deg: float) -> float:
    """Converte da convenção broadside (-90°…90°) para o domínio [0°, 180°]."""
    return 90.0 - theta_deg


def from_endfire_deg(phi_deg: float) -> float:
    return 90.0 - phi_deg


# ------------------------ Identificabilidade ---------------------------------


def spark_ula(geometry: ArrayGeometry) -> int:
    """spark do conjunto de vetores de direção de uma ULA: N + 1 (forma fechada)."""
    return geometry.n_sensors + 1


def numerical_rank(matrix: np.ndarray, rtol: float = RANK_TOL) -> int:
    """Posto numérico: valores singulares acima de rtol·σ_max."""
    matrix = np.atleast_2d(matrix)
    if matrix.size == 0:
        return 0
    sv = linalg.svdvals(matrix)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def spark_bruteforce(dictionary: Dictionary, max_subset: Optional[int] = None) -> Optional[int]:
    """Menor cardinalidade de um subconjunto linearmente dependente de colunas.

    Testa todos os subconjuntos de tamanho <= max_subset (padrão N + 1) e
    retorna None se todos forem independentes.
    """
    n_sensors, ns = dictionary.shape
    if ns > SPARK_MAX_GRID:
        raise RefusalError(f"grade grande demais para busca exaustiva ({ns} > {SPARK_MAX_GRID} pontos)")
    max_subset = n_sensors + 1 if max_subset is None else int(max_subset)
    if max_subset < 1:
        raise DomainError("max_subset deve ser >= 1")

    for size in range(1, min(max_subset, ns) + 1):
        for subset in itertools.combinations(range(ns), size):
            if numerical_rank(dictionary.matrix[:, subset]) < size:
                return size
    return None


def max_identifiable_sources(geometry: ArrayGeometry, rank_x: int) -> int:
    """Maior M inteiro com M < (N + rank(X)) / 2."""
    n = geometry.n_sensors
    if int(rank_x) != rank_x or not 1 <= rank_x <= n:
        raise DomainError(f"rank_x deve estar em [1, {n}] (recebido {rank_x})")
    return (n + int(rank_x) - 1) // 2


def max_identifiable_from_snapshots(geometry: ArrayGeometry, snapshots: np.ndarray) -> int:
    """Limite de identificabilidade usando o posto numérico dos próprios dados."""
    rank_x = min(max(numerical_rank(snapshots), 1), geometry.n_sensors)
    return max_identifiable_sources(geometry, rank_x)
