"""
Síntese de dados do arranjo: formas de onda das fontes (inclusive grupos
coerentes), ruído e matriz de snapshots X = A(θ)S + W.

Toda aleatoriedade vem de geradores numpy semeados; cada ensaio de Monte Carlo
obtém um fluxo independente derivado de (semente mestre, índice do ensaio, ...)
via `derive_stream`.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from src.array_model import ArrayGeometry, steering_matrix
from src.config import DEFAULT_SEED
from src.errors import DomainError, IdentifiabilityError

WAVEFORMS = ("gaussian", "unit-modulus", "fixed")


# --------------------------- Geradores semeados ------------------------------


def derive_stream(master_seed: int, *keys: int) -> np.random.Generator:
    """Fluxo PCG64 independente identificado por (semente mestre, chaves...)."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(seq)


# ------------------------------- Tipos ---------------------------------------


@dataclass(frozen=True)
class SourceScenario:
    """Fontes de banda estreita em campo distante.

    `coherence_groups` é uma partição (índices a partir de 0) das fontes; fontes
    do mesmo grupo compartilham a forma de onda a menos de um escalar complexo
    de módulo unitário. None equivale a todas as fontes independentes.
    """

    doas_deg: Tuple[float, ...]
    coherence_groups: Optional[Tuple[Tuple[int, ...], ...]] = None
    snr_db: float = 0.0
    n_snapshots: int = 1
    seed: int = DEFAULT_SEED
    noiseless: bool = False
    waveform: str = "gaussian"
    powers: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        doas = tuple(float(t) for t in self.doas_deg)
        object.__setattr__(self, "doas_deg", doas)
        m = len(doas)
        if m < 1:
            raise DomainError("o cenário precisa de pelo menos uma fonte")
        if any(not -90.0 <= t <= 90.0 for t in doas):
            raise DomainError(f"DOAs fora de [-90°, 90°]: {list(doas)}")
        if len(set(doas)) != m:
            raise DomainError(f"DOAs devem ser distintas: {list(doas)}")

        groups = self.coherence_groups
        if groups is None:
            groups = tuple((i,) for i in range(m))
        groups = tuple(tuple(int(i) for i in g) for g in groups)
        flat = sorted(i for g in groups for i in g)
        if any(len(g) == 0 for g in groups) or flat != list(range(m)):
            raise DomainError(f"coherence_groups não é uma partição exata de 0..{m - 1}: {groups}")
        object.__setattr__(self, "coherence_groups", groups)

        if int(self.n_snapshots) != self.n_snapshots or self.n_snapshots < 1:
            raise DomainError("n_snapshots deve ser inteiro >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed deve ser um inteiro sem sinal de 64 bits")
        if self.waveform not in WAVEFORMS:
            raise DomainError(f"waveform desconhecida: {self.waveform!r} (use {', '.join(WAVEFORMS)})")
        if not self.noiseless and not np.isfinite(self.snr_db):
            raise DomainError("snr_db infinito: use noiseless=True")

        if self.powers is not None:
            powers = tuple(float(p) for p in self.powers)
            if len(powers) != m or any(p < 0 or not np.isfinite(p) for p in powers):
                raise DomainError("powers deve ter uma potência finita >= 0 por fonte")
            object.__setattr__(self, "powers", powers)

    @property
    def n_sources(self) -> int:
        return len(self.doas_deg)

    @property
    def source_powers(self) -> np.ndarray:
        if self.powers is None:
            return np.ones(self.n_sources)
        return np.asarray(self.powers, dtype=float)

    @property
    def noise_variance(self) -> float:
        """σ² relativo a uma fonte de potência unitária (SNR por fonte, por sensor)."""
        if self.noiseless:
            return 0.0
        return float(10.0 ** (-self.snr_db / 10.0))

    def with_snr(self, snr_db: float) -> "SourceScenario":
        return replace(self, snr_db=float(snr_db))


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    """X (N × K) junto com a proveniência do cenário."""

    data: np.ndarray
    scenario: SourceScenario
    geometry: ArrayGeometry
    noise_variance: float

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[1]

    def snapshot(self, index: int = 0) -> np.ndarray:
        return self.data[:, index]


# ------------------------------ Operações ------------------------------------


def _rng_for(scenario: SourceScenario, rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(scenario.seed)


def draw_group_scalars(scenario: SourceScenario, rng: np.random.Generator) -> np.ndarray:
    """Escalares de módulo unitário das fontes, sorteados uma vez por realização.

    Fontes isoladas e a forma de onda `fixed` usam escalar 1.
    """
    scalars = np.ones(scenario.n_sources, dtype=complex)
    if scenario.waveform == "fixed":
        return scalars
    for group in scenario.coherence_groups:
        if len(group) > 1:
            scalars[list(group)] = np.exp(2j * np.pi * rng.random(len(group)))
    return scalars


def _group_waveform(waveform: str, n_snapshots: int, rng: np.random.Generator) -> np.ndarray:
    if waveform == "gaussian":
        return (rng.standard_normal(n_snapshots) + 1j * rng.standard_normal(n_snapshots)) / np.sqrt(2.0)
    if waveform == "unit-modulus":
        return np.exp(2j * np.pi * rng.random(n_snapshots))
    return np.ones(n_snapshots, dtype=complex)


def generate_source_matrix(
    scenario: SourceScenario,
    rng: Optional[np.random.Generator] = None,
    *,
    n_snapshots: Optional[int] = None,
    scalars: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Matriz S (M × K): linha i contém s_i(1…K), potência média unitária antes do SNR."""
    rng = _rng_for(scenario, rng)
    k = int(n_snapshots or scenario.n_snapshots)
    if scalars is None:
        scalars = draw_group_scalars(scenario, rng)
    amplitudes = np.sqrt(scenario.source_powers)

    sources = np.empty((scenario.n_sources, k), dtype=complex)
    for group in scenario.coherence_groups:
        shared = _group_waveform(scenario.waveform, k, rng)
        for i in group:
            sources[i] = amplitudes[i] * scalars[i] * shared
    return sources


def synthesize_snapshots(
    geometry: ArrayGeometry,
    scenario: SourceScenario,
    rng: Optional[np.random.Generator] = None,
    *,
    sources: Optional[np.ndarray] = None,
) -> SnapshotMatrix:
    """X = A(θ)S + W com ruído gaussiano complexo circular de variância σ² por elemento.

    Se `sources` for dado, usa essa realização de S (K = número de colunas) e o
    gerador só é consumido pelo ruído.
    """
    if scenario.n_sources >= geometry.n_sensors:
        raise IdentifiabilityError(
            f"{scenario.n_sources} fontes para {geometry.n_sensors} sensores: é preciso M < N"
        )
    rng = _rng_for(scenario, rng)
    if sources is None:
        sources = generate_source_matrix(scenario, rng)
    if sources.shape[0] != scenario.n_sources:
        raise DomainError("sources deve ter uma linha por fonte do cenário")

    steering = steering_matrix(geometry, scenario.doas_deg)
    data = steering @ sources
    sigma2 = scenario.noise_variance
    if sigma2 > 0:
        shape = data.shape
        data = data + np.sqrt(sigma2 / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return SnapshotMatrix(data=data, scenario=scenario, geometry=geometry, noise_variance=sigma2)


def source_covariance(scenario: SourceScenario, scalars: Optional[np.ndarray] = None) -> np.ndarray:
    """Covariância exata das fontes P (M × M) implicada pela estrutura de coerência."""
    m = scenario.n_sources
    scalars = np.ones(m, dtype=complex) if scalars is None else np.asarray(scalars, dtype=complex)
    amplitudes = np.sqrt(scenario.source_powers) * scalars
    # forma de onda fixa: todas as fontes compartilham a mesma sequência
    groups = (tuple(range(m)),) if scenario.waveform == "fixed" else scenario.coherence_groups

    cov = np.zeros((m, m), dtype=complex)
    for group in groups:
        idx = np.array(group)
        cov[np.ix_(idx, idx)] = np.outer(amplitudes[idx], amplitudes[idx].conj())
    return cov


def analytic_covariance(
    geometry: ArrayGeometry,
    scenario: SourceScenario,
    *,
    scalars: Optional[np.ndarray] = None,
    include_noise: bool = True,
) -> np.ndarray:
    """R = A·P·Aᴴ + σ²·I (covariância com infinitos snapshots)."""
    steering = steering_matrix(geometry, scenario.doas_deg)
    cov = steering @ source_covariance(scenario, scalars) @ steering.conj().T
    if include_noise:
        cov = cov + scenario.noise_variance * np.eye(geometry.n_sensors)
    return cov
