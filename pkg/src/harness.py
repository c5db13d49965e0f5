"""
Motor de experimentos de Monte Carlo: espectros comparativos, curvas de RMSE
versus SNR e ensaios de consistência do OMP.

Cada ensaio é uma unidade independente: todos os seus geradores são derivados
de (semente mestre, índice do ensaio, índice do SNR, finalidade), de modo que a
execução sequencial e a concorrente produzem exatamente os mesmos números. A
redução é sempre feita na ordem dos índices dos ensaios.
"""
from __future__ import annotations

import itertools
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from src.array_model import AngleGrid, ArrayGeometry, Dictionary, build_dictionary
from src.baselines import (
    capon_spectrum,
    esprit_doas,
    music_spectrum,
    propagator_spectrum,
    sample_covariance,
    spectrum_peaks,
)
from src.config import DEFAULT_SEED, DOA_JOBS
from src.errors import ConfigError
from src.omp import AngleSpectrum, DoaEstimate, angle_spectrum, estimate_doas, normalize_spectrum, omp_recover
from src.sensing import KINDS, check_measurement_count, compress, effective_dictionary, make_measurement_matrix
from src.synth import SourceScenario, derive_stream, generate_source_matrix, synthesize_snapshots

logger = logging.getLogger(__name__)

EXPERIMENTS = ("spectrum", "rmse", "consistency")
ALGORITHMS = ("omp", "music", "capon", "propagator", "esprit")

# erro atribuído a cada fonte sem estimativa
MAX_GRID_ERROR_DEG = 180.0

# finalidades dos fluxos aleatórios de um ensaio
_SOURCES = 0
_MEASUREMENT = 1
_NOISE = 2

T = TypeVar("T")


# ------------------------------- Tipos ---------------------------------------


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    snapshots: int = 1
    tol: float = 0.0
    diagonal_loading: float = 0.0

    def __post_init__(self):
        key = f"algorithms.{self.name}"
        if self.name not in ALGORITHMS:
            raise ConfigError(f"algoritmo desconhecido: {self.name!r} (use {', '.join(ALGORITHMS)})", key=key)
        if int(self.snapshots) != self.snapshots or self.snapshots < 1:
            raise ConfigError(f"{key}.snapshots deve ser inteiro >= 1", key=f"{key}.snapshots")
        if self.tol < 0:
            raise ConfigError(f"{key}.tol deve ser >= 0", key=f"{key}.tol")
        if self.diagonal_loading < 0:
            raise ConfigError(f"{key}.diagonal_loading deve ser >= 0", key=f"{key}.diagonal_loading")
        object.__setattr__(self, "snapshots", int(self.snapshots))


@dataclass(frozen=True)
class MeasurementSpec:
    """Φ identidade (m = N) ou gaussiana com m medições."""

    kind: str = "identity"
    m: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"measurement.kind desconhecido: {self.kind!r} (use {', '.join(KINDS)})", key="measurement.kind")
        if self.m is not None and (int(self.m) != self.m or self.m < 1):
            raise ConfigError("measurement.m deve ser inteiro >= 1", key="measurement.m")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    geometry: ArrayGeometry
    grid: AngleGrid
    scenario: SourceScenario
    algorithms: Tuple[AlgorithmSpec, ...]
    measurement: MeasurementSpec = field(default_factory=MeasurementSpec)
    snr_sweep_db: Tuple[float, ...] = ()
    n_trials: int = 1
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experimento desconhecido: {self.experiment!r} (use {', '.join(EXPERIMENTS)})", key="experiment")
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "snr_sweep_db", tuple(float(s) for s in self.snr_sweep_db))

        names = [a.name for a in self.algorithms]
        if not names:
            raise ConfigError("nenhum algoritmo configurado", key="algorithms")
        if len(set(names)) != len(names):
            raise ConfigError(f"algoritmos repetidos: {names}", key="algorithms")
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise ConfigError("trials deve ser inteiro >= 1", key="trials")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed deve ser um inteiro sem sinal de 64 bits", key="seed")

        n = self.geometry.n_sensors
        if self.scenario.n_sources >= n:
            raise ConfigError(f"{self.scenario.n_sources} fontes para {n} sensores: é preciso M < N", key="scenario.doas_deg")
        m = self.measurement_count
        if m > n:
            raise ConfigError(f"measurement.m ({m}) não pode exceder n_sensors ({n})", key="measurement.m")
        if self.measurement.kind == "identity" and m != n:
            raise ConfigError("Φ identidade exige m = n_sensors", key="measurement.m")
        if "omp" in names and m < self.scenario.n_sources:
            raise ConfigError(f"measurement.m ({m}) menor que o número de fontes", key="measurement.m")
        if "capon" in names:
            capon = self.algorithm("capon")
            # com K < N a covariância amostral é singular
            if capon.snapshots < n and capon.diagonal_loading == 0:
                raise ConfigError(
                    f"capon com {capon.snapshots} snapshots < {n} sensores exige diagonal_loading > 0",
                    key="algorithms.capon.diagonal_loading",
                )

        if self.experiment == "spectrum" and "esprit" in names:
            raise ConfigError("esprit não produz espectro; remova-o de um experimento spectrum", key="algorithms.esprit")
        if self.experiment == "rmse" and not self.snr_sweep_db:
            raise ConfigError("snr_sweep_db não pode ser vazio em um experimento rmse", key="snr_sweep_db")
        if self.experiment == "consistency" and "omp" not in names:
            raise ConfigError("o experimento consistency exige o algoritmo omp", key="algorithms")

    @property
    def measurement_count(self) -> int:
        return self.geometry.n_sensors if self.measurement.m is None else int(self.measurement.m)

    def algorithm(self, name: str) -> AlgorithmSpec:
        for spec in self.algorithms:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def with_overrides(self, *, seed: Optional[int] = None, n_trials: Optional[int] = None) -> "ExperimentConfig":
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if n_trials is not None:
            changes["n_trials"] = int(n_trials)
        return replace(self, **changes) if changes else self

    def to_dict(self) -> Dict[str, Any]:
        """Configuração resolvida, na mesma gramática dos arquivos de experimento."""
        grid: Dict[str, Any]
        if self.grid.explicit is not None:
            grid = {"points": list(self.grid.explicit)}
        else:
            grid = {"start_deg": self.grid.start_deg, "stop_deg": self.grid.stop_deg, "step_deg": self.grid.step_deg}
        scenario: Dict[str, Any] = {
            "doas_deg": list(self.scenario.doas_deg),
            "coherence_groups": [list(g) for g in self.scenario.coherence_groups],
            "snr_db": self.scenario.snr_db,
            "noiseless": self.scenario.noiseless,
            "waveform": self.scenario.waveform,
        }
        if self.scenario.powers is not None:
            scenario["powers"] = list(self.scenario.powers)
        measurement: Dict[str, Any] = {"kind": self.measurement.kind}
        if self.measurement.m is not None:
            measurement["m"] = int(self.measurement.m)

        data: Dict[str, Any] = {
            "experiment": self.experiment,
            "array": {"n_sensors": self.geometry.n_sensors, "spacing": self.geometry.spacing},
            "grid": grid,
            "scenario": scenario,
            "measurement": measurement,
            "algorithms": {
                a.name: {"snapshots": a.snapshots, "tol": a.tol, "diagonal_loading": a.diagonal_loading}
                for a in self.algorithms
            },
            "trials": self.n_trials,
            "seed": int(self.seed),
        }
        if self.snr_sweep_db:
            data["snr_sweep_db"] = list(self.snr_sweep_db)
        return data


@dataclass(frozen=True)
class RmsePoint:
    snr_db: float
    rmse_deg: float
    stderr_deg: float
    shortfalls: int = 0


@dataclass(frozen=True)
class RmseCurve:
    algorithm: str
    points: Tuple[RmsePoint, ...]
    n_trials: int

    @property
    def pairs(self) -> List[Tuple[float, float]]:
        return [(p.snr_db, p.rmse_deg) for p in self.points]


@dataclass(frozen=True, eq=False)
class ConsistencyResult:
    """Espectros por ensaio (normalizados e escalados por 1/T) e a estabilidade do suporte."""

    spectra: Tuple[AngleSpectrum, ...]
    supports: Tuple[Tuple[int, ...], ...]
    modal_support: Tuple[int, ...]
    stability: float
    aggregate: AngleSpectrum

    @property
    def n_trials(self) -> int:
        return len(self.spectra)


@dataclass(frozen=True, eq=False)
class _TrialOutput:
    estimate: DoaEstimate
    spectrum: Optional[AngleSpectrum] = None
    support: Optional[Tuple[int, ...]] = None


# ------------------------------ Utilidades -----------------------------------


def paired_errors(true_deg: Sequence[float], estimated_deg: Sequence[float]) -> np.ndarray:
    """Erro absoluto (graus) por fonte verdadeira, pareando listas ordenadas.

    Com o mesmo comprimento o pareamento preserva a ordem crescente. Com menos
    estimativas, escolhe o subconjunto ordenado de fontes que minimiza o erro
    quadrático; as fontes restantes recebem MAX_GRID_ERROR_DEG.
    """
    truth = np.sort(np.asarray(true_deg, dtype=float))
    est = np.sort(np.asarray(estimated_deg, dtype=float))
    if est.size > truth.size:
        raise ValueError("mais estimativas que fontes verdadeiras")
    if est.size == truth.size:
        return np.abs(est - truth)

    best: Optional[np.ndarray] = None
    for subset in itertools.combinations(range(truth.size), est.size):
        errors = np.full(truth.size, MAX_GRID_ERROR_DEG)
        errors[list(subset)] = np.abs(est - truth[list(subset)])
        if best is None or np.sum(errors**2) < np.sum(best**2):
            best = errors
    return best


def _map_trials(fn: Callable[[int], T], n_trials: int, jobs: int) -> List[T]:
    """Executa `fn(trial)` para cada ensaio; resultados na ordem dos índices."""
    if jobs <= 1 or n_trials == 1:
        return [fn(t) for t in range(n_trials)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(n_trials)))


def _run_trial(
    config: ExperimentConfig,
    dictionary: Dictionary,
    scenario: SourceScenario,
    trial: int,
    snr_index: int,
    names: Sequence[str],
) -> Dict[str, _TrialOutput]:
    """Um ensaio: a mesma realização de S para todos os algoritmos, ruído próprio de cada um."""
    seed, geometry, m_sources = config.seed, config.geometry, scenario.n_sources
    specs = [config.algorithm(name) for name in names]
    k_max = max(spec.snapshots for spec in specs)
    sources = generate_source_matrix(scenario, derive_stream(seed, trial, snr_index, _SOURCES), n_snapshots=k_max)

    outputs: Dict[str, _TrialOutput] = {}
    for spec in specs:
        noise_rng = derive_stream(seed, trial, snr_index, _NOISE + ALGORITHMS.index(spec.name))
        x = synthesize_snapshots(geometry, scenario, noise_rng, sources=sources[:, : spec.snapshots])

        if spec.name == "omp":
            phi = make_measurement_matrix(
                config.measurement.kind, config.measurement_count, geometry.n_sensors,
                derive_stream(seed, trial, snr_index, _MEASUREMENT),
            )
            result = omp_recover(effective_dictionary(phi, dictionary), compress(phi, x.snapshot(0)), m_sources, spec.tol)
            spectrum = normalize_spectrum(angle_spectrum(result, dictionary.grid))
            outputs["omp"] = _TrialOutput(
                estimate=estimate_doas(spectrum, m_sources), spectrum=spectrum, support=tuple(sorted(result.support)),
            )
            continue

        r = sample_covariance(x)
        if spec.name == "esprit":
            found = esprit_doas(r, geometry, m_sources)
            outputs["esprit"] = _TrialOutput(estimate=DoaEstimate(angles_deg=found.angles_deg, shortfall=False))
            continue
        if spec.name == "music":
            spectrum = music_spectrum(r, dictionary, m_sources)
        elif spec.name == "capon":
            spectrum = capon_spectrum(r, dictionary, spec.diagonal_loading)
        else:
            spectrum = propagator_spectrum(r, dictionary, m_sources)
        outputs[spec.name] = _TrialOutput(estimate=spectrum_peaks(spectrum, m_sources), spectrum=spectrum)

    for name, output in outputs.items():
        if output.estimate.shortfall:
            logger.debug("%s: menos picos que fontes no ensaio %d", name, trial)
    return outputs


def _prepare(config: ExperimentConfig) -> Dictionary:
    dictionary = build_dictionary(config.geometry, config.grid)
    if any(a.name == "omp" for a in config.algorithms):
        phi_sample = make_measurement_matrix(config.measurement.kind, config.measurement_count, config.geometry.n_sensors, 0)
        check_measurement_count(phi_sample, config.scenario.n_sources)
    return dictionary


# ------------------------------ Experimentos ---------------------------------


def run_spectrum_experiment(config: ExperimentConfig) -> Dict[str, AngleSpectrum]:
    """Espectros normalizados de cada algoritmo para o ensaio 0 da semente mestre."""
    dictionary = _prepare(config)
    names = [a.name for a in config.algorithms]
    outputs = _run_trial(config, dictionary, config.scenario, trial=0, snr_index=0, names=names)
    return {name: outputs[name].spectrum for name in names}


def run_rmse_experiment(config: ExperimentConfig, jobs: Optional[int] = None) -> List[RmseCurve]:
    """RMSE = sqrt(Σ erro² / (T·M)) por algoritmo e ponto de SNR."""
    jobs = DOA_JOBS if jobs is None else max(1, int(jobs))
    dictionary = _prepare(config)
    names = [a.name for a in config.algorithms]
    m_sources, n_trials = config.scenario.n_sources, config.n_trials
    points: Dict[str, List[RmsePoint]] = {name: [] for name in names}

    for snr_index, snr_db in enumerate(config.snr_sweep_db):
        scenario = config.scenario.with_snr(snr_db)
        trials = _map_trials(
            lambda t: _run_trial(config, dictionary, scenario, t, snr_index, names), n_trials, jobs,
        )
        for name in names:
            squared = np.array([
                paired_errors(scenario.doas_deg, outputs[name].estimate.angles_deg) ** 2 for outputs in trials
            ])
            per_trial = np.sqrt(squared.mean(axis=1))
            rmse = float(np.sqrt(squared.sum() / (n_trials * m_sources)))
            stderr = float(np.std(per_trial, ddof=1) / np.sqrt(n_trials)) if n_trials > 1 else 0.0
            shortfalls = sum(1 for outputs in trials if outputs[name].estimate.shortfall)
            points[name].append(RmsePoint(snr_db=float(snr_db), rmse_deg=rmse, stderr_deg=stderr, shortfalls=shortfalls))
        logger.info(
            "SNR %.1f dB: %s", snr_db, ", ".join(f"{n}={points[n][-1].rmse_deg:.4g}°" for n in names),
        )

    return [RmseCurve(algorithm=name, points=tuple(points[name]), n_trials=n_trials) for name in names]


def run_consistency_experiment(config: ExperimentConfig, jobs: Optional[int] = None) -> ConsistencyResult:
    """Ensaios independentes do OMP com Φ resorteada a cada ensaio.

    Cada espectro é normalizado para máximo 1 e dividido por T; `aggregate` é a
    soma dos espectros escalados. A estabilidade é a fração de ensaios cujo
    suporte coincide com o suporte modal.
    """
    jobs = DOA_JOBS if jobs is None else max(1, int(jobs))
    dictionary = _prepare(config)
    n_trials = config.n_trials
    trials = _map_trials(
        lambda t: _run_trial(config, dictionary, config.scenario, t, 0, ["omp"])["omp"], n_trials, jobs,
    )

    spectra = tuple(normalize_spectrum(out.spectrum, scale=1.0 / n_trials) for out in trials)
    supports = tuple(out.support for out in trials)
    # empate de contagem: vale o suporte que apareceu primeiro
    modal, count = Counter(supports).most_common(1)[0]
    aggregate = AngleSpectrum(grid=dictionary.grid, power=np.sum([s.power for s in spectra], axis=0))
    stability = count / n_trials
    logger.info("consistência: %d/%d ensaios com o suporte modal", count, n_trials)
    return ConsistencyResult(
        spectra=spectra, supports=supports, modal_support=modal, stability=stability, aggregate=aggregate,
    )
