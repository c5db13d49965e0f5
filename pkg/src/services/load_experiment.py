"""
Carrega arquivos de experimento (YAML) e presets embarcados em `src/presets/`.

- Valida chaves e tipos e reporta erros com a linha da chave ofensora.
- Aceita também um `manifest.json` gerado por uma execução anterior: a chave
  `config` do manifesto é a configuração resolvida e reproduz a execução.

Precedência da semente: argumento `seed` > `seed` do arquivo > DOA_SEED.
"""
from __future__ import annotations

import json
import logging
from contextlib import contextmanager
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Optional, Tuple, Union

import yaml

from src.array_model import AngleGrid, ArrayGeometry
from src.config import DOA_SEED
from src.errors import ConfigError, DoaError
from src.harness import ALGORITHMS, AlgorithmSpec, ExperimentConfig, MeasurementSpec
from src.synth import SourceScenario

logger = logging.getLogger(__name__)

PRESETS_PACKAGE = "src.presets"

TOP_LEVEL_KEYS = {
    "experiment", "array", "grid", "scenario", "measurement", "algorithms", "snr_sweep_db", "trials", "seed",
}
SECTION_KEYS = {
    "array": {"n_sensors", "spacing"},
    "grid": {"start_deg", "stop_deg", "step_deg", "points"},
    "scenario": {"doas_deg", "coherence_groups", "snr_db", "noiseless", "waveform", "powers"},
    "measurement": {"kind", "m"},
}
ALGORITHM_KEYS = {"snapshots", "tol", "diagonal_loading"}


# ------------------------------- Utilidades ----------------------------------


def key_lines(text: str) -> Dict[str, int]:
    """Mapeia cada caminho de chave ('scenario.snr_db') para sua linha (1-based) no YAML."""
    lines: Dict[str, int] = {}

    def walk(node: Any, prefix: str) -> None:
        if not isinstance(node, yaml.MappingNode):
            return
        for key_node, value_node in node.value:
            path = f"{prefix}{key_node.value}"
            lines.setdefault(path, key_node.start_mark.line + 1)
            walk(value_node, path + ".")

    try:
        walk(yaml.compose(text), "")
    except yaml.YAMLError:
        pass
    return lines


def _line_for(key: Optional[str], lines: Mapping[str, int]) -> Optional[int]:
    """Linha da chave ou do ancestral mais próximo presente no arquivo."""
    while key:
        if key in lines:
            return lines[key]
        key = key.rpartition(".")[0]
    return None


@contextmanager
def _reported_as(key: str) -> Iterator[None]:
    """Converte erros de domínio dos construtores em ConfigError ancorado na seção."""
    try:
        yield
    except ConfigError:
        raise
    except DoaError as exc:
        raise ConfigError(str(exc), key=key) from exc


def _number(value: Any, key: str, cast=float):
    # PyYAML lê '1e-9' (sem ponto) como string
    if isinstance(value, bool):
        raise ConfigError(f"{key} deve ser numérico (recebido {value!r})", key=key)
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} deve ser numérico (recebido {value!r})", key=key) from None
    if cast is int:
        if number != int(number):
            raise ConfigError(f"{key} deve ser inteiro (recebido {value!r})", key=key)
        return int(number)
    return number


def _flag(value: Any, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{key} deve ser true ou false (recebido {value!r})", key=key)
    return value


def _numbers(value: Any, key: str, cast=float) -> Tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{key} deve ser uma lista", key=key)
    return tuple(_number(v, f"{key}", cast) for v in value)


def _section(data: Mapping[str, Any], name: str, required: bool = False) -> Dict[str, Any]:
    section = data.get(name)
    if section is None:
        if required:
            raise ConfigError(f"seção obrigatória ausente: {name}", key=name)
        return {}
    if not isinstance(section, dict):
        raise ConfigError(f"{name} deve ser um mapeamento", key=name)
    unknown = sorted(set(section) - SECTION_KEYS[name])
    if unknown:
        raise ConfigError(f"chave desconhecida em {name}: {unknown[0]}", key=f"{name}.{unknown[0]}")
    return section


# --------------------------- Construção da config -----------------------------


def _build_grid(section: Dict[str, Any]) -> AngleGrid:
    if "points" in section:
        return AngleGrid.from_points(_numbers(section["points"], "grid.points"))
    kwargs = {k: _number(section[k], f"grid.{k}") for k in ("start_deg", "stop_deg", "step_deg") if k in section}
    return AngleGrid(**kwargs)


def _build_scenario(section: Dict[str, Any], seed: int) -> SourceScenario:
    if "doas_deg" not in section:
        raise ConfigError("scenario.doas_deg é obrigatório", key="scenario.doas_deg")
    groups = section.get("coherence_groups")
    if groups is not None:
        if not isinstance(groups, list) or not all(isinstance(g, list) for g in groups):
            raise ConfigError("coherence_groups deve ser uma lista de listas", key="scenario.coherence_groups")
        groups = tuple(_numbers(g, "scenario.coherence_groups", int) for g in groups)
    powers = section.get("powers")
    return SourceScenario(
        doas_deg=_numbers(section["doas_deg"], "scenario.doas_deg"),
        coherence_groups=groups,
        snr_db=_number(section.get("snr_db", 0.0), "scenario.snr_db"),
        n_snapshots=1,
        seed=seed,
        noiseless=_flag(section.get("noiseless", False), "scenario.noiseless"),
        waveform=str(section.get("waveform", "gaussian")),
        powers=None if powers is None else _numbers(powers, "scenario.powers"),
    )


def _build_algorithms(section: Any) -> Tuple[AlgorithmSpec, ...]:
    if not isinstance(section, dict) or not section:
        raise ConfigError("algorithms deve ser um mapeamento não vazio", key="algorithms")
    specs = []
    for name, params in section.items():
        key = f"algorithms.{name}"
        if name not in ALGORITHMS:
            raise ConfigError(f"algoritmo desconhecido: {name!r} (use {', '.join(ALGORITHMS)})", key=key)
        params = params or {}
        if not isinstance(params, dict):
            raise ConfigError(f"{key} deve ser um mapeamento", key=key)
        unknown = sorted(set(params) - ALGORITHM_KEYS)
        if unknown:
            raise ConfigError(f"chave desconhecida em {key}: {unknown[0]}", key=f"{key}.{unknown[0]}")
        specs.append(AlgorithmSpec(
            name=name,
            snapshots=_number(params.get("snapshots", 1), f"{key}.snapshots", int),
            tol=_number(params.get("tol", 0.0), f"{key}.tol"),
            diagonal_loading=_number(params.get("diagonal_loading", 0.0), f"{key}.diagonal_loading"),
        ))
    return tuple(specs)


def build_config(
    data: Mapping[str, Any],
    *,
    seed: Optional[int] = None,
    n_trials: Optional[int] = None,
) -> ExperimentConfig:
    """Constrói e valida um ExperimentConfig a partir do mapeamento já lido."""
    unknown = sorted(set(data) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"chave desconhecida: {unknown[0]}", key=unknown[0])
    if "experiment" not in data:
        raise ConfigError("chave obrigatória ausente: experiment", key="experiment")

    if seed is None:
        seed = _number(data["seed"], "seed", int) if "seed" in data else DOA_SEED
    trials = n_trials if n_trials is not None else _number(data.get("trials", 1), "trials", int)

    array = _section(data, "array", required=True)
    measurement = _section(data, "measurement")
    with _reported_as("array"):
        geometry = ArrayGeometry(
            n_sensors=_number(array.get("n_sensors"), "array.n_sensors", int),
            spacing=_number(array.get("spacing", 0.5), "array.spacing"),
        )
    with _reported_as("grid"):
        grid = _build_grid(_section(data, "grid"))
    with _reported_as("scenario"):
        scenario = _build_scenario(_section(data, "scenario", required=True), seed)

    m = measurement.get("m")
    return ExperimentConfig(
        experiment=str(data["experiment"]),
        geometry=geometry,
        grid=grid,
        scenario=scenario,
        algorithms=_build_algorithms(data.get("algorithms")),
        measurement=MeasurementSpec(
            kind=str(measurement.get("kind", "identity")),
            m=None if m is None else _number(m, "measurement.m", int),
        ),
        snr_sweep_db=_numbers(data.get("snr_sweep_db", []), "snr_sweep_db"),
        n_trials=trials,
        seed=seed,
    )


# ------------------------------- Entrada -------------------------------------


def parse_experiment(
    text: str,
    *,
    seed: Optional[int] = None,
    n_trials: Optional[int] = None,
) -> ExperimentConfig:
    """Lê o texto de um experimento (YAML ou manifesto JSON) e valida."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML inválido: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None) from exc

    lines = key_lines(text)
    if isinstance(data, dict) and "manifest_version" in data:
        # manifestos são JSON: reler com json preserva números como 1e-09
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            pass
        data = data.get("config")
        lines = {k[len("config."):]: v for k, v in lines.items() if k.startswith("config.")}
    if not isinstance(data, dict):
        raise ConfigError("o arquivo de experimento deve ser um mapeamento")

    try:
        return build_config(data, seed=seed, n_trials=n_trials)
    except ConfigError as exc:
        if exc.line is not None:
            raise
        message = str(exc)
        raise ConfigError(message, key=exc.key, line=_line_for(exc.key, lines)) from exc


def preset_names() -> Tuple[str, ...]:
    files = resources.files(PRESETS_PACKAGE).iterdir()
    return tuple(sorted(f.name[: -len(".yaml")] for f in files if f.name.endswith(".yaml")))


def read_source(source: Union[str, Path]) -> str:
    """Texto de um arquivo existente ou de um preset embarcado com esse nome."""
    path = Path(source)
    if path.is_file():
        return path.read_text(encoding="utf-8")
    preset = resources.files(PRESETS_PACKAGE) / f"{source}.yaml"
    if preset.is_file():
        return preset.read_text(encoding="utf-8")
    raise ConfigError(f"arquivo ou preset não encontrado: {source} (presets: {', '.join(preset_names())})")


def load_experiment(
    source: Union[str, Path],
    *,
    seed: Optional[int] = None,
    n_trials: Optional[int] = None,
) -> ExperimentConfig:
    config = parse_experiment(read_source(source), seed=seed, n_trials=n_trials)
    logger.debug("experimento %s carregado de %s (seed=%d)", config.experiment, source, config.seed)
    return config
