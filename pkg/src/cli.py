"""
Linha de comando: `doa spectrum|rmse|consistency|identifiability`.

Códigos de saída: 0 sucesso; 2 erro de uso ou de configuração (nada é
gravado); 1 falha de E/S ou numérica.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from src import __version__
from src.array_model import ArrayGeometry, max_identifiable_sources, spark_ula
from src.baselines import spectrum_peaks
from src.config import DOA_JOBS, DOA_LOG_LEVEL, configure_logging
from src.errors import ConfigError, DoaError, DomainError
from src.harness import (
    MAX_GRID_ERROR_DEG,
    ExperimentConfig,
    run_consistency_experiment,
    run_rmse_experiment,
    run_spectrum_experiment,
)
from src.omp import estimate_doas
from src.services.export_results import consistency_csvs, export_results, rmse_csv, spectrum_csv
from src.services.load_experiment import load_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


# ------------------------------- Utilidades ----------------------------------


def _load(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    config = load_experiment(args.config, seed=args.seed, n_trials=args.trials)
    if config.experiment != experiment:
        raise ConfigError(
            f"{args.config} descreve um experimento {config.experiment!r}, não {experiment!r}", key="experiment",
        )
    return config


def _report(paths: Sequence[Path], out_dir: Path) -> None:
    print(f"{len(paths)} arquivos gravados em {out_dir}")


# -------------------------------- Comandos -----------------------------------


def cmd_spectrum(args: argparse.Namespace) -> int:
    config = _load(args, "spectrum")
    spectra = run_spectrum_experiment(config)
    m_sources = config.scenario.n_sources
    peaks = {
        name: (estimate_doas(s, m_sources) if name == "omp" else spectrum_peaks(s, m_sources)).angles_deg
        for name, s in spectra.items()
    }
    files = {f"spectrum_{name}.csv": spectrum_csv(s) for name, s in spectra.items()}
    paths = export_results(args.out, config, files, summary={"peaks_deg": peaks}, gnuplot=args.gnuplot)
    _report(paths, args.out)
    return EXIT_OK


def cmd_rmse(args: argparse.Namespace) -> int:
    config = _load(args, "rmse")
    curves = run_rmse_experiment(config, jobs=args.jobs)
    summary = {
        "matching": "sorted",
        "shortfall_penalty_deg": MAX_GRID_ERROR_DEG,
        "shortfalls": {c.algorithm: [p.shortfalls for p in c.points] for c in curves},
    }
    paths = export_results(args.out, config, {"rmse.csv": rmse_csv(curves)}, summary=summary, gnuplot=args.gnuplot)
    _report(paths, args.out)
    return EXIT_OK


def cmd_consistency(args: argparse.Namespace) -> int:
    config = _load(args, "consistency")
    result = run_consistency_experiment(config, jobs=args.jobs)
    points = config.grid.points
    summary = {
        "stability": result.stability,
        "modal_support_deg": [points[j] for j in result.modal_support],
    }
    files = consistency_csvs(result, points)
    paths = export_results(args.out, config, files, summary=summary, gnuplot=args.gnuplot)
    print(f"estabilidade do suporte: {result.stability:.3f}")
    _report(paths, args.out)
    return EXIT_OK


def cmd_identifiability(args: argparse.Namespace) -> int:
    try:
        geometry = ArrayGeometry(n_sensors=args.n_sensors)
        bound = max_identifiable_sources(geometry, args.rank_x)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    n, r = geometry.n_sensors, args.rank_x
    print(f"N = {n}, rank(X) = {r}, spark(A) = N + 1 = {spark_ula(geometry)}")
    print(f"M < (spark(A) - 1 + rank(X)) / 2 = ({n} + {r}) / 2 = {(n + r) / 2:g}")
    print(f"M ≤ {bound}")
    return EXIT_OK


# --------------------------------- Parser ------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doa",
        description="Estimação de DOA por OMP em grade fixa e métodos de subespaço de referência.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=DOA_LOG_LEVEL, help="nível de log (padrão: DOA_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    experiments: Dict[str, Callable[[argparse.Namespace], int]] = {
        "spectrum": cmd_spectrum,
        "rmse": cmd_rmse,
        "consistency": cmd_consistency,
    }
    helps = {
        "spectrum": "espectros normalizados de cada algoritmo (uma realização)",
        "rmse": "curvas de RMSE versus SNR por Monte Carlo",
        "consistency": "ensaios de consistência do OMP com Φ resorteada",
    }
    for name, handler in experiments.items():
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="arquivo YAML, manifest.json ou nome de preset (simulation1…4)")
        p.add_argument("--out", type=Path, default=Path("results"), help="diretório de saída (padrão: results)")
        p.add_argument("--seed", type=int, default=None, help="semente mestre (sobrepõe o arquivo e DOA_SEED)")
        p.add_argument("--jobs", type=int, default=DOA_JOBS, help="ensaios simultâneos (padrão: DOA_JOBS)")
        p.add_argument("--trials", type=int, default=None, help="sobrepõe o número de ensaios do arquivo")
        p.add_argument("--gnuplot", action="store_true", help="grava também plot.gp")
        p.set_defaults(handler=handler)

    p = sub.add_parser("identifiability", help="maior número de fontes identificáveis")
    p.add_argument("n_sensors", type=int)
    p.add_argument("rank_x", type=int)
    p.set_defaults(handler=cmd_identifiability)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    configure_logging(args.log_level)
    if getattr(args, "jobs", 1) < 1:
        print("erro: --jobs deve ser >= 1", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.handler(args)
    except ConfigError as exc:
        logger.error("configuração inválida: %s", exc)
        print(f"erro: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DoaError) as exc:
        logger.error("falha na execução: %s", exc)
        print(f"erro: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
