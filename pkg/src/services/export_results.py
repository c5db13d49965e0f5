#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Exporta os resultados dos experimentos para disco.
- Saídas: CSV (UTF-8, cabeçalho, 9 algarismos significativos) e manifest.json.
- Script gnuplot opcional apontando para os CSVs gerados.
- Escrita atômica: tudo é renderizado em memória, gravado num diretório de
  preparação dentro de `out_dir` e só então movido para o lugar com os.replace.
  Em caso de falha nenhum arquivo parcial fica em `out_dir`.

O manifesto guarda a configuração resolvida; ele mesmo é um arquivo de
experimento válido (ver services/load_experiment.py).
"""

from __future__ import annotations
import csv
import io
import json
import logging
import os
import shutil
import tempfile
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from src import __version__
from src.harness import ConsistencyResult, ExperimentConfig, RmseCurve
from src.omp import AngleSpectrum

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
GNUPLOT_NAME = "plot.gp"


# ------------------------------- Utilidades ----------------------------------


def json_fallback(o):
    """Converte objetos não-serializáveis (numpy, datas, caminhos) para representações JSON-safe."""
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    if isinstance(o, (datetime, date)):
        return o.isoformat()
    if isinstance(o, (set, tuple)):
        return list(o)
    if isinstance(o, Path):
        return str(o)
    return str(o)


def format_number(value: float) -> str:
    """Número com 9 algarismos significativos."""
    return f"{float(value):.9g}"


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buffer.getvalue()


def _angles_label(angles: Iterable[float]) -> str:
    return " ".join(format_number(a) for a in angles)


# ------------------------------ Renderização ---------------------------------


def spectrum_csv(spectrum: AngleSpectrum) -> str:
    return _csv_text(
        ("angle_deg", "normalized_power"),
        zip(spectrum.angles_deg.tolist(), spectrum.power.tolist()),
    )


def rmse_csv(curves: Sequence[RmseCurve]) -> str:
    rows = (
        (curve.algorithm, p.snr_db, p.rmse_deg, curve.n_trials, p.stderr_deg)
        for curve in curves
        for p in curve.points
    )
    return _csv_text(("algorithm", "snr_db", "rmse_deg", "n_trials", "stderr_deg"), rows)


def consistency_csvs(result: ConsistencyResult, grid_points: np.ndarray) -> Dict[str, str]:
    """Um CSV por ensaio, o espectro agregado e o resumo de estabilidade do suporte."""
    files = {
        f"consistency_trial_{t}.csv": spectrum_csv(spectrum) for t, spectrum in enumerate(result.spectra)
    }
    files["consistency_aggregate.csv"] = spectrum_csv(result.aggregate)
    modal = [grid_points[j] for j in result.modal_support]
    rows = [
        (t, _angles_label(grid_points[j] for j in support), int(support == result.modal_support))
        for t, support in enumerate(result.supports)
    ]
    files["consistency_supports.csv"] = _csv_text(("trial", "support_deg", "is_modal"), rows)
    files["consistency_summary.csv"] = _csv_text(
        ("stability", "n_trials", "modal_support_deg"),
        [(float(result.stability), result.n_trials, _angles_label(modal))],
    )
    return files


def gnuplot_script(experiment: str, csv_names: Sequence[str], algorithms: Sequence[str] = ()) -> str:
    """Script gnuplot mínimo para os CSVs gerados (plotagem fora do processo)."""
    lines: List[str] = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set grid",
    ]
    if experiment == "rmse":
        lines += [
            "set xlabel 'SNR (dB)'",
            "set ylabel 'RMSE (graus)'",
            "set logscale y",
            f"plot for [alg in \"{' '.join(algorithms)}\"] "
            "'rmse.csv' using 2:(strcol(1) eq alg ? $3 : 1/0) with linespoints title alg",
        ]
    else:
        plots = ", ".join(f"'{name}' using 1:2 with lines title '{Path(name).stem}'" for name in csv_names)
        lines += [
            "set xlabel 'ângulo (graus)'",
            "set ylabel 'espectro normalizado'",
            "set xrange [-90:90]",
            f"plot {plots}",
        ]
    return "\n".join(lines) + "\n"


def manifest_json(
    config: ExperimentConfig,
    files: Sequence[str],
    summary: Optional[Mapping[str, Any]] = None,
) -> str:
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "artifact_version": __version__,
        "timestamp": datetime.now(timezone.utc),
        "seed": int(config.seed),
        "files": sorted(files),
        "summary": dict(summary or {}),
        "config": config.to_dict(),
    }
    return json.dumps(manifest, ensure_ascii=False, indent=2, default=json_fallback) + "\n"


# -------------------------------- Escrita ------------------------------------


def write_outputs(out_dir: Path, files: Mapping[str, str]) -> List[Path]:
    """Grava os arquivos de forma atômica; retorna os caminhos finais.

    Se uma troca falhar no meio do caminho, os arquivos já movidos são
    removidos e as versões anteriores restauradas antes de propagar o erro.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    previous = Path(tempfile.mkdtemp(prefix=".previous-", dir=out_dir))
    moved: List[str] = []
    try:
        for name, content in files.items():
            (staging / name).write_text(content, encoding="utf-8")
        try:
            for name in files:
                target = out_dir / name
                moved.append(name)
                if target.exists():
                    os.replace(target, previous / name)
                os.replace(staging / name, target)
        except OSError:
            for name in reversed(moved):
                target = out_dir / name
                if (previous / name).exists():
                    os.replace(previous / name, target)
                elif target.exists():
                    target.unlink()
            raise
        written = [out_dir / name for name in files]
    finally:
        shutil.rmtree(staging, ignore_errors=True)
        shutil.rmtree(previous, ignore_errors=True)

    for path in written:
        logger.info("gravado %s", path)
    return written


def export_results(
    out_dir: Path,
    config: ExperimentConfig,
    data_files: Mapping[str, str],
    *,
    summary: Optional[Mapping[str, Any]] = None,
    gnuplot: bool = False,
) -> List[Path]:
    """Acrescenta manifesto (e script gnuplot) aos CSVs e grava tudo em `out_dir`."""
    files: Dict[str, str] = dict(data_files)
    if gnuplot:
        files[GNUPLOT_NAME] = gnuplot_script(config.experiment, sorted(data_files), [a.name for a in config.algorithms])
    files[MANIFEST_NAME] = manifest_json(config, list(files) + [MANIFEST_NAME], summary)
    return write_outputs(out_dir, files)
