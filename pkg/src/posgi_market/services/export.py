"""Flat-file export of runs and experiment summaries."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, List, Union

import pandas as pd

from .. import __version__
from ..models.domain import ExperimentSummary, RunResult

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_CSV_OPTIONS = {"index": False, "float_format": "%.12g", "lineterminator": "\n"}


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, **_CSV_OPTIONS)
    except OSError as exc:
        raise OSError(f"Écriture impossible: {path} ({exc})") from exc
    return path


def _write_manifest(payload: Dict[str, object], path: Path) -> Path:
    text = json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    try:
        with path.open("w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as exc:
        raise OSError(f"Écriture impossible: {path} ({exc})") from exc
    return path


def _export_run(result: RunResult, out_dir: Path) -> List[Path]:
    prices = pd.DataFrame({"period": range(len(result.prices)), "price": result.prices})

    rows = []
    for agent in range(len(result.strategies)):
        for period in range(len(result.prices)):
            rows.append({
                "period": period,
                "agent": agent,
                "action": result.actions[agent][period],
                "reward": result.rewards[agent][period],
                "utility": result.utilities[agent][period],
                "cumulative_utility": result.cumulative_utilities[agent][period],
            })
    agents = pd.DataFrame(rows, columns=["period", "agent", "action", "reward", "utility", "cumulative_utility"])
    agents = agents.sort_values(["period", "agent"], kind="stable")

    manifest = {
        "kind": "run",
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "seed": result.seed,
        "config": result.config.model_dump(mode="json"),
        "final_q": result.final_q,
        "final_price": result.final_price,
        "settlement": result.settlement,
        "maker_loss": result.maker_loss,
        "events": {
            "truncation": result.truncation_events,
            "fallback": result.fallback_events,
            "inconsistency": result.inconsistency_events,
            "existence_failures": result.existence_failures,
        },
    }
    return [
        _write_csv(prices, out_dir / "prices.csv"),
        _write_csv(agents, out_dir / "agents.csv"),
        _write_manifest(manifest, out_dir / "manifest.json"),
    ]


def _export_summary(summary: ExperimentSummary, out_dir: Path) -> List[Path]:
    table = pd.DataFrame(
        [
            {
                "strategy": row.strategy.value,
                "mean_utility": row.mean_utility,
                "ci_low": row.ci_low,
                "ci_high": row.ci_high,
                "fce_percent": row.fce_percent,
                "final_price_error": row.final_price_error,
            }
            for row in summary.rows
        ],
        columns=["strategy", "mean_utility", "ci_low", "ci_high", "fce_percent", "final_price_error"],
    )

    reference = summary.reference
    comparison = pd.DataFrame(
        [
            {
                "strategy": row.strategy.value,
                "runs": row.runs,
                "mean_final_price": row.mean_final_price,
                "price_gap_percent": row.price_gap_percent,
                "utility_gap_percent": row.utility_gap_percent,
            }
            for row in summary.rows
        ]
        + [{
            "strategy": "reference",
            "runs": reference.runs,
            "mean_final_price": reference.mean_final_price,
            "price_gap_percent": 0.0,
            "utility_gap_percent": 0.0,
        }],
        columns=["strategy", "runs", "mean_final_price", "price_gap_percent", "utility_gap_percent"],
    )

    paths = pd.DataFrame({"period": range(summary.base.horizon)})
    for label in sorted(summary.price_paths):
        paths[label] = summary.price_paths[label]

    manifest = {
        "kind": "experiment",
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "mode": summary.mode,
        "seeds": summary.seeds,
        "pairings": [[k.value for k in pairing] for pairing in summary.pairings],
        "config": summary.base.model_dump(mode="json"),
        "reference": reference.model_dump(mode="json"),
    }
    return [
        _write_csv(table, out_dir / "summary.csv"),
        _write_csv(comparison, out_dir / "comparison.csv"),
        _write_csv(paths, out_dir / "price_paths.csv"),
        _write_manifest(manifest, out_dir / "manifest.json"),
    ]


def export_results(result: Union[RunResult, ExperimentSummary], path: Path) -> List[Path]:
    """Write CSV files plus ``manifest.json`` into the directory ``path``.

    Output is byte-stable for identical inputs.
    """

    out_dir = Path(path)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"Création du dossier impossible: {out_dir} ({exc})") from exc

    if isinstance(result, RunResult):
        written = _export_run(result, out_dir)
    elif isinstance(result, ExperimentSummary):
        written = _export_summary(result, out_dir)
    else:
        raise ValueError(f"Type de résultat non exportable: {type(result).__name__}")

    logger.info("%s fichier(s) écrit(s) dans %s", len(written), out_dir)
    return written


__all__ = ["SCHEMA_VERSION", "export_results"]
