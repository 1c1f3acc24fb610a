#!/usr/bin/env python3
"""Risk-neutral and risk-averse strategy comparisons into data/results/."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path


def _ensure_src_on_path() -> None:
    project_root = Path(__file__).resolve().parents[1]
    src_dir = project_root / "src"
    if str(src_dir) not in sys.path:
        sys.path.insert(0, str(src_dir))


def main() -> None:
    _ensure_src_on_path()
    from posgi_market.core.config import settings
    from posgi_market.models.domain import BASELINE_STRATEGIES, MarketConfig, StrategyKind
    from posgi_market.services.experiment import build_pairings, run_experiment
    from posgi_market.services.export import export_results

    parser = argparse.ArgumentParser(description="Comparaisons CE contre stratégies de référence, θ = 0 et θ = 0.8")
    parser.add_argument("--runs", type=int, default=settings.default_runs, help="Nombre de graines par condition")
    parser.add_argument("--workers", type=int, default=settings.default_workers, help="Processus parallèles")
    args = parser.parse_args()

    logging.basicConfig(level=settings.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    for theta in (0.0, 0.8):
        base = MarketConfig(strategies=(StrategyKind.CE, StrategyKind.CE), thetas=(theta, theta))
        for mode in ("agreement", "head-to-head"):
            pairings = build_pairings(mode, BASELINE_STRATEGIES, base.n_agents)
            summary = run_experiment(base, pairings, n_runs=args.runs, workers=args.workers, mode=mode)
            out_dir = settings.results_dir / f"theta_{theta:g}" / mode
            export_results(summary, out_dir)
            print(f"theta={theta:g} mode={mode} -> {out_dir}")


if __name__ == "__main__":
    main()
