"""Batch comparisons of strategies over seeded worlds.

Every pairing is run on the same seeds as a CE-only "twin" population. The
world (signals) only depends on the seed, so the twin sees exactly the same
information and its actions are the reference for the agreement percentage.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..models.domain import (
    ExperimentSummary,
    MarketConfig,
    RunResult,
    StrategyKind,
    StrategySummary,
)
from .simulation import run_market
from .strategies import agreement_rate

logger = logging.getLogger(__name__)

ExperimentMode = Literal["agreement", "head-to-head", "custom"]
Z_95 = 1.96

Pairing = Tuple[StrategyKind, ...]


def build_pairings(mode: ExperimentMode, baselines: Sequence[StrategyKind], n_agents: int) -> List[Pairing]:
    """Agreement: each baseline plays alone; head-to-head: baseline against CE."""

    if not baselines:
        raise ValueError("Au moins une stratégie de référence est requise")
    kinds = [StrategyKind(k) for k in baselines]
    if mode == "agreement":
        return [(kind,) * n_agents for kind in kinds]
    if mode == "head-to-head":
        return [(kind,) + (StrategyKind.CE,) * (n_agents - 1) for kind in kinds]
    raise ValueError(f"Mode sans appariements prédéfinis: {mode!r}")


def pairing_label(pairing: Iterable[StrategyKind]) -> str:
    return "-".join(StrategyKind(k).value for k in pairing)


def _run_all(configs: List[MarketConfig], workers: int) -> List[RunResult]:
    if workers <= 1 or len(configs) <= 1:
        return [run_market(config) for config in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_market, configs))


def _confidence(values: pd.Series) -> Tuple[Optional[float], Optional[float]]:
    count = int(values.count())
    if count < 2:
        return None, None
    half = Z_95 * float(values.std(ddof=1)) / math.sqrt(count)
    mean = float(values.mean())
    return mean - half, mean + half


def _summarize(strategy: StrategyKind, agents: pd.DataFrame, runs: pd.DataFrame) -> StrategySummary:
    low, high = _confidence(agents["utility"])
    return StrategySummary(
        strategy=strategy,
        runs=int(runs["seed"].nunique()),
        mean_utility=float(agents["utility"].mean()),
        ci_low=low,
        ci_high=high,
        fce_percent=float(agents["fce"].mean()),
        final_price_error=float(runs["price_error"].mean()),
        mean_final_price=float(runs["final_price"].mean()),
    )


def _gap(value: float, reference: float) -> Optional[float]:
    if value == 0.0:
        return None
    return 100.0 * (reference - value) / abs(value)


def run_experiment(
    base: MarketConfig,
    pairings: Sequence[Sequence[StrategyKind]],
    n_runs: Optional[int] = None,
    seeds: Optional[Sequence[int]] = None,
    *,
    workers: int = 1,
    mode: ExperimentMode = "custom",
) -> ExperimentSummary:
    """Run every pairing on every seed and aggregate per strategy.

    Utility CIs are 95% normal approximations over agent-runs. Gaps are
    expressed relative to the CE-only reference population: a positive utility
    gap means the reference earns that much more, a positive price gap means
    the strategy's final price sits that much further from the outcome.
    """

    if not pairings:
        raise ValueError("La liste des appariements est vide")
    normalized: List[Pairing] = [tuple(StrategyKind(k) for k in pairing) for pairing in pairings]
    for pairing in normalized:
        if len(pairing) != base.n_agents:
            raise ValueError(f"Appariement {pairing_label(pairing)}: {base.n_agents} agents attendus")

    if seeds is None:
        count = n_runs if n_runs is not None else 1
        seed_list = list(range(base.seed, base.seed + count))
    else:
        seed_list = [int(s) for s in seeds]
    if not seed_list or (n_runs is not None and n_runs != len(seed_list)):
        raise ValueError("n_runs doit être >= 1 et cohérent avec la liste des graines")
    if len(set(seed_list)) != len(seed_list):
        raise ValueError("Graines dupliquées")

    twin: Pairing = (StrategyKind.CE,) * base.n_agents
    planned: List[Pairing] = [twin] + [p for p in normalized if p != twin]
    configs = [base.with_overrides(strategies=pairing, seed=seed) for pairing in planned for seed in seed_list]
    logger.info("Expérience: %s appariement(s) x %s graine(s), %s simulation(s)", len(normalized), len(seed_list), len(configs))

    results = _run_all(configs, workers)
    by_key: Dict[Tuple[Pairing, int], RunResult] = {
        (tuple(r.strategies), r.seed): r for r in sorted(results, key=lambda r: r.seed)
    }

    agent_rows: List[Dict[str, object]] = []
    run_rows: List[Dict[str, object]] = []
    for pairing in planned:
        for seed in seed_list:
            result = by_key[(pairing, seed)]
            reference = by_key[(twin, seed)]
            error = abs(result.final_price - result.outcome)
            label = pairing_label(pairing)
            for strategy in dict.fromkeys(pairing):
                run_rows.append({
                    "pairing": label,
                    "seed": seed,
                    "strategy": strategy,
                    "final_price": result.final_price,
                    "price_error": error,
                })
            for agent, strategy in enumerate(pairing):
                agent_rows.append({
                    "pairing": label,
                    "seed": seed,
                    "agent": agent,
                    "strategy": strategy,
                    "utility": result.total_utility(agent),
                    "fce": agreement_rate(result.actions[agent], reference.actions[agent]),
                })

    agents = pd.DataFrame(agent_rows)
    runs = pd.DataFrame(run_rows)
    twin_label = pairing_label(twin)

    reference = _summarize(
        StrategyKind.CE,
        agents[agents["pairing"] == twin_label],
        runs[runs["pairing"] == twin_label],
    )

    compared_labels = {pairing_label(p) for p in normalized}
    agents_cmp = agents[agents["pairing"].isin(compared_labels)]
    runs_cmp = runs[runs["pairing"].isin(compared_labels)]

    rows: List[StrategySummary] = []
    for strategy in dict.fromkeys(k for pairing in normalized for k in pairing):
        summary = _summarize(
            strategy,
            agents_cmp[agents_cmp["strategy"] == strategy],
            runs_cmp[runs_cmp["strategy"] == strategy],
        )
        summary.utility_gap_percent = _gap(summary.mean_utility, reference.mean_utility)
        if reference.final_price_error > 0.0:
            summary.price_gap_percent = (
                100.0 * (summary.final_price_error - reference.final_price_error) / reference.final_price_error
            )
        rows.append(summary)

    price_paths: Dict[str, List[float]] = {}
    for pairing in planned:
        paths = np.array([by_key[(pairing, seed)].prices for seed in seed_list])
        price_paths[pairing_label(pairing)] = paths.mean(axis=0).tolist()

    return ExperimentSummary(
        mode=mode,
        n_runs=len(seed_list),
        seeds=seed_list,
        pairings=[list(p) for p in normalized],
        rows=rows,
        reference=reference,
        price_paths=price_paths,
        base=base,
    )


__all__ = ["ExperimentMode", "build_pairings", "pairing_label", "run_experiment"]
