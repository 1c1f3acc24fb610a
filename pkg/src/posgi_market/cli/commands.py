"""Command line: simulations, batch comparisons, CE solving and LMSR quotes."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from ..core.config import settings
from ..core.errors import UsageError
from ..models.domain import BASELINE_STRATEGIES, MarketConfig, StrategyKind
from ..models.game import GameDocument
from ..services.equilibrium import NormalFormGame, incentive_slacks, pareto_ce, solve_ce
from ..services.experiment import build_pairings, run_experiment
from ..services.export import export_results
from ..services.lmsr import cost, price
from ..services.simulation import run_market

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

# MarketConfig field -> flag destination, for values read from --config.
_FIELD_TO_FLAG = {
    "horizon": "days",
    "liquidity": "b",
    "seed": "seed",
    "outcome": "outcome",
    "max_units": "max_units",
    "signal_shift": "signal_shift",
    "opponent_model": "opponent_model",
    "negative_utility": "negative_utility",
    "ce_solver": "ce_solver",
    "pace_seconds": "pace",
    "n_agents": "n_agents",
    "runs": "runs",
    "workers": "workers",
    "mode": "mode",
}
_INFO_FLAGS = ("rate", "positive_prob", "reliability")
_LIST_FLAGS = {"strategies": "agents", "thetas": "theta", "baselines": "baselines"}


# Parsing helpers -------------------------------------------------------------


def _parse_strategies(text: str) -> Tuple[StrategyKind, ...]:
    kinds: List[StrategyKind] = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        try:
            kinds.append(StrategyKind(token))
        except ValueError as exc:
            allowed = ", ".join(k.value for k in StrategyKind)
            raise UsageError(f"Stratégie inconnue: {token!r} (attendu: {allowed})") from exc
    if not kinds:
        raise UsageError("Aucune stratégie fournie")
    return tuple(kinds)


def _parse_floats(text: str, name: str) -> List[float]:
    try:
        values = [float(token) for token in str(text).split(",") if token.strip()]
    except ValueError as exc:
        raise UsageError(f"--{name}: liste de nombres attendue, reçu {text!r}") from exc
    if not values:
        raise UsageError(f"--{name}: au moins une valeur est requise")
    return values


def _per_agent(values: List[float], n_agents: int, name: str) -> Tuple[float, ...]:
    if len(values) == 1:
        return (values[0],) * n_agents
    if len(values) != n_agents:
        raise UsageError(f"--{name}: {len(values)} valeurs pour {n_agents} agents")
    return tuple(values)


def _joined(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def _resolve(path: Path, folder: Path) -> Path:
    """Bare file names fall back to the project data folder."""

    path = Path(path)
    if not path.exists() and not path.is_absolute() and (folder / path).exists():
        return folder / path
    return path


def _read_json(path: Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Lecture impossible: {path} ({exc})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: JSON invalide ligne {exc.lineno}, colonne {exc.colno}: {exc.msg}") from exc


def _describe_validation(path: Path, exc: ValidationError) -> str:
    details = "; ".join(
        f"{'.'.join(str(part) for part in error['loc']) or '<racine>'}: {error['msg']}" for error in exc.errors()
    )
    return f"{path}: {details}"


def load_config_file(path: Path) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Split a JSON config into flag defaults and MarketConfig passthrough fields."""

    path = _resolve(path, settings.configs_dir)
    data = _read_json(path)
    if not isinstance(data, dict):
        raise UsageError(f"{path}: un objet JSON est attendu")
    data = dict(data)

    flags: Dict[str, Any] = {}
    for key, dest in _FIELD_TO_FLAG.items():
        if key in data:
            flags[dest] = data.pop(key)
    for key, dest in _LIST_FLAGS.items():
        if key in data:
            flags[dest] = _joined(data.pop(key))
    if "clamp" in data:
        flags["no_clamp"] = not bool(data.pop("clamp"))

    info = data.pop("info", None) or {}
    if not isinstance(info, dict):
        raise UsageError(f"{path}: info doit être un objet JSON")
    info = dict(info)
    for key in _INFO_FLAGS:
        if key in info:
            flags[key] = _joined(info.pop(key)) if key == "reliability" else info.pop(key)
    if info:
        raise UsageError(f"{path}: champs info inconnus: {', '.join(sorted(info))}")
    return flags, data


def _market_config(args: argparse.Namespace, strategies: Sequence[StrategyKind]) -> MarketConfig:
    n_agents = len(strategies)
    reliability_values = _parse_floats(args.reliability, "reliability")
    reliability: Any = (
        reliability_values[0] if len(reliability_values) == 1 else _per_agent(reliability_values, n_agents, "reliability")
    )

    seed = settings.seed_override
    if seed is None:
        seed = args.seed
    else:
        logger.info("Graine imposée par POSGI_SEED: %s", seed)

    data: Dict[str, Any] = dict(getattr(args, "config_values", None) or {})
    data.update(
        horizon=args.days,
        n_agents=n_agents,
        liquidity=args.b,
        strategies=tuple(strategies),
        thetas=_per_agent(_parse_floats(args.theta, "theta"), n_agents, "theta"),
        outcome=args.outcome,
        seed=seed,
        max_units=args.max_units,
        clamp=not args.no_clamp,
        signal_shift=args.signal_shift,
        opponent_model=args.opponent_model,
        negative_utility=args.negative_utility,
        ce_solver=args.ce_solver,
        pace_seconds=args.pace,
        info={"rate": args.rate, "positive_prob": args.positive_prob, "reliability": reliability},
    )
    try:
        return MarketConfig.model_validate(data)
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc


def load_game(path: Path) -> NormalFormGame:
    path = _resolve(path, settings.games_dir)
    data = _read_json(path)
    try:
        document = GameDocument.model_validate(data)
    except ValidationError as exc:
        raise UsageError(_describe_validation(path, exc)) from exc
    try:
        return NormalFormGame.from_document(document)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc


# Parser ----------------------------------------------------------------------


def _add_market_flags(parser: argparse.ArgumentParser) -> None:
    defaults = MarketConfig()
    parser.add_argument("--config", type=Path, default=None, help="Fichier JSON de paramètres (les options priment)")
    parser.add_argument("--days", type=int, default=defaults.horizon, help="Nombre de périodes de l'événement")
    parser.add_argument("--b", type=float, default=defaults.liquidity, help="Paramètre de liquidité LMSR")
    parser.add_argument("--seed", type=int, default=defaults.seed, help="Graine (POSGI_SEED prime si définie)")
    parser.add_argument(
        "--theta",
        default="0.0",
        help="Facteur CRRA, une valeur pour tous les agents ou une liste séparée par des virgules",
    )
    parser.add_argument("--outcome", type=int, choices=[0, 1], default=defaults.outcome, help="Issue réalisée")
    parser.add_argument("--rate", type=float, default=defaults.info.rate, help="Taux d'arrivée des signaux (Poisson)")
    parser.add_argument(
        "--positive-prob",
        type=float,
        default=defaults.info.positive_prob,
        help="Probabilité qu'un signal arrivé soit correct",
    )
    parser.add_argument(
        "--reliability",
        default=str(defaults.info.reliability),
        help="Fiabilité du canal de signal, scalaire ou liste par agent",
    )
    parser.add_argument(
        "--max-units",
        type=int,
        default=None,
        help="Borne de l'espace d'états (défaut: n_agents x days)",
    )
    parser.add_argument("--no-clamp", action="store_true", help="Refuser la troncature de l'espace d'états")
    parser.add_argument(
        "--signal-shift",
        type=float,
        default=defaults.signal_shift,
        help="Décalage de l'estimation rapportée par le signal de la période",
    )
    parser.add_argument(
        "--opponent-model",
        choices=["uniform", "empirical"],
        default=defaults.opponent_model,
        help="Modèle des adversaires dans le filtre de croyance",
    )
    parser.add_argument(
        "--negative-utility",
        choices=["principal", "signed"],
        default=defaults.negative_utility,
        help="Conversion CRRA des récompenses négatives",
    )
    parser.add_argument(
        "--ce-solver",
        choices=["auto", "utilitarian", "pareto", "algorithm"],
        default=defaults.ce_solver,
        help="Équilibre corrélé utilisé par le médiateur",
    )
    parser.add_argument("--pace", type=float, default=defaults.pace_seconds, help="Pause en secondes par période")
    parser.add_argument("--out", type=Path, default=None, help="Dossier de sortie (défaut: POSGI_RESULTS_DIR)")


def build_parser(config_defaults: Optional[Dict[str, Any]] = None) -> argparse.ArgumentParser:
    formatter = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="posgi-market",
        description="Simulateur de marché prédictif LMSR avec agents à équilibre corrélé.",
        formatter_class=formatter,
    )
    parser.add_argument("--log-level", default=settings.log_level, help="Niveau de journalisation")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Simuler un événement", formatter_class=formatter)
    _add_market_flags(run)
    run.add_argument("--agents", default="ce,ce", help="Stratégies des agents (zi, zip, cp, gd, dp, ce)")
    run.set_defaults(handler=cmd_run)

    compare = sub.add_parser("compare", help="Comparer des stratégies sur plusieurs graines", formatter_class=formatter)
    _add_market_flags(compare)
    compare.add_argument(
        "--baselines",
        default=",".join(k.value for k in BASELINE_STRATEGIES),
        help="Stratégies comparées à CE",
    )
    compare.add_argument("--n-agents", type=int, default=2, help="Nombre d'agents par simulation")
    compare.add_argument(
        "--mode",
        choices=["agreement", "head-to-head"],
        default="agreement",
        help="agreement: population homogène; head-to-head: une stratégie contre des agents CE",
    )
    compare.add_argument("--runs", type=int, default=settings.default_runs, help="Nombre de graines")
    compare.add_argument("--workers", type=int, default=settings.default_workers, help="Processus parallèles")
    compare.set_defaults(handler=cmd_compare)

    if config_defaults:
        run.set_defaults(**config_defaults)
        compare.set_defaults(**config_defaults)

    solve = sub.add_parser("ce-solve", help="Résoudre l'équilibre corrélé d'un jeu JSON", formatter_class=formatter)
    solve.add_argument("game", type=Path, help="Fichier de jeu {players, actions, utilities}")
    solve.add_argument("--pareto", action="store_true", help="Restreindre le support aux profils Pareto-optimaux")
    solve.add_argument(
        "--objective",
        choices=["utilitarian", "uniform"],
        default="utilitarian",
        help="Objectif du programme linéaire",
    )
    solve.set_defaults(handler=cmd_ce_solve)

    quote = sub.add_parser("quote", help="Coût et prix LMSR d'un vecteur de quantités", formatter_class=formatter)
    quote.add_argument("--q", default="0,0", help="Quantités par titre, séparées par des virgules")
    quote.add_argument("--b", type=float, default=100.0, help="Paramètre de liquidité LMSR")
    quote.set_defaults(handler=cmd_quote)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse ``argv``; a ``--config`` file becomes defaults and is re-parsed under the flags."""

    args = build_parser().parse_args(argv)
    config_path = getattr(args, "config", None)
    if config_path is None:
        return args

    flags, passthrough = load_config_file(config_path)
    flags["config_values"] = passthrough
    return build_parser(flags).parse_args(argv)


# Commands --------------------------------------------------------------------


def _out_dir(args: argparse.Namespace) -> Path:
    return args.out if args.out is not None else settings.results_dir


def cmd_run(args: argparse.Namespace) -> int:
    config = _market_config(args, _parse_strategies(args.agents))
    result = run_market(config)
    written = export_results(result, _out_dir(args))

    print(f"prix_final={result.final_price:.6f}")
    print(f"perte_teneur={result.maker_loss:.6f}")
    for agent, kind in enumerate(result.strategies):
        print(f"agent {agent} ({kind.value}): utilite={result.total_utility(agent):.6f}")
    print(f"fichiers={len(written)} dossier={_out_dir(args)}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    baselines = _parse_strategies(args.baselines)
    if args.runs < 1:
        raise UsageError("--runs doit être >= 1")
    if args.workers < 1:
        raise UsageError("--workers doit être >= 1")

    base = _market_config(args, (StrategyKind.CE,) * args.n_agents)
    pairings = build_pairings(args.mode, baselines, args.n_agents)
    summary = run_experiment(base, pairings, n_runs=args.runs, workers=args.workers, mode=args.mode)
    export_results(summary, _out_dir(args))

    print("strategie  utilite_moyenne  ic95  fce%  erreur_prix")
    for row in summary.rows:
        interval = "-" if row.ci_low is None else f"[{row.ci_low:.4f}, {row.ci_high:.4f}]"
        print(
            f"{row.strategy.value:<10} {row.mean_utility:.6f}  {interval}  "
            f"{row.fce_percent:.1f}  {row.final_price_error:.4f}"
        )
    print(f"reference (ce): utilite={summary.reference.mean_utility:.6f} erreur_prix={summary.reference.final_price_error:.4f}")
    return EXIT_OK


def cmd_ce_solve(args: argparse.Namespace) -> int:
    game = load_game(args.game)
    ce = None
    if args.pareto:
        ce = pareto_ce(game)
        if ce is None:
            print("Aucun équilibre corrélé à support Pareto; équilibre utilitariste affiché")
    if ce is None:
        ce = solve_ce(game, args.objective)

    print(f"methode={ce.method}")
    for index, profile in enumerate(game.profiles):
        label = ",".join(game.profile_label(profile))
        print(f"p({label})={ce.probs[index]:.6f}")
    for player, value in zip(game.players, ce.expected_utilities(game)):
        print(f"utilite[{player}]={value:.6f}")
    for player, rec, dev, slack in incentive_slacks(game, ce.probs):
        print(f"ecart[{game.players[player]}: {game.actions[player][rec]}->{game.actions[player][dev]}]={slack:.6f}")
    return EXIT_OK


def cmd_quote(args: argparse.Namespace) -> int:
    q = np.asarray(_parse_floats(args.q, "q"))
    if args.b <= 0.0:
        raise UsageError(f"--b doit être > 0: {args.b}")
    prices = price(q, args.b)
    print(f"cout={cost(q, args.b):.6f}")
    for index, value in enumerate(prices):
        print(f"prix[{index}]={value:.6f}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(
            level=str(args.log_level).upper(),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        return int(args.handler(args))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE if exc.code else EXIT_OK
    except UsageError as exc:
        print(f"Erreur: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"Erreur: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


__all__ = [
    "EXIT_OK",
    "EXIT_RUNTIME",
    "EXIT_USAGE",
    "build_parser",
    "cmd_ce_solve",
    "cmd_compare",
    "cmd_quote",
    "cmd_run",
    "load_config_file",
    "load_game",
    "main",
    "parse_args",
]
