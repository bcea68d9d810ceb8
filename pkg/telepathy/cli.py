"""
Command-line entry point for Telepathy.

Values go to stdout, logs to stderr. Exit codes: 0 success, 2 invalid input, 3 size or
dimension cap exceeded, 4 network or harness failure.
"""

import argparse
import asyncio
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import yaml
from pydantic import ValidationError

from telepathy import __version__
from telepathy.catalog.games import PRESETS, LoadBalancingSpec, load_balancing
from telepathy.catalog.rendezvous import RendezvousSpec, corner_square_spec, rendezvous
from telepathy.config.config import Config
from telepathy.game.core import (
    average_utility,
    behavior_from_deterministic,
    dump_behavior,
    dump_game,
    game_to_dict,
    load_behavior,
    load_game,
    no_signaling_check,
)
from telepathy.harness.montecarlo import monte_carlo
from telepathy.harness.party import (
    deterministic_party_files,
    dump_party_files,
    lc_witness_party_files,
    load_party_strategy,
    party_run,
)
from telepathy.harness.referee import referee_serve
from telepathy.latency.model import comm_graph, load_comm_graph, load_scenario
from telepathy.models.errors import (
    CapExceeded,
    GameValidationError,
    HarnessError,
    ShapeMismatch,
    SpecInvalid,
)
from telepathy.quantum.seesaw import SeesawConfig, seesaw_optimize
from telepathy.quantum.strategy import (
    behavior_from_quantum,
    bell_violation,
    chsh_optimal_strategy,
    dump_strategy,
    ghz_optimal_strategy,
    load_strategy,
    validate_qstrategy,
)
from telepathy.report.report import RunReport, game_digest, load_report, render_report
from telepathy.solver.classical import (
    classical_value,
    lc_classical_value,
    strategy_space_size,
)

logger = logging.getLogger("telepathy.cli")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CAP = 3
EXIT_HARNESS = 4

KNOWN_STRATEGIES = {"chsh": chsh_optimal_strategy, "ghz": ghz_optimal_strategy}


def _value(x: float) -> str:
    return f"{x:.12g}"


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise SpecInvalid(f"Expected a comma-separated list of integers, got '{text}'") from e


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise SpecInvalid(f"Expected a comma-separated list of numbers, got '{text}'") from e


def _pick(flag, configured):
    return configured if flag is None else flag


def _write_report(report: RunReport, path: Optional[str]) -> None:
    if path:
        report.dump(path)
        logger.info(f"Wrote report to {path}")


# --- subcommands ---


def cmd_validate(args, config: Config) -> int:
    game = load_game(args.game)
    print(
        f"valid: {game.n_parties} parties, inputs {list(game.input_sizes)}, "
        f"outputs {list(game.output_sizes)}"
    )
    if args.behavior:
        behavior = load_behavior(args.behavior)
        if behavior.input_sizes != game.input_sizes or behavior.output_sizes != game.output_sizes:
            raise ShapeMismatch(f"Behavior {args.behavior} does not match the game's shape")
        check = no_signaling_check(behavior)
        print(
            f"behavior: average utility {_value(average_utility(game, behavior))}, "
            f"no-signaling {'pass' if check.passed else 'fail'} "
            f"(max violation {check.max_violation:.3e})"
        )
    if args.strategy:
        q = load_strategy(args.strategy)
        validate_qstrategy(q)
        print(
            f"quantum strategy: dims {list(q.dims)}, average utility "
            f"{_value(average_utility(game, behavior_from_quantum(game, q)))}"
        )
    return EXIT_OK


def cmd_classical_value(args, config: Config) -> int:
    game = load_game(args.game)
    budget = _pick(args.budget, config.budget)
    workers = _pick(args.workers, config.solver_workers)
    started = time.perf_counter()

    comm = None
    if args.comm:
        comm = load_comm_graph(args.comm)
    elif args.scenario:
        comm = comm_graph(load_scenario(args.scenario))

    classical = classical_value(game, budget=budget, workers=workers, chunk_size=config.chunk_size)
    values = {"c_star": classical.c_star, "strategy_space_size": strategy_space_size(game)}
    witness = classical.witness.to_labels(game)
    party_files = deterministic_party_files(game, classical.witness)
    printed = classical.c_star
    if comm is not None:
        lc = lc_classical_value(
            game, comm, budget=budget, workers=workers, chunk_size=config.chunk_size
        )
        values["c_star_lc"] = lc.c_star
        values["comm_edges"] = sorted([list(e) for e in comm.edges])
        witness = lc.witness.to_labels(game)
        party_files = lc_witness_party_files(game, lc.witness, classical.witness)
        printed = lc.c_star
    print(_value(printed))

    if args.witness_out:
        Path(args.witness_out).write_text(json.dumps(witness, sort_keys=True, indent=2) + "\n")
    if args.party_strategies_out:
        for path in dump_party_files(party_files, args.party_strategies_out):
            logger.info(f"Wrote party strategy {path}")
    _write_report(
        RunReport(
            command="classical-value",
            game_digest=game_digest(game),
            parameters={"budget": budget, "workers": workers},
            values=values,
            timing={"seconds": time.perf_counter() - started},
        ),
        args.report_out,
    )
    return EXIT_OK


def cmd_quantum_value(args, config: Config) -> int:
    game = load_game(args.game)
    started = time.perf_counter()
    parameters = {}
    if args.known:
        strategy = KNOWN_STRATEGIES[args.known]()
        value = average_utility(game, behavior_from_quantum(game, strategy))
        parameters["known"] = args.known
        seed = None
    else:
        if not args.dims:
            raise SpecInvalid("quantum-value needs --dims (or --known)")
        cfg = SeesawConfig(
            max_iters=_pick(args.iters, config.seesaw_max_iters),
            restarts=_pick(args.restarts, config.seesaw_restarts),
            seed=_pick(args.seed, config.seesaw_seed),
            convergence_eps=config.seesaw_convergence_eps,
            workers=_pick(args.workers, config.seesaw_workers),
            dimension_cap=config.dimension_cap,
            target=args.target,
        )
        result = seesaw_optimize(game, _int_list(args.dims), cfg)
        strategy = result.strategy
        value = result.q_lower
        seed = cfg.seed
        parameters.update(cfg.model_dump())
        parameters.update(
            {
                "dims": list(result.dims),
                "converged": result.converged,
                "best_restart": result.best_restart,
                "restart_values": result.restart_values,
            }
        )
    print(_value(value))

    values = {"q_lower": value}
    if strategy_space_size(game) <= config.budget:
        c_star = classical_value(game, budget=config.budget).c_star
        violation = bell_violation(c_star, value)
        values.update({"c_star": c_star, "gap": violation.gap, "violated": violation.violated})
        print(f"advantage {_value(violation.gap)} over c* = {_value(c_star)}")

    if args.strategy_out:
        dump_strategy(strategy, args.strategy_out)
    if args.behavior_out:
        dump_behavior(behavior_from_quantum(game, strategy), args.behavior_out)
    _write_report(
        RunReport(
            command="quantum-value",
            game_digest=game_digest(game),
            seed=seed,
            parameters=parameters,
            values=values,
            timing={"seconds": time.perf_counter() - started},
        ),
        args.report_out,
    )
    return EXIT_OK


def cmd_simulate(args, config: Config) -> int:
    game = load_game(args.game)
    behavior = load_behavior(args.behavior)
    started = time.perf_counter()
    result = monte_carlo(game, behavior, args.rounds, seed=args.seed)
    print(f"{_value(result.mean)} {_value(result.std_err)}")
    _write_report(
        RunReport(
            command="simulate",
            game_digest=game_digest(game),
            seed=args.seed,
            parameters={"rounds": args.rounds},
            values={"exact": average_utility(game, behavior)},
            stats={"mean": result.mean, "std_err": result.std_err},
            timing={"seconds": time.perf_counter() - started},
        ),
        args.report_out,
    )
    return EXIT_OK


def cmd_referee(args, config: Config) -> int:
    game = load_game(args.game)
    scenario = load_scenario(args.scenario)
    behavior = load_behavior(args.behavior) if args.behavior else None
    started = time.perf_counter()
    session = asyncio.run(
        referee_serve(
            game,
            scenario,
            mode=args.mode,
            n_rounds=args.rounds,
            seed=args.seed,
            policy=_pick(args.late_policy, config.late_policy),
            behavior=behavior,
            clock=_pick(args.clock, config.clock),
            listen=_pick(args.listen, config.listen),
            response_timeout=Config.parse_duration(config.response_timeout),
        )
    )
    print(f"{_value(session.mean)} {_value(session.std_err)}")

    report = RunReport(
        command="referee",
        game_digest=game_digest(game),
        seed=args.seed,
        parameters={
            "mode": args.mode,
            "clock": session.clock,
            "late_policy": session.late_policy,
            "rounds": args.rounds,
            "deadline_s": scenario.deadline_s,
        },
        stats={"mean": session.mean, "std_err": session.std_err},
        timing={"seconds": time.perf_counter() - started},
        session=session.to_dict(),
    )
    _write_report(report, args.report_out)
    if args.csv_out:
        Path(args.csv_out).write_text(render_report(report.to_dict(), "csv"))
    return EXIT_HARNESS if session.aborted else EXIT_OK


def cmd_party(args, config: Config) -> int:
    strategy = load_party_strategy(args.strategy)
    end = asyncio.run(party_run(args.connect, strategy))
    if end is not None:
        print(f"{_value(end.mean)} {_value(end.std_err)}")
    return EXIT_OK


def _catalog_game(args):
    if args.name in PRESETS and args.name != "corner-square":
        return PRESETS[args.name]()
    if args.name == "corner-square":
        return rendezvous(corner_square_spec(args.horizon, args.meet_rule))
    if args.name == "load-balancing":
        if args.spec:
            spec = LoadBalancingSpec.model_validate(json.loads(Path(args.spec).read_text()))
        else:
            if not args.rates or args.r_star is None:
                raise SpecInvalid("load-balancing needs --spec or --rates and --r-star")
            spec = LoadBalancingSpec(
                rates_per_transmitter=[_float_list(args.rates)] * args.parties,
                r_star=args.r_star,
                n_channels=args.channels,
            )
        return load_balancing(spec)
    if args.name == "rendezvous":
        if not args.spec:
            raise SpecInvalid("rendezvous needs --spec")
        return rendezvous(RendezvousSpec.model_validate(json.loads(Path(args.spec).read_text())))
    raise SpecInvalid(f"Unknown catalog game '{args.name}'")


def cmd_catalog(args, config: Config) -> int:
    game = _catalog_game(args)
    if args.out:
        dump_game(game, args.out)
        logger.info(f"Wrote {args.name} to {args.out}")
    else:
        print(json.dumps(game_to_dict(game)))
    return EXIT_OK


def cmd_report(args, config: Config) -> int:
    text = render_report(load_report(args.report), args.format)
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK


# --- parser ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telepathy",
        description="Nonlocal and latency-constrained games: values, simulation, referee.",
    )
    parser.add_argument("--version", action="version", version=f"telepathy {__version__}")
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--log-level", help="debug, info, warning or error")
    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser("validate", help="Validate a game file")
    validate.add_argument("game")
    validate.add_argument("--behavior", help="Also check a behavior file against the game")
    validate.add_argument("--strategy", help="Also check a quantum strategy file")
    validate.set_defaults(handler=cmd_validate)

    classical = commands.add_parser("classical-value", help="Exact (LC) classical value")
    classical.add_argument("game")
    where = classical.add_mutually_exclusive_group()
    where.add_argument("--comm", help="Communication graph JSON")
    where.add_argument("--scenario", help="Latency scenario JSON")
    classical.add_argument("--budget", type=int)
    classical.add_argument("--workers", type=int)
    classical.add_argument("--witness-out")
    classical.add_argument("--party-strategies-out", help="Prefix for per-party strategy files")
    classical.add_argument("--report-out")
    classical.set_defaults(handler=cmd_classical_value)

    quantum = commands.add_parser("quantum-value", help="Seesaw lower bound on the quantum value")
    quantum.add_argument("game")
    quantum.add_argument("--dims", help="Local dimensions, e.g. 2,2")
    quantum.add_argument("--restarts", type=int)
    quantum.add_argument("--iters", type=int)
    quantum.add_argument("--seed", type=int)
    quantum.add_argument("--workers", type=int)
    quantum.add_argument("--target", type=float, help="Stop restarting once reached")
    quantum.add_argument("--known", choices=sorted(KNOWN_STRATEGIES), help="Evaluate a known strategy")
    quantum.add_argument("--strategy-out")
    quantum.add_argument("--behavior-out")
    quantum.add_argument("--report-out")
    quantum.set_defaults(handler=cmd_quantum_value)

    simulate = commands.add_parser("simulate", help="Monte Carlo estimate of a behavior")
    simulate.add_argument("game")
    simulate.add_argument("--behavior", required=True)
    simulate.add_argument("-n", "--rounds", type=int, default=10000)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--report-out")
    simulate.set_defaults(handler=cmd_simulate)

    referee = commands.add_parser("referee", help="Referee rounds between party processes")
    referee.add_argument("game")
    referee.add_argument("--scenario", required=True)
    referee.add_argument("--mode", choices=["classical", "entangled"], default="classical")
    referee.add_argument("--behavior", help="Shared behavior for entangled mode")
    referee.add_argument("-n", "--rounds", type=int, default=1000)
    referee.add_argument("--seed", type=int, default=0)
    referee.add_argument("--listen")
    referee.add_argument("--clock", choices=["logical", "wall"])
    referee.add_argument("--late-policy", choices=["zero", "accept", "abort"])
    referee.add_argument("--report-out")
    referee.add_argument("--csv-out")
    referee.set_defaults(handler=cmd_referee)

    party = commands.add_parser("party", help="Run one party against a referee")
    party.add_argument("--connect", required=True, help="Referee host:port")
    party.add_argument("--strategy", required=True)
    party.set_defaults(handler=cmd_party)

    catalog = commands.add_parser("catalog", help="Write a catalog game")
    catalog.add_argument(
        "name", choices=sorted(set(PRESETS) | {"load-balancing", "rendezvous"})
    )
    catalog.add_argument("--out")
    catalog.add_argument("--spec", help="JSON parameters for load-balancing or rendezvous")
    catalog.add_argument("--rates", help="Per-transmitter rates, e.g. 1,2")
    catalog.add_argument("--parties", type=int, default=2)
    catalog.add_argument("--r-star", type=float)
    catalog.add_argument("--channels", type=int, default=2)
    catalog.add_argument("--horizon", type=int, default=1)
    catalog.add_argument("--meet-rule", choices=["final-step", "any-step"], default="final-step")
    catalog.set_defaults(handler=cmd_catalog)

    report = commands.add_parser("report", help="Render a saved report")
    report.add_argument("report")
    report.add_argument("--format", choices=["json", "csv"], default="json")
    report.add_argument("--out")
    report.set_defaults(handler=cmd_report)
    return parser


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes.

    Args:
        argv: Arguments without the program name

    Returns:
        int: Process exit code
    """
    args = build_parser().parse_args(argv)
    try:
        config = Config.from_yaml(args.config)
    except (ValidationError, ValueError, yaml.YAMLError) as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    setup_logging(args.log_level or config.log_level)

    try:
        return args.handler(args, config)
    except (GameValidationError, ValidationError, json.JSONDecodeError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except FileNotFoundError as e:
        logger.error(f"File not found: {e.filename}")
        return EXIT_INVALID
    except CapExceeded as e:
        logger.error(str(e))
        return EXIT_CAP
    except (HarnessError, OSError) as e:
        logger.error(f"Harness failure: {e}")
        return EXIT_HARNESS
