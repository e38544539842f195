# crnt_sim/cli.py
import argparse
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from tqdm import tqdm

from .core.config import ProtocolMode, RunConfig, apply_overrides, load_run_config, settings
from .core.errors import ConfigError, SimulationError
from .core.logger import configure_logging, setup_logger
from .engine.simulator import SimulationResult, Simulator
from .metrics.collector import MetricsReport
from .metrics.evaluator import (
    SweepEvaluator,
    compare_runs,
    comparison_file_name,
    crnt_table,
    emit_comparison_csv,
    emit_csv,
    run_file_name,
    write_event_log,
    write_frame_table,
)
from .mobility.movement import spawn_scenario
from .mobility.scenario import load_scenario

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config, by path or by name under configs/")
    common.add_argument("--scenario", help="Scenario preset name or YAML path")
    common.add_argument("--duration-s", type=float, dest="duration_s", help="Simulated seconds")
    common.add_argument("--out-dir", type=Path, dest="out_dir",
                        help=f"Output directory (default: CRNT_OUTPUT_DIR or {settings.OUTPUT_DIR})")
    common.add_argument("--observer", type=int, dest="observer_id", help="Vehicle id traced in the report")
    common.add_argument("--event-log", action="store_true", default=None, dest="event_log",
                        help="Also write a JSON-lines event log per run")
    common.add_argument("--radio-log", action="store_true", default=None, dest="radio_log",
                        help="Also write per-frame, per-receiver radio outcomes per run")
    common.add_argument("-v", "--verbose", action="count", default=None,
                        help="-v for progress messages, -vv for protocol decisions")

    parser = argparse.ArgumentParser(
        prog="crnt-sim",
        description="Vehicular beaconing simulator comparing plain beacons with piggybacked neighbor tables.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="Run one protocol mode and write its metrics CSV")
    run.add_argument("--seed", type=int)
    run.add_argument("--mode", choices=[mode.value for mode in ProtocolMode])
    run.add_argument("--dump-crnt", action="store_true", dest="dump_crnt",
                     help="Write the observer's final CRNT as a table")

    compare = commands.add_parser("compare", parents=[common], help="Run both modes at one seed and compare them")
    compare.add_argument("--seed", type=int)

    sweep = commands.add_parser("sweep", parents=[common], help="Repeat compare over a list of seeds")
    sweep.add_argument("--seeds", required=True, help="Comma-separated seeds, e.g. 1,2,3")
    sweep.add_argument("--workers", type=int, help="Parallel processes (default: CRNT_SWEEP_WORKERS or CPU count)")

    validate = commands.add_parser("validate-config", parents=[common], help="Check a config without running it")
    validate.add_argument("--seed", type=int)
    validate.add_argument("--mode", choices=[mode.value for mode in ProtocolMode])
    return parser


def parse_seeds(raw: str) -> List[int]:
    try:
        seeds = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--seeds must be comma-separated integers, got {raw!r}") from e
    if not seeds:
        raise ConfigError("--seeds is empty")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"--seeds repeats a seed: {raw}")
    return seeds


def effective_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "scenario": args.scenario,
        "duration_s": args.duration_s,
        "seed": getattr(args, "seed", None),
        "mode": getattr(args, "mode", None),
        "observer_id": args.observer_id,
        "event_log": args.event_log,
        "radio_log": args.radio_log,
    }
    return load_run_config(args.config, **overrides)


# ============================================================================
# Commands
# ============================================================================

def execute(config: RunConfig, out_dir: Path, dump_crnt: bool = False) -> Tuple[SimulationResult, Path]:
    simulator = Simulator(config)
    result = simulator.run()
    report = result.report
    path = emit_csv(report, out_dir / run_file_name(report.scenario, report.mode, report.seed))
    if config.event_log:
        write_event_log(result.events, out_dir / run_file_name(report.scenario, report.mode, report.seed,
                                                               "_events", "jsonl"))
    if config.radio_log:
        write_frame_table(result.radio_log, out_dir / run_file_name(report.scenario, report.mode, report.seed,
                                                                    "_radio"))
    if dump_crnt:
        _dump_observer(simulator, out_dir)
    return result, path


def _dump_observer(simulator: Simulator, out_dir: Path):
    observer = simulator.observer_id
    if observer is None or observer not in simulator.agents:
        logger.warning(f"Observer {observer} is not on the road at the end of the run; no CRNT dump")
        return
    now_ms = simulator.now_us // 1000
    state = simulator.states[observer]
    agent = simulator.agents[observer]
    table = crnt_table(state.position, agent.direct_nt(state.position, now_ms), agent.refresh(now_ms))
    report_name = run_file_name(simulator.scenario.name, simulator.config.mode.value, simulator.config.seed, "_crnt")
    write_frame_table(table, out_dir / report_name, {"vehicle": observer, "time_ms": now_ms})


def compare_once(config: RunConfig, out_dir: Path) -> Tuple[MetricsReport, MetricsReport, Path]:
    baseline, _ = execute(apply_overrides(config, mode=ProtocolMode.BASELINE), out_dir)
    crnt, _ = execute(apply_overrides(config, mode=ProtocolMode.CRNT), out_dir)
    table = compare_runs(baseline.report, crnt.report)
    path = emit_comparison_csv(table, baseline.report, crnt.report,
                               out_dir / comparison_file_name(crnt.report.scenario, config.seed))
    return baseline.report, crnt.report, path


def _sweep_job(config_data: dict, seed: int, out_dir: str):
    config = RunConfig.model_validate({**config_data, "seed": seed})
    baseline, crnt, _ = compare_once(config, Path(out_dir))
    return seed, baseline, crnt


def run_sweep(config: RunConfig, seeds: Sequence[int], out_dir: Path, workers: int) -> Path:
    evaluator = SweepEvaluator(load_scenario(config.scenario).name)
    config_data = config.model_dump()

    def collect(seed, baseline, crnt):
        evaluator.add(seed, baseline, crnt, compare_runs(baseline, crnt))

    if workers <= 1 or len(seeds) == 1:
        for seed in tqdm(seeds, desc="Seeds"):
            collect(*_sweep_job(config_data, seed, str(out_dir)))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(_sweep_job, config_data, seed, str(out_dir)): seed for seed in seeds}
            for future in tqdm(as_completed(futures), total=len(futures), desc="Seeds"):
                collect(*future.result())
    return evaluator.generate_report(out_dir)


def validate(config: RunConfig) -> str:
    scenario = load_scenario(config.scenario)
    vehicles = spawn_scenario(scenario, config.seed)
    if config.observer_id is not None and all(v.id != config.observer_id for v in vehicles):
        raise ConfigError(f"observer_id {config.observer_id} is not a vehicle of scenario {scenario.name}")
    return (f"config OK: scenario={scenario.name} vehicles={len(vehicles)} mode={config.mode.value} "
            f"duration={config.duration_s:g}s seed={config.seed}")


# ============================================================================
# Entry point
# ============================================================================

def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, settings.LOG_LEVEL)
    out_dir = args.out_dir or settings.OUTPUT_DIR

    try:
        if args.command == "validate-config":
            print(validate(effective_config(args)))
        elif args.command == "run":
            _, path = execute(effective_config(args), out_dir, dump_crnt=args.dump_crnt)
            print(f"wrote {path}")
        elif args.command == "compare":
            _, _, path = compare_once(effective_config(args), out_dir)
            print(f"wrote {path}")
        elif args.command == "sweep":
            seeds = parse_seeds(args.seeds)
            workers = args.workers or settings.sweep_workers
            path = run_sweep(effective_config(args), seeds, out_dir, workers)
            print(f"wrote {path}")
    except ConfigError as e:
        logger.debug("Configuration failure", exc_info=True)
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as e:
        logger.error(f"Simulation failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
