# crnt_sim/metrics/evaluator.py
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..core.errors import IncomparableRuns, OutputError, ParityViolation
from ..core.logger import setup_logger
from ..protocol.models import Position
from .collector import SECOND_COLUMNS, VEHICLE_COLUMNS, MetricsReport, crnt_view

logger = setup_logger(__name__)

PathLike = Union[str, Path]

REPORT_COLUMNS = ["row_type"] + VEHICLE_COLUMNS + [c for c in SECOND_COLUMNS if c not in VEHICLE_COLUMNS]
COMPARED_METRICS = ("visibility_m", "cars_sensed", "collisions", "mean_delay_us")
FLOAT_FORMAT = "%.6f"


def run_file_name(scenario: str, mode: str, seed: int, suffix: str = "", extension: str = "csv") -> str:
    return f"{scenario}_{mode}_{seed}{suffix}.{extension}"


def comparison_file_name(scenario: str, seed: int) -> str:
    return f"{scenario}_cmp_{seed}.csv"


def _open_for_write(path: PathLike):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e


def _write_table(path: PathLike, metadata: Dict[str, Any], table: pd.DataFrame):
    handle = _open_for_write(path)
    try:
        with handle:
            for key, value in metadata.items():
                handle.write(f"# {key}: {value}\n")
            table.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e


def report_metadata(report: MetricsReport) -> Dict[str, Any]:
    head = {"scenario": report.scenario, "mode": report.mode, "seed": report.seed,
            "observer_id": "" if report.observer_id is None else report.observer_id}
    head.update({f"config.{key}": value for key, value in report.metadata.items()})
    return head


def report_table(report: MetricsReport) -> pd.DataFrame:
    """Per-(second, vehicle) rows followed by one aggregate row per second."""
    detail = report.vehicles.assign(row_type="vehicle")
    aggregate = report.seconds.assign(row_type="second")
    frames = [frame for frame in (detail, aggregate) if not frame.empty]
    if not frames:
        return pd.DataFrame(columns=REPORT_COLUMNS)
    return pd.concat(frames, ignore_index=True).reindex(columns=REPORT_COLUMNS)


def emit_csv(report: MetricsReport, path: PathLike) -> Path:
    """Write the run report; every effective config value goes in the '#' header."""
    _write_table(path, report_metadata(report), report_table(report))
    logger.info(f"Metrics written to {path}")
    return Path(path)


def read_csv_report(path: PathLike) -> Tuple[Dict[str, str], pd.DataFrame]:
    metadata: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            metadata[key] = value
    return metadata, pd.read_csv(path, comment="#")


def _headline(report: MetricsReport) -> pd.DataFrame:
    """The four compared quantities per second, as this report's mode sees them."""
    seconds = report.seconds
    prefix = "crnt" if report.mode == "crnt" else "direct"
    return pd.DataFrame({
        "second": seconds["second"].astype(int),
        "visibility_m": seconds[f"{prefix}_m_mean"].astype(float),
        "cars_sensed": seconds[f"{prefix}_count_mean"].astype(float),
        "collisions": seconds["collisions"].astype(float),
        "mean_delay_us": seconds["mean_delay_us"].astype(float),
    })


def _ratio(numerator: pd.Series, denominator: pd.Series) -> pd.Series:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = numerator.to_numpy(dtype=float) / denominator.to_numpy(dtype=float)
    both_zero = (numerator.to_numpy() == 0) & (denominator.to_numpy() == 0)
    ratio[both_zero] = 1.0
    return pd.Series(ratio, index=numerator.index)


def compare_runs(baseline: MetricsReport, crnt: MetricsReport) -> pd.DataFrame:
    """
    Per-second baseline value, CRNT value, delta (crnt - baseline) and ratio
    (crnt / baseline, 1 when both are 0) for visibility, cars sensed,
    collisions and delay. Both runs must share scenario and seed and must
    have sent exactly the same number of frames per vehicle.
    """
    if baseline.scenario != crnt.scenario or baseline.seed != crnt.seed:
        raise IncomparableRuns(
            f"cannot compare {baseline.scenario}/seed {baseline.seed} with {crnt.scenario}/seed {crnt.seed}"
        )
    if baseline.tx_counts != crnt.tx_counts:
        differing = sorted(v for v in set(baseline.tx_counts) | set(crnt.tx_counts)
                           if baseline.tx_counts.get(v) != crnt.tx_counts.get(v))
        raise ParityViolation(f"per-vehicle frame counts differ for vehicles {differing[:10]}")

    left = _headline(baseline)
    right = _headline(crnt)
    merged = left.merge(right, on="second", suffixes=("_baseline", "_crnt"))
    table = pd.DataFrame({"second": merged["second"]})
    for metric in COMPARED_METRICS:
        before = merged[f"{metric}_baseline"]
        after = merged[f"{metric}_crnt"]
        table[f"{metric}_baseline"] = before
        table[f"{metric}_crnt"] = after
        table[f"{metric}_delta"] = after - before
        table[f"{metric}_ratio"] = _ratio(after, before)
    return table


def emit_comparison_csv(table: pd.DataFrame, baseline: MetricsReport, crnt: MetricsReport,
                        path: PathLike) -> Path:
    metadata = {
        "scenario": baseline.scenario,
        "seed": baseline.seed,
        "modes": f"{baseline.mode} vs {crnt.mode}",
        "frames_per_run": sum(baseline.tx_counts.values()),
    }
    metadata.update({f"config.{key}": value for key, value in crnt.metadata.items() if key != "mode"})
    _write_table(path, metadata, table)
    logger.info(f"Comparison written to {path}")
    return Path(path)


def crnt_table(position: Position, nt, crnt) -> pd.DataFrame:
    """A vehicle's CRNT laid out as ID, position, speed in km/h and compass direction, nearest first."""
    rows = [
        {
            "ID": entry.id,
            "x": entry.position.x,
            "y": entry.position.y,
            "speed_kmh": entry.speed * 3.6,
            "direction": entry.heading.compass8,
            "distance_m": position.distance_to(entry.position),
            "source": "direct" if entry.id in nt.ids else "pnt",
        }
        for entry in crnt_view(nt, crnt).values()
    ]
    table = pd.DataFrame(rows, columns=["ID", "x", "y", "speed_kmh", "direction", "distance_m", "source"])
    return table.sort_values(["distance_m", "ID"], kind="stable").reset_index(drop=True)


def write_event_log(events: Iterable[Dict[str, Any]], path: PathLike) -> Path:
    handle = _open_for_write(path)
    with handle:
        for event in events:
            handle.write(json.dumps(event, sort_keys=True, default=_json_default) + "\n")
    return Path(path)


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return None if math.isnan(value) else float(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def write_frame_table(table: pd.DataFrame, path: PathLike, metadata: Optional[Dict[str, Any]] = None) -> Path:
    _write_table(path, metadata or {}, table)
    return Path(path)


class SweepEvaluator:
    """
    Collects one baseline/CRNT comparison per seed and summarises the sweep,
    one row per seed in seed order.
    """

    def __init__(self, scenario: str):
        self.scenario = scenario
        self.results: Dict[int, Dict[str, Any]] = {}

    def add(self, seed: int, baseline: MetricsReport, crnt: MetricsReport, table: pd.DataFrame):
        self.results[seed] = {
            "seed": seed,
            "frames": sum(crnt.tx_counts.values()),
            "direct_m_mean": float(crnt.seconds["direct_m_mean"].mean()),
            "crnt_m_mean": float(crnt.seconds["crnt_m_mean"].mean()),
            "crnt_m_max": float(crnt.seconds["crnt_m_max"].max()),
            "direct_count_mean": float(crnt.seconds["direct_count_mean"].mean()),
            "crnt_count_mean": float(crnt.seconds["crnt_count_mean"].mean()),
            "cars_ratio_mean": float(table["cars_sensed_ratio"].replace(np.inf, np.nan).mean()),
            "collisions_baseline": baseline.total_collisions,
            "collisions_crnt": crnt.total_collisions,
            "delay_us_baseline": baseline.mean_delay_us,
            "delay_us_crnt": crnt.mean_delay_us,
        }

    def summary(self) -> pd.DataFrame:
        rows: List[Dict[str, Any]] = [self.results[seed] for seed in sorted(self.results)]
        return pd.DataFrame(rows)

    def generate_report(self, output_dir: PathLike) -> Path:
        path = Path(output_dir) / f"{self.scenario}_sweep.csv"
        _write_table(path, {"scenario": self.scenario, "seeds": ",".join(map(str, sorted(self.results)))},
                     self.summary())
        logger.info(f"Sweep summary saved to {path}")
        return path
