from .collector import CarsSensed, MetricsCollector, MetricsReport, Visibility, cars_sensed, visibility
from .evaluator import SweepEvaluator, compare_runs, crnt_table, emit_comparison_csv, emit_csv

__all__ = [
    "CarsSensed", "MetricsCollector", "MetricsReport", "SweepEvaluator", "Visibility",
    "cars_sensed", "compare_runs", "crnt_table", "emit_comparison_csv", "emit_csv", "visibility",
]
