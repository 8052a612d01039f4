"""Local bounds, quantum values and detection-efficiency thresholds for qudit Bell tests."""

__version__ = "0.1.0"

from .bell import (  # noqa: E402
    BellExpression,
    CorrelationTable,
    DetectionFamily,
    DetectionScheme,
    ScenarioTooLarge,
    build_ch,
    build_i4422,
    build_inn22,
    evaluate,
    local_bound,
    modify_for_detection,
)
from .constructions import construction, inn22_construction  # noqa: E402
from .quantum import MeasurementSettings, SchmidtState, correlation_table, schmidt_from_epsilon  # noqa: E402
from .solver import OptimizerConfig, threshold_efficiency  # noqa: E402

__all__ = [
    "BellExpression",
    "CorrelationTable",
    "DetectionFamily",
    "DetectionScheme",
    "MeasurementSettings",
    "OptimizerConfig",
    "ScenarioTooLarge",
    "SchmidtState",
    "build_ch",
    "build_i4422",
    "build_inn22",
    "construction",
    "correlation_table",
    "evaluate",
    "inn22_construction",
    "local_bound",
    "modify_for_detection",
    "schmidt_from_epsilon",
    "threshold_efficiency",
]
