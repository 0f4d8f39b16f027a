"""Crosstalk detection toolkit for small quantum processors.

Design randomized detection experiments over region partitions, simulate
them under parameterized Markovian error models, and analyze the resulting
settings/results datasets with conditional-independence testing and
skeleton discovery to detect, localize, and quantify crosstalk errors.
"""

from .regions import (
    DeviceLayout,
    Region,
    Partition,
    PartitionSet,
    one_partition,
    enumerate_two_regions,
    random_two_partition,
    partition_cover,
    cover_size,
)
from .design import (
    IDLE_SETTING,
    ConfigurationError,
    GateRegistry,
    default_registry,
    Subcircuit,
    PlanParams,
    ExperimentPlan,
    sample_bag,
    build_plan,
    default_params,
)
from .data import Dataset, CellTable, VariableSpec, DataFormatError
from .simulator import (
    ErrorModel,
    ComputationalPOVM,
    EffectsPOVM,
    crosstalk_free_model,
    operation_crosstalk_depolarizing,
    operation_crosstalk_coherent,
    detection_crosstalk,
    ladder_crosstalk_model,
    simulate_circuit,
    run_plan,
)
from .stats import CITestResult, TvdSummary, chi2_sf, g2_test, edge_tvd
from .discovery import (
    SkeletonGraph,
    CrosstalkGraph,
    CrosstalkDetector,
    design_priors,
    bonferroni_alpha,
    pc_skeleton,
    build_crosstalk_graph,
)

__version__ = "0.1.0"

__all__ = [
    "DeviceLayout",
    "Region",
    "Partition",
    "PartitionSet",
    "one_partition",
    "enumerate_two_regions",
    "random_two_partition",
    "partition_cover",
    "cover_size",
    "IDLE_SETTING",
    "ConfigurationError",
    "GateRegistry",
    "default_registry",
    "Subcircuit",
    "PlanParams",
    "ExperimentPlan",
    "sample_bag",
    "build_plan",
    "default_params",
    "Dataset",
    "CellTable",
    "VariableSpec",
    "DataFormatError",
    "ErrorModel",
    "ComputationalPOVM",
    "EffectsPOVM",
    "crosstalk_free_model",
    "operation_crosstalk_depolarizing",
    "operation_crosstalk_coherent",
    "detection_crosstalk",
    "ladder_crosstalk_model",
    "simulate_circuit",
    "run_plan",
    "CITestResult",
    "TvdSummary",
    "chi2_sf",
    "g2_test",
    "edge_tvd",
    "SkeletonGraph",
    "CrosstalkGraph",
    "CrosstalkDetector",
    "design_priors",
    "bonferroni_alpha",
    "pc_skeleton",
    "build_crosstalk_graph",
]
