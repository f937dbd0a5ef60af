"""k-OBDD laboratory built around the Shuffled Address Function SAF_{k,w}."""

__version__ = "0.1.0"

from .program import (LeveledProgram, Level, Node, VariableOrder, evaluate,
                      evaluate_batch, export_dot, metrics, random_kobdd,
                      truth_table, validate_kobdd)
from .saf import FAIL, SafParams, eval_saf, trace, validate_params
from .builder import build, differential_check, explain
from .subfn import (BoolFunction, Partition, ak13_bound, census_global,
                    census_pi, census_theta, check_ak13, classify_partition,
                    distinguish, hierarchy_gap, saf_lower_bound)

__all__ = [
    "FAIL", "BoolFunction", "LeveledProgram", "Level", "Node", "Partition",
    "SafParams", "VariableOrder", "ak13_bound", "build", "census_global",
    "census_pi", "census_theta", "check_ak13", "classify_partition",
    "differential_check", "distinguish", "eval_saf", "evaluate",
    "evaluate_batch", "explain", "export_dot", "hierarchy_gap", "metrics",
    "random_kobdd", "saf_lower_bound", "trace", "truth_table",
    "validate_kobdd", "validate_params",
]
