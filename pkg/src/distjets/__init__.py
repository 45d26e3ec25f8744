"""Jets of the squared distance function, their recursion in terms of the
second fundamental form, and higher-order curvature flows of plane curves."""

from .evaluator import JetSample, ScanReport, evaluate, inequality_scan, norm_Ak, random_jets
from .flow import CurveState, FlowConfig, Trajectory, energy, gradient, mcf_compare, run
from .geometry import DistanceField, Immersion, fd_Ak, jets, parse_shape, project, verify_prop1
from .recursion import (PolyTensor, RecursionTable, Term, TensorFactor, base_table, build_table,
                        canonicalize, chain_power_p_k2, extend, formal_derivative, leading_term,
                        squared_norm_expr)

__version__ = "0.1.0"

__all__ = [
    "CurveState", "DistanceField", "FlowConfig", "Immersion", "JetSample", "PolyTensor",
    "RecursionTable", "ScanReport", "TensorFactor", "Term", "Trajectory", "base_table",
    "build_table", "canonicalize", "chain_power_p_k2", "energy", "evaluate", "extend",
    "fd_Ak", "formal_derivative", "gradient", "inequality_scan", "jets", "leading_term",
    "mcf_compare", "norm_Ak", "parse_shape", "project", "random_jets", "run",
    "squared_norm_expr", "verify_prop1",
]
