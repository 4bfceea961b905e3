"""Online monitoring of temporal-logic tasks for discrete-time systems via pre-computed feasible sets."""

from .dynamics import (
    AffineSystem,
    BuildingTemperature,
    DoubleIntegrator,
    Spacecraft,
    SystemModel,
    Trace,
    Unicycle,
    load_model,
    model_from_dict,
)
from .formula import FormulaSpec, IndexSet, parse_formula
from .geometry import Box, BoxUnion
from .monitor import MonitorState, Verdict, VerdictKind, monitor_init, monitor_step, run_monitor
from .precompute import SetTable, compute_tables, load_table, save_table
from .reach import one_step_feasible, one_step_satisfiable

__all__ = [
    "AffineSystem", "BuildingTemperature", "DoubleIntegrator", "Spacecraft", "SystemModel", "Trace", "Unicycle",
    "load_model", "model_from_dict", "FormulaSpec", "IndexSet", "parse_formula", "Box", "BoxUnion",
    "MonitorState", "Verdict", "VerdictKind", "monitor_init", "monitor_step", "run_monitor",
    "SetTable", "compute_tables", "load_table", "save_table", "one_step_feasible", "one_step_satisfiable",
]
__version__ = "0.1.0"
