"""Log-ODE flows of rough differential equations with diagnostics."""

from .config import PartitionStrategy, SolverConfig, StepMode, resolve_config
from .derivative_flow import (
    DerivativeRecord,
    derivative_growth_check,
    fit_derivative_growth,
    flow_jacobian,
    parameter_sensitivity,
    second_derivative,
)
from .errors import (
    AssumptionViolationError,
    BlowUpError,
    DimensionMismatchError,
    ExplosionError,
    InvalidGridError,
    LevelZeroError,
    RoughFlowError,
    ScenarioError,
    WordIndexError,
)
from .flow_builder import (
    FlowComposition,
    classical_solve,
    dyadic_compose,
    dyadic_defect_study,
    flow_defect,
    growth_envelope,
    growth_sweep,
    solve_flow,
)
from .logode_step import build_step_field, mu, mu_jacobian, step_growth_monitor, taylor_remainder
from .rough_path import (
    ControlTable,
    RoughDriver,
    YoungPath,
    accumulation,
    control_table,
    holder_norm,
    pure_area_driver,
    signature_lift,
)
from .scenarios import Scenario, build_scenario, create_default_scenarios
from .tensor_algebra import TruncatedTensorSeries, check_weak_geometric, tensor_exp, tensor_log, tensor_mul
from .vector_fields import PolyVectorField, ScalarField, assumption_audit, growth_report, lie_bracket, word_fields

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolationError",
    "BlowUpError",
    "ControlTable",
    "DerivativeRecord",
    "DimensionMismatchError",
    "ExplosionError",
    "FlowComposition",
    "InvalidGridError",
    "LevelZeroError",
    "PartitionStrategy",
    "PolyVectorField",
    "RoughDriver",
    "RoughFlowError",
    "ScalarField",
    "Scenario",
    "ScenarioError",
    "SolverConfig",
    "StepMode",
    "TruncatedTensorSeries",
    "WordIndexError",
    "YoungPath",
    "accumulation",
    "assumption_audit",
    "build_scenario",
    "build_step_field",
    "check_weak_geometric",
    "classical_solve",
    "control_table",
    "create_default_scenarios",
    "derivative_growth_check",
    "dyadic_compose",
    "dyadic_defect_study",
    "fit_derivative_growth",
    "flow_defect",
    "flow_jacobian",
    "growth_envelope",
    "growth_report",
    "growth_sweep",
    "holder_norm",
    "lie_bracket",
    "mu",
    "mu_jacobian",
    "parameter_sensitivity",
    "pure_area_driver",
    "resolve_config",
    "second_derivative",
    "signature_lift",
    "solve_flow",
    "step_growth_monitor",
    "taylor_remainder",
    "tensor_exp",
    "tensor_log",
    "tensor_mul",
    "word_fields",
]
