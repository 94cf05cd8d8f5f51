"""Delay differential equations by the method of steps and differential transformation."""

from .errors import DDEError
from .lowering import RecurrencePlan, compile_rhs, run_plan
from .model import DelayModel, parse_expr, parse_model, validate_model
from .schedule import SegmentSchedule, build_schedule
from .series import TruncatedSeries
from .solver import PiecewiseSolution, eval_solution, sample, solve

__all__ = [
    "DDEError",
    "DelayModel",
    "PiecewiseSolution",
    "RecurrencePlan",
    "SegmentSchedule",
    "TruncatedSeries",
    "build_schedule",
    "compile_rhs",
    "eval_solution",
    "parse_expr",
    "parse_model",
    "run_plan",
    "sample",
    "solve",
    "validate_model",
]
