"""Calculus of variations on time scales.

Finite time scales and their Δ/∇ calculus (:mod:`tscv.timescale`),
classification of analytic scales (:mod:`tscv.analysis`), Lagrangians and
Euler-Lagrange residuals (:mod:`tscv.lagrangians`, :mod:`tscv.variational`),
critical-point solvers (:mod:`tscv.solver`), Noether constants
(:mod:`tscv.noether`) and a command-line front end (:mod:`tscv.cli`).
"""

from .timescale import GridFunction, GridScale, PointClass, TimeScaleError
from .lagrangians import Counterexample, Polynomial, Quadratic, Rotational
from .variational import ELResidualReport, ResidualForm
from .solver import BVProblem, Mode, SolveReport, SolverOptions, integrate, solve_bvp, step_forward
from .noether import TransformationFamily, check_invariance, drift, noether_constant

__version__ = "0.1.0"

__all__ = [
    "GridFunction", "GridScale", "PointClass", "TimeScaleError",
    "Counterexample", "Polynomial", "Quadratic", "Rotational",
    "ELResidualReport", "ResidualForm",
    "BVProblem", "Mode", "SolveReport", "SolverOptions", "integrate", "solve_bvp", "step_forward",
    "TransformationFamily", "check_invariance", "drift", "noether_constant",
]
