"""Bilinear finite elements on a Bakhvalov-type mesh for a singularly perturbed
convection-diffusion problem, with the supercloseness interpolant and a
verification harness."""
from .estimator import GalerkinFEM
from .fem import FEFunction, QuadratureRule, SolverError, assemble, solve, solve_fe
from .interpolation import (
    CorrectionSystem,
    InterpolantBundle,
    build_PiS,
    build_piE1,
    build_Piu,
    build_tau,
    lagrange_interpolate,
    solve_correction,
    verify_integral_identity,
)
from .mesh import InvalidConfigError, MeshConfig, TensorMesh2D, build_mesh, classify_cell, verify_mesh_lemmas
from .norms import ConvergenceReport, ErrorRecord, norm_callable_vs_fe, norm_fe_difference, rates
from .problem import CoefficientSet, ManufacturedSolution, get_problem
from .study import StudyConfig, run

__all__ = [
    "GalerkinFEM", "FEFunction", "QuadratureRule", "SolverError", "assemble", "solve", "solve_fe",
    "CorrectionSystem", "InterpolantBundle", "build_PiS", "build_piE1", "build_Piu", "build_tau",
    "lagrange_interpolate", "solve_correction", "verify_integral_identity",
    "InvalidConfigError", "MeshConfig", "TensorMesh2D", "build_mesh", "classify_cell", "verify_mesh_lemmas",
    "ConvergenceReport", "ErrorRecord", "norm_callable_vs_fe", "norm_fe_difference", "rates",
    "CoefficientSet", "ManufacturedSolution", "get_problem", "StudyConfig", "run",
]
__version__ = "0.1.0"
