"""scikit-learn style facade over the solver.

``fit`` discretises and solves the selected problem; ``predict`` evaluates
the discrete solution at points of the unit square::

    est = GalerkinFEM(epsilon=1e-6, N=64).fit()
    est.predict([[0.5, 0.5]])
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_mesh_params, check_order, check_points
from .fem import FEFunction, QuadratureRule, assemble, solve
from .interpolation import build_Piu
from .mesh import build_mesh
from .norms import norm_callable_vs_fe, norm_fe_difference
from .problem import PROBLEMS, get_problem
from .study import SOLVERS


class GalerkinFEM(RegressorMixin, BaseEstimator):
    """Bilinear Galerkin FEM on a Bakhvalov-type mesh.

    Parameters mirror the study configuration.  After ``fit`` the estimator
    holds ``mesh_``, ``solution_`` (an FEFunction), ``n_dofs_`` and
    ``errors_``, a dict of error norms against the known exact solution.
    """

    def __init__(self, epsilon=1e-6, N=64, sigma=2.5, beta=1.0, problem="paper-s5",
                 assembly_order=4, norm_order=5, solver_tol=1e-12, solver="bicgstab", strict=True):
        self.epsilon = epsilon
        self.N = N
        self.sigma = sigma
        self.beta = beta
        self.problem = problem
        self.assembly_order = assembly_order
        self.norm_order = norm_order
        self.solver_tol = solver_tol
        self.solver = solver
        self.strict = strict

    def fit(self, X=None, y=None):
        """Solve the problem.  ``X`` and ``y`` are accepted for API compatibility and ignored."""
        cfg = check_mesh_params(self.N, self.epsilon, self.sigma, self.beta, self.strict)
        check_choice(self.problem, "problem", PROBLEMS)
        check_choice(self.solver, "solver", SOLVERS)
        order = check_order(self.assembly_order, "assembly_order")
        norm_order = check_order(self.norm_order, "norm_order")
        if not self.solver_tol > 0:
            raise ValueError("solver_tol must be positive")

        self.mesh_ = build_mesh(cfg)
        cs, ms = get_problem(self.problem, cfg.epsilon)
        A, F = assemble(self.mesh_, cs, QuadratureRule.gauss(order))
        self.solution_ = FEFunction.from_interior(self.mesh_, solve(A, F, self.solver_tol, self.solver))
        self.n_dofs_ = A.shape[0]
        self.exact_ = ms
        bundle = build_Piu(ms, self.mesh_)
        self.errors_ = {
            "energy_uI": norm_fe_difference(bundle.uI, self.solution_).energy,
            "energy_Piu": norm_fe_difference(bundle.Piu, self.solution_).energy,
            "L2": norm_callable_vs_fe(ms, self.solution_, QuadratureRule.gauss(norm_order)).L2,
        }
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        X = check_points(X)
        return np.asarray(self.solution_(X[:, 0], X[:, 1]), dtype=float)

    def exact(self, X):
        """Exact solution at ``X`` (for scoring against ``predict``)."""
        check_is_fitted(self, "exact_")
        X = check_points(X)
        return self.exact_(X[:, 0], X[:, 1])
