"""Thin scikit-learn style facade over the solver pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .levelset import LevelSet, parse_levelset
from .mesh import PolyMesh
from .problem import InterfaceProblem
from .solver import default_n_sub, discretize, solve_problem
from .verify import ManufacturedCase, compute_errors

__all__ = ["UnfittedHHO"]


class UnfittedHHO(BaseEstimator):
    """Solve an interface problem on a mesh; ``predict`` evaluates the cell polynomials.

    ``fit(mesh, problem)`` accepts an ``InterfaceProblem`` or a
    ``ManufacturedCase``; for the latter ``errors_`` holds the energy-error
    report. When ``problem`` has no level set the estimator's ``levelset``
    is used (a string such as ``"circle(0,0,0.5)"`` or a LevelSet).
    """

    def __init__(self, levelset=None, k: int = 1, eta=None, n_sub=None, agglomerate: bool = True,
                 threads: int = 1):
        self.levelset = levelset
        self.k = k
        self.eta = eta
        self.n_sub = n_sub
        self.agglomerate = agglomerate
        self.threads = threads

    def _validate_params(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 0:
            raise ValueError(f"k must be a non-negative integer, got {self.k!r}")
        if self.eta is not None and not float(self.eta) > 0.0:
            raise ValueError("eta must be positive or None")
        if self.n_sub is not None and int(self.n_sub) < 1:
            raise ValueError("n_sub must be >= 1 or None")

    def _levelset(self) -> LevelSet | None:
        if self.levelset is None or isinstance(self.levelset, LevelSet):
            return self.levelset
        return parse_levelset(str(self.levelset))

    def fit(self, mesh: PolyMesh, problem):
        self._validate_params()
        if not isinstance(mesh, PolyMesh):
            raise TypeError("fit expects a PolyMesh as first argument")
        case = problem if isinstance(problem, ManufacturedCase) else None
        prob = case.problem() if case is not None else problem
        if not isinstance(prob, InterfaceProblem):
            raise TypeError("fit expects an InterfaceProblem or a ManufacturedCase")
        ls = prob.levelset if prob.levelset is not None else self._levelset()
        if ls is not prob.levelset:
            prob = InterfaceProblem(ls, prob.kappa1, prob.kappa2, prob.f1, prob.f2, prob.g_D, prob.g_N,
                                    prob.dirichlet1, prob.dirichlet2)
        k = int(self.k)
        disc = discretize(mesh, ls, int(self.n_sub) if self.n_sub else default_n_sub(k),
                          agglomerate=self.agglomerate)
        self.solution_ = solve_problem(disc, prob, k, eta=self.eta, threads=self.threads)
        self.n_dofs_ = self.solution_.stats.n_dofs
        self.errors_ = compute_errors(self.solution_, case) if case is not None else None
        return self

    def predict(self, X) -> np.ndarray:
        """Discrete solution at points (n, 2); NaN outside the mesh."""
        check_is_fitted(self, "solution_")
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if X.shape[1] != 2:
            raise ValueError(f"expected points with 2 coordinates, got {X.shape[1]}")
        vals, _ = self.solution_.evaluate(X)
        return vals

    def score(self, X, y) -> float:
        """Negative root-mean-square deviation from reference values ``y``."""
        pred = self.predict(X)
        y = np.asarray(y, dtype=float).ravel()
        return -float(np.sqrt(np.nanmean((pred - y) ** 2)))
