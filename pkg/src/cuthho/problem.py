"""Data of the interface problem -div(kappa grad u) = f with jumps on Gamma."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .levelset import LevelSet

__all__ = ["InterfaceProblem", "zero_function"]


def zero_function(x) -> np.ndarray:
    return np.zeros(np.atleast_2d(x).shape[0])


@dataclass(frozen=True, eq=False)
class InterfaceProblem:
    """Coefficients and data; callables take (n, 2) point arrays.

    ``g_D = u1 - u2`` and ``g_N = (kappa1 grad u1 - kappa2 grad u2) . n_Gamma`` on
    Gamma; ``dirichlet1``/``dirichlet2`` give u on boundary faces of each
    side (homogeneous when ``None``).
    """

    levelset: LevelSet | None
    kappa1: float = 1.0
    kappa2: float = 1.0
    f1: object = zero_function
    f2: object = zero_function
    g_D: object = zero_function
    g_N: object = zero_function
    dirichlet1: object = None
    dirichlet2: object = None
    swapped: bool = False

    def __post_init__(self):
        if not (self.kappa1 > 0.0 and self.kappa2 > 0.0):
            raise ValueError("diffusion coefficients must be positive")

    def kappa(self, side: int) -> float:
        return self.kappa1 if side == 1 else self.kappa2

    def f(self, side: int):
        return self.f1 if side == 1 else self.f2

    def dirichlet(self, side: int):
        return self.dirichlet1 if side == 1 else self.dirichlet2

    @property
    def homogeneous_dirichlet(self) -> bool:
        return self.dirichlet1 is None and self.dirichlet2 is None

    def normalized(self) -> InterfaceProblem:
        """Return an equivalent problem with kappa1 <= kappa2.

        Swapping sides negates the level set and g_D; g_N is unchanged
        because both the normal and the jump orientation flip.
        """
        if self.kappa1 <= self.kappa2 or self.levelset is None:
            return self
        g_D = self.g_D

        def neg_gd(x, g=g_D):
            return -np.asarray(g(x))

        return InterfaceProblem(self.levelset.negated(), self.kappa2, self.kappa1, self.f2, self.f1,
                                neg_gd, self.g_N, self.dirichlet2, self.dirichlet1, not self.swapped)
