"""Composite energies ``U(x) = f(x) + g(Bx)``."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .linalg import LinearMap, power_iteration
from .prox import L1Penalty

__all__ = ["CompositeProblem", "CompositeTarget"]


@dataclass(frozen=True)
class CompositeProblem:
    """Smooth part ``f`` (with gradient), linear map ``B`` and penalty ``g``.

    ``lipschitz_M2`` is the Lipschitz constant of ``grad_f``;
    ``strong_convexity_m`` is the strong convexity modulus of ``f`` (0 when
    unknown or absent).
    """

    f: Callable[[np.ndarray], float] = field(repr=False)
    grad_f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lipschitz_M2: float
    B: LinearMap
    g: L1Penalty
    strong_convexity_m: float = 0.0

    def __post_init__(self):
        if not self.lipschitz_M2 > 0:
            raise ValueError("lipschitz_M2 must be positive")
        if not 0 <= self.strong_convexity_m <= self.lipschitz_M2 * (1 + 1e-12):
            raise ValueError("need 0 <= strong_convexity_m <= lipschitz_M2")

    @property
    def shape(self) -> tuple:
        return self.B.domain_shape

    @cached_property
    def lambda_max_BBt(self) -> float:
        """Largest eigenvalue of ``B B^T`` (power iteration, cached)."""
        if self.B.kind == "identity":
            return 1.0
        return power_iteration(self.B, max_iters=1000, tol=1e-10).value

    @property
    def dual_bound(self) -> float:
        return self.g.dual_bound(self.B.range_size)


@dataclass(frozen=True)
class CompositeTarget:
    """Energy ``U = f + g o B`` of the density ``pi ~ exp(-U)``."""

    problem: CompositeProblem
    label: str = "target"

    def energy(self, theta) -> float:
        p = self.problem
        return float(p.f(theta)) + p.g.value(p.B.apply(theta))

    def grad_f(self, theta) -> np.ndarray:
        return self.problem.grad_f(theta)

    @property
    def shape(self) -> tuple:
        return self.problem.shape

    @property
    def is_smooth(self) -> bool:
        return self.problem.g.weight == 0.0
