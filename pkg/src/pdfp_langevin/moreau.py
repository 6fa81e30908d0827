"""Moreau envelope of the composite energy and its gradient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .pdfp import PdfpParams, default_params, kstep_prox_subproblem
from .problem import CompositeTarget

__all__ = ["MoreauConfig", "prox_energy", "moreau_value", "moreau_gradient"]


@dataclass(frozen=True)
class MoreauConfig:
    """Envelope parameter ``rho`` and the settings of the inner PDFP solve.

    ``gamma``/``lam`` default to ``1/(M2 + 1/rho)`` and ``1/lambda_max(BB^T)``.
    """

    rho: float
    exact_tol: float = 1e-10
    max_inner: int = 500
    gamma: Optional[float] = None
    lam: Optional[float] = None

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho!r}")
        if not self.exact_tol > 0:
            raise ValueError("exact_tol must be positive")
        if self.max_inner < 1:
            raise ValueError("max_inner must be >= 1")

    def params(self, target: CompositeTarget) -> PdfpParams:
        p = default_params(target.problem, self.rho)
        return PdfpParams(
            gamma=self.gamma if self.gamma is not None else p.gamma,
            lam=self.lam if self.lam is not None else p.lam,
        )


def prox_energy(theta, target: CompositeTarget, cfg: MoreauConfig,
                mode: Union[str, int] = "exact") -> np.ndarray:
    """``prox_{rho U}(theta)`` by PDFP from primal ``theta`` and dual zero.

    ``mode="exact"`` iterates until the primal step is below
    ``cfg.exact_tol`` (at most ``cfg.max_inner`` steps); an integer runs
    exactly that many steps.
    """
    params = cfg.params(target)
    if mode == "exact":
        return kstep_prox_subproblem(theta, cfg.rho, target.problem, params,
                                     cfg.max_inner, tol=cfg.exact_tol)
    K = int(mode)
    return kstep_prox_subproblem(theta, cfg.rho, target.problem, params, K)


def moreau_value(theta, target: CompositeTarget, cfg: MoreauConfig, prox_point=None) -> float:
    """``U_rho(theta) = U(p) + ||p - theta||^2 / (2 rho)`` with ``p`` the exact prox."""
    theta = np.asarray(theta, dtype=np.float64)
    p = prox_energy(theta, target, cfg, "exact") if prox_point is None else prox_point
    d = p - theta
    return target.energy(p) + float(np.vdot(d, d)) / (2.0 * cfg.rho)


def moreau_gradient(theta, prox_point, rho: float) -> np.ndarray:
    """``grad U_rho(theta) = (theta - prox_{rho U}(theta)) / rho``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return (np.asarray(theta, dtype=np.float64) - prox_point) / rho
