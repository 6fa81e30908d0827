"""Primal-dual fixed-point (PDFP) iteration.

One step maps ``(v_k, x_k)`` to ``(v_{k+1}, x_{k+1})``::

    y     = x - gamma * grad_f(x) - gamma * B^T v
    v_new = prox_{(lam/gamma) g*}((lam/gamma) * B y + v)
    x_new = x - gamma * grad_f(x) - gamma * B^T v_new

``grad_f`` is evaluated once per step. ``B^T v`` for the incoming dual is
carried in the state so each step costs one ``B`` and one ``B^T``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .problem import CompositeProblem

__all__ = [
    "NumericalError",
    "HypothesisWarning",
    "PdfpParams",
    "PdfpState",
    "PdfpResult",
    "default_params",
    "check_params",
    "initial_state",
    "pdfp_step",
    "pdfp_solve",
    "weighted_distance",
    "kstep_prox_subproblem",
    "kstep_prox_state",
    "contraction_rate_eta",
    "write_trace_csv",
]


class NumericalError(FloatingPointError):
    """A non-finite value appeared; ``dump`` holds the offending iterates."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


class HypothesisWarning(UserWarning):
    """A convergence-theory hypothesis does not hold for the given inputs."""


@dataclass(frozen=True)
class PdfpParams:
    gamma: float
    lam: float
    K: Optional[int] = None
    tol: Optional[float] = None
    max_iter: int = 10_000

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if self.K is not None and self.K < 0:
            raise ValueError("K must be >= 0")


@dataclass(frozen=True)
class PdfpState:
    x: np.ndarray
    v: np.ndarray
    btv: np.ndarray  # B^T v, cached


class PdfpResult(NamedTuple):
    x: np.ndarray
    v: np.ndarray
    residual: float
    iterations: int
    converged: bool


def default_params(problem: CompositeProblem, rho: float = math.inf, **kw) -> PdfpParams:
    """``gamma = 1/(M2 + 1/rho)``, ``lam = 1/lambda_max(BB^T)``."""
    gamma = 1.0 / (problem.lipschitz_M2 + 1.0 / rho)
    lam = 1.0 / problem.lambda_max_BBt
    return PdfpParams(gamma=gamma, lam=lam, **kw)


def check_params(problem: CompositeProblem, gamma: float, lam: float, rho: float = math.inf):
    """Raise ``ValueError`` unless ``0 < lam <= 1/lambda_max(BB^T)`` and
    ``0 < gamma < 2/(M2 + 1/rho)``."""
    lmax = problem.lambda_max_BBt
    if not 0 < lam <= (1.0 / lmax) * (1 + 1e-9):
        raise ValueError(
            f"lambda={lam!r} violates 0 < lambda <= 1/lambda_max(BB^T) = {1.0 / lmax!r}"
        )
    gmax = 2.0 / (problem.lipschitz_M2 + 1.0 / rho)
    if not 0 < gamma < gmax:
        raise ValueError(f"gamma={gamma!r} violates 0 < gamma < 2/(M2 + 1/rho) = {gmax!r}")


def initial_state(problem: CompositeProblem, x0, v0=None) -> PdfpState:
    x0 = np.array(x0, dtype=np.float64)
    if v0 is None:
        v0 = np.zeros(problem.B.range_shape)
        btv = np.zeros(problem.B.domain_shape)
    else:
        v0 = np.array(v0, dtype=np.float64)
        btv = problem.B.adjoint(v0)
    return PdfpState(x0, v0, btv)


def _step(state: PdfpState, grad: Callable, B, g, gamma: float, lam: float) -> PdfpState:
    x, v = state.x, state.v
    base = x - gamma * grad(x)
    y = base - gamma * state.btv
    s = lam / gamma
    v_new = g.prox_conjugate(s * B.apply(y) + v, s)
    btv_new = B.adjoint(v_new)
    x_new = base - gamma * btv_new
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(v_new))):
        raise NumericalError(
            "non-finite PDFP iterate",
            dump={"x": x, "v": v, "x_new": x_new, "v_new": v_new},
        )
    return PdfpState(x_new, v_new, btv_new)


def weighted_distance(a: PdfpState, b: PdfpState, gamma: float, lam: float) -> float:
    """``sqrt(||x_a - x_b||^2 + (gamma^2/lam) ||v_a - v_b||^2)``."""
    dx = a.x - b.x
    dv = a.v - b.v
    return math.sqrt(float(np.vdot(dx, dx)) + gamma**2 / lam * float(np.vdot(dv, dv)))


def pdfp_step(state: PdfpState, prob: CompositeProblem, p: PdfpParams) -> PdfpState:
    """Apply the PDFP operator ``T`` once."""
    return _step(state, prob.grad_f, prob.B, prob.g, p.gamma, p.lam)


def _objective(prob: CompositeProblem, x) -> float:
    return float(prob.f(x)) + prob.g.value(prob.B.apply(x))


def pdfp_solve(prob: CompositeProblem, params: PdfpParams, x0, v0=None, trace=None) -> PdfpResult:
    """Run PDFP from ``(x0, v0)``.

    With ``params.tol`` set, iterate until the weighted step norm drops below
    it (at most ``params.K`` or ``params.max_iter`` steps); otherwise run
    exactly ``params.K`` steps. ``trace``, if a list, receives
    ``(iteration, weighted_step, objective)`` rows.
    """
    state = initial_state(prob, x0, v0)
    cap = params.K if params.K is not None else params.max_iter
    if params.tol is None and params.K is None:
        raise ValueError("need K or tol")
    converged = params.tol is None
    it = 0
    while it < cap:
        new = pdfp_step(state, prob, params)
        it += 1
        step = weighted_distance(new, state, params.gamma, params.lam)
        state = new
        if trace is not None:
            trace.append((it, step, _objective(prob, state.x)))
        if params.tol is not None and step < params.tol:
            converged = True
            break
    residual = weighted_distance(pdfp_step(state, prob, params), state, params.gamma, params.lam)
    return PdfpResult(state.x, state.v, residual, it, converged)


def _shifted_grad(grad_f, theta, rho):
    inv_rho = 1.0 / rho
    return lambda x: grad_f(x) + inv_rho * (x - theta)


def kstep_prox_state(theta, rho: float, prob: CompositeProblem, params: PdfpParams, K: int,
                     tol: Optional[float] = None) -> tuple[PdfpState, int]:
    """K PDFP steps on ``min_x ||x - theta||^2/(2 rho) + f(x) + g(Bx)``.

    The primal starts at ``theta`` and the dual at zero, always. With ``tol``
    the loop also stops once ``||x_{k+1} - x_k|| < tol``. Returns the final
    state and the number of steps taken.
    """
    theta = np.asarray(theta, dtype=np.float64)
    grad = _shifted_grad(prob.grad_f, theta, rho)
    state = initial_state(prob, theta)
    k = 0
    while k < K:
        new = _step(state, grad, prob.B, prob.g, params.gamma, params.lam)
        k += 1
        if tol is not None:
            d = new.x - state.x
            if math.sqrt(float(np.vdot(d, d))) < tol:
                state = new
                break
        state = new
    return state, k


def kstep_prox_subproblem(theta, rho: float, prob: CompositeProblem, params: PdfpParams, K: int,
                          tol: Optional[float] = None) -> np.ndarray:
    """Approximate ``prox_{rho U}(theta)`` by ``K`` PDFP steps from ``(0, theta)``."""
    state, _ = kstep_prox_state(theta, rho, prob, params, K, tol)
    return state.x


def contraction_rate_eta(m: float, rho: float, M2: float, gamma: float, lam: float,
                         rho_min_BBt: float) -> float:
    """Linear rate of the prox-subproblem PDFP iteration.

    ``max(1 - (m + 1/rho)^2 (2 gamma/(M2 + 1/rho) - gamma^2), 1 - lam rho_min)``.
    Pass ``rho=inf`` for the plain problem (rate ``max(eta_1^2, 1 - lam rho_min)``).
    Warns with :class:`HypothesisWarning` when the value is not below 1.
    """
    inv_rho = 0.0 if math.isinf(rho) else 1.0 / rho
    a = m + inv_rho
    L = M2 + inv_rho
    eta = max(1.0 - a * a * (2.0 * gamma / L - gamma * gamma), 1.0 - lam * rho_min_BBt)
    if eta >= 1.0:
        warnings.warn(
            f"contraction rate eta={eta!r} >= 1: linear-rate hypotheses not met",
            HypothesisWarning,
            stacklevel=2,
        )
    return eta


def write_trace_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "weighted_step", "objective"])
        for it, step, obj in rows:
            w.writerow([it, repr(float(step)), repr(float(obj))])
