"""Closed-form error bounds for ULA-PDFP and Monte Carlo checks against them.

All bounds are stated for a strongly convex smooth part (modulus ``m``),
a penalty whose scaled conjugate prox is bounded by ``C`` and ``B`` with
``rho_min(BB^T) > 0``; they are functions of :class:`TheoryInputs` only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .moreau import MoreauConfig, prox_energy
from .pdfp import PdfpParams, contraction_rate_eta, kstep_prox_subproblem, pdfp_solve
from .models import ToyTarget, make_toy
from .samplers import make_rng

__all__ = [
    "HypothesisViolation",
    "TheoryInputs",
    "moreau_strong_convexity",
    "expectation_bound",
    "gradient_sum_bounds",
    "kl_bound",
    "tv_bound",
    "tv_bound_terms",
    "chi2_initial_bound",
    "BoundCheckRow",
    "empirical_bound_check",
    "write_bound_csv",
]


class HypothesisViolation(ValueError):
    """The inputs do not satisfy the hypotheses a bound requires."""


def moreau_strong_convexity(m: float, rho: float) -> float:
    """Strong convexity modulus ``m / (1 + rho m)`` of the Moreau envelope."""
    if m < 0 or not rho > 0:
        raise ValueError("need m >= 0 and rho > 0")
    return m / (1.0 + rho * m)


@dataclass(frozen=True)
class TheoryInputs:
    m: float
    M2: float
    rho: float
    delta: float
    gamma: float
    lam: float
    K: int
    C: float
    d: int
    l: float  # total time N * delta
    rho_min_BBt: float
    initial_gap: float = 0.0

    def __post_init__(self):
        for name in ("M2", "rho", "delta", "gamma", "lam"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.m < 0 or self.rho_min_BBt < 0 or self.C < 0 or self.l < 0:
            raise ValueError("m, rho_min_BBt, C and l must be >= 0")
        if self.K < 0 or self.d < 1:
            raise ValueError("need K >= 0 and d >= 1")
        if self.delta > self.rho:
            raise ValueError("delta must not exceed rho")

    @property
    def eta(self) -> float:
        return contraction_rate_eta(self.m, self.rho, self.M2, self.gamma, self.lam, self.rho_min_BBt)

    @property
    def m_rho(self) -> float:
        return moreau_strong_convexity(self.m, self.rho)

    def eta_K(self) -> float:
        """``eta ** K``; raises :class:`HypothesisViolation` when ``eta >= 1``."""
        eta = _eta_quiet(self)
        if eta >= 1.0:
            raise HypothesisViolation(f"eta = {eta!r} >= 1: linear-rate hypotheses not met")
        return eta**self.K


def _eta_quiet(t: TheoryInputs) -> float:
    inv_rho = 1.0 / t.rho
    a = t.m + inv_rho
    return max(1.0 - a * a * (2.0 * t.gamma / (t.M2 + inv_rho) - t.gamma**2), 1.0 - t.lam * t.rho_min_BBt)


def _require_m(t: TheoryInputs):
    if not t.m > 0:
        raise HypothesisViolation("bound needs a strongly convex smooth part (m > 0)")


def expectation_bound(t: TheoryInputs, n: int) -> float:
    """Bound on ``E[U_rho(theta_n) - U_rho(x*)]`` after ``n`` ULA-PDFP steps."""
    _require_m(t)
    eK = t.eta_K()
    mr = t.m_rho
    decay = (1.0 - mr * t.delta * (1.0 - eK)) ** n
    floor = (2.0 * t.d * t.lam * t.rho + t.gamma**2 * t.C**2 * eK) / (
        2.0 * t.lam * t.rho**2 * mr * (1.0 - eK)
    )
    return decay * t.initial_gap + floor


def gradient_sum_bounds(t: TheoryInputs, N: int) -> tuple[float, float, float]:
    """Bounds on the accumulated sums over ``n < N`` (each times ``delta``) of
    ``E||grad U_rho(theta_n)||^2``, of the squared K-step gradient error and
    of the squared approximate gradient."""
    eK = t.eta_K()
    g0 = t.initial_gap
    lr2 = t.lam * t.rho**2
    c2 = t.gamma**2 * t.C**2
    s_grad = 2.0 / (1.0 - eK) * g0 + N * t.delta * (2.0 * t.d * t.lam * t.rho + c2 * eK) / (lr2 * (1.0 - eK))
    s_err = 2.0 * eK / (1.0 - eK) * g0 + N * t.delta * eK * (2.0 * t.d * t.lam * t.rho + c2) / (lr2 * (1.0 - eK))
    s_apx = 4.0 * (1.0 + eK) / (1.0 - eK) * g0 + 4.0 * N * t.delta * (
        t.d * t.lam * t.rho * (1.0 + eK) + c2 * eK
    ) / (lr2 * (1.0 - eK))
    return s_grad, s_err, s_apx


def kl_bound(t: TheoryInputs) -> float:
    """Bound on the KL divergence between the Moreau-Langevin diffusion path and
    the interpolated ULA-PDFP path on ``[0, l]`` from a fixed start."""
    eK = t.eta_K()
    d, r, dl, l = t.d, t.rho, t.delta, t.l
    first = (2.0 * dl**2 * (1.0 + eK) + 3.0 * r**2 * eK) / (3.0 * r**2 * (1.0 - eK)) * t.initial_gap
    num = l * d * t.lam * r * (4.0 * dl**2 * (1.0 + eK) + 3.0 * dl * r * (1.0 - eK) + 6.0 * r**2 * eK) + (
        l * t.gamma**2 * t.C**2 * eK * (4.0 * dl**2 + 3.0 * r**2)
    )
    return first + num / (6.0 * t.lam * r**4 * (1.0 - eK))


def tv_bound_terms(t: TheoryInputs) -> tuple[float, float]:
    """(mixing term, discretisation/inexactness term) of the TV bound to ``pi_rho``
    for a start drawn from ``N(x*, rho I)``."""
    _require_m(t)
    eK = t.eta_K()
    d, r, dl, l, lam = t.d, t.rho, t.delta, t.l, t.lam
    mr = t.m_rho
    mixing = 0.5 * math.exp(-(d / 4.0) * math.log(r * mr) - l * mr / 2.0)
    inner = lam * d * (2.0 * dl**2 * r**2 + 4.0 * l * dl**2 * r + 3.0 * l * dl * r**2) + eK * (
        lam * d * (2.0 * dl**2 * r**2 + 3.0 * r**4 + 4.0 * l * dl**2 * r - 3.0 * l * dl * r**2 + 6.0 * l * r**3)
        + l * t.gamma**2 * t.C**2 * (4.0 * dl**2 + 3.0 * r**2)
    )
    return mixing, math.sqrt(inner / (12.0 * lam * r**4 * (1.0 - eK)))


def tv_bound(t: TheoryInputs) -> float:
    a, b = tv_bound_terms(t)
    return a + b


def chi2_initial_bound(m: float, rho: float, d: int) -> float:
    """Bound ``(rho m_rho)^(-d/2)`` on ``int nu^2 / pi_rho`` for ``nu = N(x*, rho I)``."""
    return (rho * moreau_strong_convexity(m, rho)) ** (-d / 2.0)


@dataclass(frozen=True)
class BoundCheckRow:
    quantity: str
    n: int
    empirical: float
    stderr: float
    bound: float

    @property
    def holds(self) -> bool:
        # the absolute floor absorbs round-off when the bound is exactly zero
        return self.empirical <= self.bound + 3.0 * self.stderr + 1e-12


def _moreau_values(theta, toy: ToyTarget, cfg: MoreauConfig) -> np.ndarray:
    """Per-coordinate ``U_rho`` of a separable toy (one chain per coordinate)."""
    p = prox_energy(theta, toy.target, cfg, "exact")
    return toy.energy_1d(p) + (p - theta) ** 2 / (2.0 * cfg.rho)


def empirical_bound_check(
    toy: ToyTarget | str = "lasso_posterior",
    *,
    rho: float = 0.1,
    delta: float = 0.1,
    K: int = 1,
    gamma: Optional[float] = None,
    n_chains: int = 200,
    checkpoints: Sequence[int] = (0, 10, 100, 1000),
    init_offset: float = 0.0,
    seed: int = 0,
):
    """Run independent ULA-PDFP chains on a 1-D toy and compare with the bounds.

    The toy is separable with ``B = I``, so ``n_chains`` chains are advanced
    together as the coordinates of one ``n_chains``-dimensional state; each
    coordinate is an exact copy of the 1-D chain. Starts are drawn from
    ``N(x* + init_offset, rho)``. Returns ``(rows, inputs)``: one
    :class:`BoundCheckRow` per checkpoint for ``E[U_rho(theta_n) - U_rho(x*)]``
    and, at the last checkpoint, for the three accumulated sums.
    """
    if isinstance(toy, str):
        toy = make_toy(toy, n_chains)
    elif toy.dim != n_chains:
        toy = make_toy(toy.kind, n_chains)
    prob = toy.target.problem
    if not toy.m > 0:
        raise HypothesisViolation("toy must be strongly convex")
    if gamma is None:
        gamma = 1.0 / (prob.lipschitz_M2 + 1.0 / rho)
    lam = 1.0 / prob.lambda_max_BBt
    params = PdfpParams(gamma=gamma, lam=lam)
    mcfg = MoreauConfig(rho=rho, exact_tol=1e-13, max_inner=5000, gamma=gamma, lam=lam)

    sol = pdfp_solve(prob, PdfpParams(gamma=1.0 / prob.lipschitz_M2, lam=lam, tol=1e-13, max_iter=20_000),
                     np.zeros(n_chains))
    x_star_1d = float(np.mean(sol.x))
    u_star = float(np.mean(_moreau_values(np.full(n_chains, x_star_1d), toy, mcfg)))

    rng = make_rng(seed, 0)
    theta = x_star_1d + init_offset + math.sqrt(rho) * rng.standard_normal(n_chains)
    gaps0 = _moreau_values(theta, toy, mcfg) - u_star
    g0 = float(gaps0.mean())
    n_max = max(checkpoints)
    inputs = TheoryInputs(
        m=toy.m, M2=toy.M2, rho=rho, delta=delta, gamma=gamma, lam=lam, K=K,
        C=prob.g.dual_bound(1), d=1, l=n_max * delta, rho_min_BBt=1.0, initial_gap=g0,
    )

    rows = []
    sums = np.zeros((3, n_chains))
    sq2d = math.sqrt(2.0 * delta)
    for n in range(n_max + 1):
        if n in checkpoints:
            gaps = _moreau_values(theta, toy, mcfg) - u_star
            rows.append(BoundCheckRow("expectation_gap", n, float(gaps.mean()),
                                      float(gaps.std(ddof=1) / math.sqrt(n_chains)),
                                      expectation_bound(inputs, n)))
        if n == n_max:
            break
        xk = kstep_prox_subproblem(theta, rho, prob, params, K)
        p = prox_energy(theta, toy.target, mcfg, "exact")
        sums[0] += ((theta - p) / rho) ** 2
        sums[1] += ((xk - p) / rho) ** 2
        sums[2] += ((theta - xk) / rho) ** 2
        theta = (1.0 - delta / rho) * theta + (delta / rho) * xk + sq2d * rng.standard_normal(n_chains)

    bounds = gradient_sum_bounds(inputs, n_max)
    for name, s, b in zip(("grad_sum", "error_sum", "approx_grad_sum"), sums, bounds):
        s = delta * s
        rows.append(BoundCheckRow(name, n_max, float(s.mean()), float(s.std(ddof=1) / math.sqrt(n_chains)), b))
    return rows, inputs


def write_bound_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "n", "empirical", "stderr", "bound", "holds"])
        for r in rows:
            w.writerow([r.quantity, r.n, repr(r.empirical), repr(r.stderr), repr(r.bound), r.holds])
