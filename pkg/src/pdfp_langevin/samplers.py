"""Langevin transition kernels and the chain driver.

Six kernels share one state type:

* ``ula`` / ``mala``: plain (Metropolis-adjusted) Langevin on a smooth energy;
* ``prox_ula`` / ``prox_mala``: Moreau-envelope Langevin with the prox
  solved to tolerance;
* ``ula_pdfp`` / ``mala_pdfp``: the same with the prox replaced by ``K``
  PDFP steps started from dual zero.

Random numbers come from numpy's ``Philox`` counter-based bit generator,
keyed by ``SeedSequence([seed, chain_index])``; Gaussian variates use
numpy's ``Generator.standard_normal`` (ziggurat) and uniforms
``Generator.random``. Proposal noise is drawn before the uniform in every
step, so a chain's trajectory is a pure function of ``(seed, chain_index)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .pdfp import PdfpParams, check_params, default_params, kstep_prox_subproblem
from .problem import CompositeTarget

__all__ = [
    "SAMPLERS",
    "SamplerConfig",
    "ChainState",
    "ChainOutput",
    "ChainError",
    "make_rng",
    "init_state",
    "ula_step",
    "mala_step",
    "prox_ula_step",
    "prox_mala_step",
    "ula_pdfp_step",
    "mala_pdfp_step",
    "make_kernel",
    "run_chain",
]

SAMPLERS = ("ula", "mala", "prox_ula", "prox_mala", "ula_pdfp", "mala_pdfp")
_PROXIMAL = ("prox_ula", "prox_mala", "ula_pdfp", "mala_pdfp")


def make_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    """Independent Philox stream for chain ``chain_index`` under ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chain_index)])))


class ChainError(RuntimeError):
    """A step failed; ``state`` is the last good chain state."""

    def __init__(self, message, state=None, cause=None):
        super().__init__(message)
        self.state = state
        self.cause = cause


@dataclass(frozen=True)
class SamplerConfig:
    delta: float
    rho: Optional[float] = None
    K: int = 1
    gamma: Optional[float] = None
    lam: Optional[float] = None
    N: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    p0: str = "literal"  # MALA-PDFP initial cache: "literal" (P0 = theta0) or "prox"
    inner_tol: Optional[float] = None  # optional early stop of the K-step loop
    exact_tol: float = 1e-10
    max_inner: int = 500

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if self.rho is not None and not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho!r}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.N < 0 or self.burn_in < 0 or self.burn_in > self.N:
            raise ValueError("need 0 <= burn_in <= N")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.p0 not in ("literal", "prox"):
            raise ValueError("p0 must be 'literal' or 'prox'")

    def pdfp_params(self, target: CompositeTarget) -> PdfpParams:
        d = default_params(target.problem, self.rho)
        return PdfpParams(
            gamma=self.gamma if self.gamma is not None else d.gamma,
            lam=self.lam if self.lam is not None else d.lam,
        )

    def validate(self, kind: str, target: CompositeTarget):
        """Reject parameter combinations the algorithms forbid."""
        if kind not in SAMPLERS:
            raise ValueError(f"unknown sampler {kind!r}; choose from {SAMPLERS}")
        if kind in ("ula", "mala"):
            if not target.is_smooth:
                raise ValueError(f"{kind} needs a smooth target (zero penalty weight)")
            L = target.problem.lipschitz_M2
            if kind == "ula" and self.delta > 1.0 / L:
                raise ValueError(f"delta={self.delta!r} violates delta in (0, 1/L_U], 1/L_U = {1.0 / L!r}")
            return
        if self.rho is None:
            raise ValueError(f"{kind} needs rho")
        if self.delta > self.rho:
            raise ValueError(
                f"delta={self.delta!r} > rho={self.rho!r}: proximal Langevin requires delta in (0, rho]"
            )
        p = self.pdfp_params(target)
        check_params(target.problem, p.gamma, p.lam, self.rho)


@dataclass(frozen=True)
class ChainState:
    theta: np.ndarray
    rng: np.random.Generator = field(repr=False, compare=False)
    prox_cache: Optional[np.ndarray] = None
    n: int = 0
    accept_count: int = 0
    accepted: bool = True
    proposal_jump_sq: float = 0.0


def init_state(theta0, cfg: SamplerConfig, chain_index: int = 0, kind: Optional[str] = None,
               target: Optional[CompositeTarget] = None) -> ChainState:
    theta0 = np.array(theta0, dtype=np.float64)
    cache = None
    if kind == "mala_pdfp":
        if cfg.p0 == "prox":
            cache = kstep_prox_subproblem(theta0, cfg.rho, target.problem, cfg.pdfp_params(target),
                                          cfg.K, cfg.inner_tol)
        else:
            cache = theta0.copy()
    elif kind == "prox_mala":
        cache = _exact_prox(theta0, target, cfg)
    return ChainState(theta=theta0, rng=make_rng(cfg.seed, chain_index), prox_cache=cache)


def _noise(state: ChainState, noise):
    if noise is None:
        return state.rng.standard_normal(state.theta.shape)
    return np.broadcast_to(np.asarray(noise, dtype=np.float64), state.theta.shape)


def _uniform(state: ChainState, uniform):
    return state.rng.random() if uniform is None else float(uniform)


def _sqnorm(a) -> float:
    return float(np.vdot(a, a))


def _check_finite(y, state):
    if not np.all(np.isfinite(y)):
        raise FloatingPointError(f"non-finite proposal at step {state.n}")


def _advance(state, theta, cache, accepted, jump_sq):
    return replace(
        state,
        theta=theta,
        prox_cache=cache,
        n=state.n + 1,
        accept_count=state.accept_count + int(accepted),
        accepted=accepted,
        proposal_jump_sq=jump_sq,
    )


def _accept(log_ratio: float, a: float) -> bool:
    # a < min(1, exp(log_ratio)); exp is only taken of non-positive numbers
    return a < math.exp(min(0.0, log_ratio))


def ula_step(state: ChainState, grad_u: Callable, delta: float, noise=None) -> ChainState:
    """``theta <- theta - delta grad U(theta) + sqrt(2 delta) xi``."""
    xi = _noise(state, noise)
    new = state.theta - delta * grad_u(state.theta) + math.sqrt(2.0 * delta) * xi
    _check_finite(new, state)
    return _advance(state, new, None, True, _sqnorm(new - state.theta))


def mala_log_ratio(theta, y, energy, grad_u, delta) -> float:
    """Log of the Metropolis ratio for a Langevin proposal ``theta -> y``."""
    fwd = y - theta + delta * grad_u(theta)
    bwd = theta - y + delta * grad_u(y)
    return (energy(theta) - energy(y)) - (_sqnorm(bwd) - _sqnorm(fwd)) / (4.0 * delta)


def mala_step(state: ChainState, energy: Callable, grad_u: Callable, delta: float,
              noise=None, uniform=None) -> ChainState:
    xi = _noise(state, noise)
    theta = state.theta
    y = theta - delta * grad_u(theta) + math.sqrt(2.0 * delta) * xi
    _check_finite(y, state)
    a = _uniform(state, uniform)
    ok = _accept(mala_log_ratio(theta, y, energy, grad_u, delta), a)
    return _advance(state, y if ok else theta, None, ok, _sqnorm(y - theta))


def _exact_prox(theta, target, cfg):
    return kstep_prox_subproblem(theta, cfg.rho, target.problem, cfg.pdfp_params(target),
                                 cfg.max_inner, tol=cfg.exact_tol)


def _kstep_prox(theta, target, cfg, params=None):
    params = params or cfg.pdfp_params(target)
    return kstep_prox_subproblem(theta, cfg.rho, target.problem, params, cfg.K, cfg.inner_tol)


def _drift_mean(theta, prox_point, delta, rho):
    r = delta / rho
    return (1.0 - r) * theta + r * prox_point


def proximal_log_ratio(theta, p_theta, y, p_y, energy, delta, rho) -> float:
    """Log Metropolis ratio of the proximal-Langevin proposal.

    ``p_theta``/``p_y`` are the (exact or approximate) proximity points at
    ``theta`` and ``y``; the density ratio uses the original energy.
    """
    fwd = y - _drift_mean(theta, p_theta, delta, rho)
    bwd = theta - _drift_mean(y, p_y, delta, rho)
    return (energy(theta) - energy(y)) - (_sqnorm(bwd) - _sqnorm(fwd)) / (4.0 * delta)


def _proximal_ula(state, prox_point, cfg, noise):
    xi = _noise(state, noise)
    new = _drift_mean(state.theta, prox_point, cfg.delta, cfg.rho) + math.sqrt(2.0 * cfg.delta) * xi
    _check_finite(new, state)
    return _advance(state, new, None, True, _sqnorm(new - state.theta))


def prox_ula_step(state: ChainState, target: CompositeTarget, cfg: SamplerConfig, noise=None) -> ChainState:
    """Proximal ULA with the prox solved to ``cfg.exact_tol``."""
    return _proximal_ula(state, _exact_prox(state.theta, target, cfg), cfg, noise)


def ula_pdfp_step(state: ChainState, target: CompositeTarget, cfg: SamplerConfig, noise=None,
                  params: Optional[PdfpParams] = None) -> ChainState:
    """Proximal ULA with the prox replaced by ``cfg.K`` PDFP steps."""
    return _proximal_ula(state, _kstep_prox(state.theta, target, cfg, params), cfg, noise)


def _proximal_mala(state, target, cfg, prox_fn, p_theta, noise, uniform):
    xi = _noise(state, noise)
    theta = state.theta
    y = _drift_mean(theta, p_theta, cfg.delta, cfg.rho) + math.sqrt(2.0 * cfg.delta) * xi
    _check_finite(y, state)
    p_y = prox_fn(y)
    a = _uniform(state, uniform)
    ok = _accept(proximal_log_ratio(theta, p_theta, y, p_y, target.energy, cfg.delta, cfg.rho), a)
    if ok:
        return _advance(state, y, p_y, True, _sqnorm(y - theta))
    return _advance(state, theta, p_theta, False, _sqnorm(y - theta))


def prox_mala_step(state: ChainState, target: CompositeTarget, cfg: SamplerConfig,
                   noise=None, uniform=None) -> ChainState:
    """Proximal MALA; the prox at the current state is reused from the cache."""
    p_theta = state.prox_cache
    if p_theta is None:
        p_theta = _exact_prox(state.theta, target, cfg)
    return _proximal_mala(state, target, cfg, lambda y: _exact_prox(y, target, cfg),
                          p_theta, noise, uniform)


def mala_pdfp_step(state: ChainState, target: CompositeTarget, cfg: SamplerConfig,
                   noise=None, uniform=None, params: Optional[PdfpParams] = None) -> ChainState:
    """MALA-PDFP: proposal from the cached K-step prox ``P_n``; only the prox at
    the proposal is computed. Accept keeps ``P_tmp``, reject keeps ``P_n``."""
    params = params or cfg.pdfp_params(target)
    p_theta = state.prox_cache if state.prox_cache is not None else state.theta
    return _proximal_mala(state, target, cfg, lambda y: _kstep_prox(y, target, cfg, params),
                          p_theta, noise, uniform)


def make_kernel(kind: str, target: CompositeTarget, cfg: SamplerConfig) -> Callable[[ChainState], ChainState]:
    """Validated single-argument transition kernel."""
    cfg.validate(kind, target)
    if kind == "ula":
        return lambda s: ula_step(s, target.grad_f, cfg.delta)
    if kind == "mala":
        return lambda s: mala_step(s, target.energy, target.grad_f, cfg.delta)
    if kind == "prox_ula":
        return lambda s: prox_ula_step(s, target, cfg)
    if kind == "prox_mala":
        return lambda s: prox_mala_step(s, target, cfg)
    params = cfg.pdfp_params(target)
    if kind == "ula_pdfp":
        return lambda s: ula_pdfp_step(s, target, cfg, params=params)
    return lambda s: mala_pdfp_step(s, target, cfg, params=params)


@dataclass
class ChainOutput:
    samples: np.ndarray  # (n_samples, n_tracked) rows of tracked coordinates
    acceptance_rate: float
    mean: np.ndarray
    var: np.ndarray
    esjd: float  # mean squared jump between consecutive retained samples
    n_samples: int
    accepted: np.ndarray  # per step
    proposal_jump_sq: np.ndarray  # per step
    energy_trace: Optional[np.ndarray] = None
    final_state: Optional[ChainState] = None
    tracked: Optional[np.ndarray] = None  # flat indices of tracked coordinates


def run_chain(initial: ChainState, step_kernel: Callable[[ChainState], ChainState], cfg: SamplerConfig,
              track=None, energy: Optional[Callable] = None) -> ChainOutput:
    """Run ``cfg.N`` steps, discard ``cfg.burn_in``, keep every ``cfg.thin``-th.

    ``track`` selects the flat coordinate indices stored per retained sample
    (all by default). Mean and variance of the full state are accumulated
    with Welford's update; ``energy``, if given, is traced at every step.
    """
    N, burn, thin = cfg.N, cfg.burn_in, cfg.thin
    n_keep = (N - burn) // thin
    size = initial.theta.size
    idx = np.arange(size) if track is None else np.asarray(track, dtype=np.intp)
    samples = np.empty((n_keep, idx.size))
    mean = np.zeros(initial.theta.shape)
    m2 = np.zeros(initial.theta.shape)
    accepted = np.zeros(N, dtype=bool)
    jumps = np.zeros(N)
    etrace = np.empty(N) if energy is not None else None
    jump_sum = 0.0
    prev = None
    kept = 0
    state = initial
    for n in range(1, N + 1):
        try:
            state = step_kernel(state)
        except (FloatingPointError, ValueError) as exc:
            raise ChainError(f"chain failed at step {n}: {exc}", state=state, cause=exc) from exc
        accepted[n - 1] = state.accepted
        jumps[n - 1] = state.proposal_jump_sq
        if etrace is not None:
            etrace[n - 1] = energy(state.theta)
        if n > burn and (n - burn) % thin == 0:
            th = state.theta
            samples[kept] = th.ravel()[idx]
            kept += 1
            delta = th - mean
            mean += delta / kept
            m2 += delta * (th - mean)
            if prev is not None:
                jump_sum += _sqnorm(th - prev)
            prev = th
    var = m2 / (kept - 1) if kept > 1 else np.zeros_like(m2)
    return ChainOutput(
        samples=samples,
        acceptance_rate=float(accepted.mean()) if N else 0.0,
        mean=mean,
        var=var,
        esjd=jump_sum / (kept - 1) if kept > 1 else 0.0,
        n_samples=kept,
        accepted=accepted,
        proposal_jump_sq=jumps,
        energy_trace=etrace,
        final_state=state,
        tracked=idx,
    )
