"""Step-size search that brings a Metropolis-adjusted sampler's acceptance
rate into a target band, with ``delta = rho`` tied together."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .problem import CompositeTarget
from .samplers import SamplerConfig, init_state, make_kernel, run_chain

__all__ = ["TuneProbe", "TuneResult", "probe_acceptance", "tune_step_size", "warm_start"]


@dataclass(frozen=True)
class TuneProbe:
    delta: float
    acceptance: float


@dataclass(frozen=True)
class TuneResult:
    delta: float
    acceptance: float
    success: bool
    probes: tuple


def warm_start(target: CompositeTarget, theta0, cfg: SamplerConfig, steps: int) -> np.ndarray:
    """Endpoint of a ``steps``-step ULA-PDFP run from ``theta0``.

    Uses ``delta = cfg.rho`` and its own noise stream (chain index 1), so
    the main chain's draws are untouched. Metropolis-adjusted chains started
    far from the posterior bulk can reject every proposal; this moves them in.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    if steps <= 0:
        return theta0.copy()
    c = replace(cfg, delta=cfg.rho, N=steps, burn_in=0, thin=1)
    kernel = make_kernel("ula_pdfp", target, c)
    out = run_chain(init_state(theta0, c, chain_index=1), kernel, c, track=[0])
    return out.final_state.theta.copy()


def probe_acceptance(target: CompositeTarget, theta0, kind: str, cfg: SamplerConfig,
                     delta: float, steps: int) -> float:
    """Acceptance rate over the second half of a ``steps``-step run at ``delta = rho``.

    ``gamma`` reverts to its default, since a fixed value may leave the
    valid range once ``rho`` moves.
    """
    c = replace(cfg, delta=delta, rho=delta, gamma=None, N=steps, burn_in=0, thin=1)
    kernel = make_kernel(kind, target, c)
    out = run_chain(init_state(theta0, c, kind=kind, target=target), kernel, c, track=[0])
    return float(out.accepted[steps // 2 :].mean())


def tune_step_size(target: CompositeTarget, theta0, kind: str, cfg: SamplerConfig, *,
                   band=(0.4, 0.6), steps: int = 2000, max_probes: int = 8,
                   expand: float = 10.0) -> TuneResult:
    """Bisect ``log(delta)`` until the acceptance rate lands in ``band``.

    Starts at ``cfg.delta``; while no bracket exists the step is scaled by
    ``expand`` in the needed direction, then the bracket is halved in log
    space. Every probe restarts from ``theta0`` with the same seed. Stops
    after ``max_probes`` runs; ``success`` says whether the band was hit,
    otherwise the closest probe to the band centre is returned.
    """
    lo_band, hi_band = band
    centre = 0.5 * (lo_band + hi_band)
    theta0 = np.asarray(theta0, dtype=np.float64)
    lo = hi = None  # lo: acceptance too high (delta too small); hi: too low
    delta = cfg.delta
    probes = []
    for _ in range(max_probes):
        acc = probe_acceptance(target, theta0, kind, cfg, delta, steps)
        probes.append(TuneProbe(delta, acc))
        if lo_band <= acc <= hi_band:
            return TuneResult(delta, acc, True, tuple(probes))
        if acc > hi_band:
            lo = delta
        else:
            hi = delta
        if lo is None:
            delta = hi / expand
        elif hi is None:
            delta = lo * expand
        else:
            delta = math.sqrt(lo * hi)
    best = min(probes, key=lambda p: abs(p.acceptance - centre))
    return TuneResult(best.delta, best.acceptance, False, tuple(probes))
