"""Concrete targets: TV-regularised deblurring, an ill-posed dense inverse
problem, and one-dimensional toys with a quadrature ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import (
    LinearMap,
    as_field,
    make_convolution_map,
    make_gradient_map,
    make_identity_map,
    power_iteration,
)
from .problem import CompositeProblem, CompositeTarget
from .prox import L1Penalty

__all__ = [
    "DeblurModel",
    "ToyTarget",
    "QuadratureCDF",
    "motion_blur_kernel",
    "phantom",
    "make_deblur_model",
    "make_linear_gaussian_target",
    "make_illposed_dense",
    "make_toy_1d",
    "make_toy",
]


@dataclass(frozen=True)
class DeblurModel:
    """Linear Gaussian observation ``y = A(truth) + sigma * noise`` with a TV prior."""

    observation: np.ndarray
    A: LinearMap
    sigma: float
    lambda_reg: float
    ridge_eps: float = 0.0
    truth: Optional[np.ndarray] = None

    def initial_point(self) -> np.ndarray:
        """Observation mapped back to parameter shape (``A^T y`` unless shapes agree)."""
        if self.A.domain_shape == self.A.range_shape:
            return self.observation.copy()
        return self.A.adjoint(self.observation)


def motion_blur_kernel(length: int = 7, direction: str = "horizontal") -> np.ndarray:
    """Uniform linear motion kernel, summing to one."""
    if length < 1:
        raise ValueError("kernel length must be >= 1")
    k = np.full((1, length), 1.0 / length)
    if direction == "horizontal":
        return k
    if direction == "vertical":
        return k.T.copy()
    raise ValueError(f"unknown motion direction {direction!r}")


def phantom(size: int = 64) -> np.ndarray:
    """Piecewise-constant test image with values in ``[0, 1]``."""
    n = int(size)
    yy, xx = np.mgrid[0:n, 0:n] / n
    img = np.full((n, n), 0.1)
    img[(xx > 0.12) & (xx < 0.45) & (yy > 0.15) & (yy < 0.55)] = 0.8
    img[(xx - 0.68) ** 2 + (yy - 0.35) ** 2 < 0.18**2] = 0.55
    img[(xx - 0.68) ** 2 + (yy - 0.35) ** 2 < 0.07**2] = 1.0
    img[(xx > 0.2) & (xx < 0.85) & (yy > 0.7) & (yy < 0.82)] = 0.35
    img[(xx > 0.3) & (xx < 0.38) & (yy > 0.62) & (yy < 0.9)] = 0.95
    return img


def make_linear_gaussian_target(
    A: LinearMap,
    observation,
    sigma: float,
    lambda_reg: float,
    B: LinearMap,
    ridge_eps: float = 0.0,
    label: str = "linear-gaussian",
) -> CompositeTarget:
    """``U(x) = ||y - A x||^2/(2 sigma^2) + (eps/2)||x||^2 + lambda_reg ||B x||_1``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not ridge_eps >= 0:
        raise ValueError("ridge_eps must be >= 0")
    y = as_field(observation, A.range_shape)
    inv_s2 = 1.0 / sigma**2
    aty = A.adjoint(y)

    def f(x):
        r = y - A.apply(x)
        return 0.5 * inv_s2 * float(np.vdot(r, r)) + 0.5 * ridge_eps * float(np.vdot(x, x))

    def grad_f(x):
        g = inv_s2 * (A.gram(x) - aty)
        if ridge_eps:
            g = g + ridge_eps * x
        return g

    if A.kind == "identity":
        ata = 1.0
    else:
        ata = power_iteration(A, max_iters=1000, tol=1e-12).value
    problem = CompositeProblem(
        f=f,
        grad_f=grad_f,
        lipschitz_M2=ata * inv_s2 + ridge_eps,
        strong_convexity_m=ridge_eps,
        B=B,
        g=L1Penalty(lambda_reg),
    )
    return CompositeTarget(problem, label)


def make_deblur_model(truth, kernel, sigma: float, lambda_reg: float, ridge_eps: float = 0.0,
                      seed: int = 0, add_noise: bool = True):
    """Blur ``truth`` periodically with ``kernel`` and add seeded Gaussian noise.

    Returns ``(DeblurModel, CompositeTarget)``; the penalty operator is the
    discrete gradient, i.e. the prior is total variation.
    """
    truth = as_field(truth)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not lambda_reg >= 0:
        raise ValueError("lambda_reg must be >= 0")
    A = make_convolution_map(kernel, truth.shape)
    y = A.apply(truth)
    if add_noise:
        rng = np.random.default_rng(seed)
        y = y + sigma * rng.standard_normal(y.shape)
    model = DeblurModel(y, A, sigma, lambda_reg, ridge_eps, truth)
    target = make_linear_gaussian_target(
        A, y, sigma, lambda_reg, make_gradient_map(truth.shape), ridge_eps, label="deblur"
    )
    return model, target


def _reshaped_dense(M: np.ndarray, domain_shape: tuple) -> LinearMap:
    MT = np.ascontiguousarray(M.T)
    return LinearMap(
        domain_shape=tuple(domain_shape),
        range_shape=(M.shape[0],),
        forward=lambda x: M @ x.ravel(),
        backward=lambda y: (MT @ y).reshape(domain_shape),
        kind="dense",
    )


def make_illposed_dense(dim_obs: int, dim_param: int, condition: float, sigma: float,
                        lambda_reg: float, seed: int = 0, param_shape=None,
                        truth=None, ridge_eps: float = 0.0):
    """Random dense forward map with geometrically decaying singular values.

    The ``r = min(dim_obs, dim_param)`` singular values run from 1 down to
    ``1/condition``. For square problems ``A = V S V^T`` (so ``condition=1``
    gives the identity); otherwise ``A = U S V^T`` with independent random
    orthonormal factors. With a 2-D ``param_shape`` the prior is TV, else the
    L1 norm of the coefficients.
    """
    rng = np.random.default_rng(seed)
    r = min(dim_obs, dim_param)
    svals = condition ** (-np.arange(r) / max(r - 1, 1))
    V, _ = np.linalg.qr(rng.standard_normal((dim_param, dim_param)))
    if dim_obs == dim_param:
        U = V
    else:
        U, _ = np.linalg.qr(rng.standard_normal((dim_obs, dim_obs)))
    M = (U[:, :r] * svals) @ V[:, :r].T

    if param_shape is None:
        param_shape = (dim_param,)
    param_shape = tuple(param_shape)
    if int(np.prod(param_shape)) != dim_param:
        raise ValueError("param_shape does not match dim_param")
    A = _reshaped_dense(M, param_shape)
    B = make_gradient_map(param_shape) if len(param_shape) == 2 else make_identity_map(param_shape)

    if truth is None:
        if len(param_shape) == 2 and param_shape[0] == param_shape[1]:
            truth = phantom(param_shape[0])
        else:
            truth = np.repeat(rng.uniform(0, 1, size=8), -(-dim_param // 8))[:dim_param]
            truth = truth.reshape(param_shape)
    truth = as_field(truth, param_shape)
    y = A.apply(truth) + sigma * rng.standard_normal(dim_obs)
    model = DeblurModel(y, A, sigma, lambda_reg, ridge_eps, truth)
    target = make_linear_gaussian_target(A, y, sigma, lambda_reg, B, ridge_eps, label="illposed")
    return model, target, svals


class QuadratureCDF:
    """CDF of ``exp(-energy)`` on ``[lo, hi]`` by cumulative composite Simpson.

    ``panels`` (even) sub-intervals; values between nodes are linearly
    interpolated, outside ``[lo, hi]`` clamped to 0 and 1.
    """

    def __init__(self, energy: Callable[[np.ndarray], np.ndarray], lo: float = -12.0,
                 hi: float = 12.0, panels: int = 1_000_000):
        if panels % 2:
            raise ValueError("Simpson's rule needs an even number of panels")
        x = np.linspace(lo, hi, panels + 1)
        u = energy(x)
        p = np.exp(-(u - u.min()))
        h = (hi - lo) / panels
        pair = h / 3.0 * (p[0:-1:2] + 4.0 * p[1::2] + p[2::2])
        cum = np.concatenate([[0.0], np.cumsum(pair)])
        self.log_norm = float(np.log(cum[-1]) - u.min())
        self.nodes = x[::2]
        self.values = cum / cum[-1]
        self.lo, self.hi = lo, hi

    @property
    def normalizer(self) -> float:
        return float(np.exp(self.log_norm))

    def __call__(self, t):
        return np.interp(t, self.nodes, self.values, left=0.0, right=1.0)


@dataclass(frozen=True)
class ToyTarget:
    """Separable toy target: ``dim`` independent copies of a 1-D energy.

    ``cdf`` is the marginal CDF of one coordinate under ``exp(-energy_1d)``.
    """

    target: CompositeTarget
    dim: int
    energy_1d: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    cdf: QuadratureCDF = field(repr=False)
    m: float
    M2: float
    kind: str


_TOYS = {
    # kind: (penalty weight, 1-D energy)
    "lasso_posterior": (1.0, lambda x: 0.5 * x * x + np.abs(x)),
    "gaussian": (0.0, lambda x: 0.5 * x * x),
}

_CDF_CACHE: dict = {}


def make_toy(kind: str = "lasso_posterior", dim: int = 1, panels: int = 1_000_000) -> ToyTarget:
    """``U(x) = sum_i x_i^2/2 + w |x_i|`` with ``B = I`` (``m = M2 = 1``)."""
    if kind not in _TOYS:
        raise ValueError(f"unknown toy kind {kind!r}")
    weight, e1 = _TOYS[kind]
    problem = CompositeProblem(
        f=lambda x: 0.5 * float(np.vdot(x, x)),
        grad_f=lambda x: x.copy(),
        lipschitz_M2=1.0,
        strong_convexity_m=1.0,
        B=make_identity_map((dim,)),
        g=L1Penalty(weight),
    )
    key = (kind, panels)
    if key not in _CDF_CACHE:
        _CDF_CACHE[key] = QuadratureCDF(e1, -12.0, 12.0, panels)
    return ToyTarget(
        target=CompositeTarget(problem, f"toy-{kind}"),
        dim=dim,
        energy_1d=e1,
        cdf=_CDF_CACHE[key],
        m=1.0,
        M2=1.0,
        kind=kind,
    )


def make_toy_1d(kind: str = "lasso_posterior") -> ToyTarget:
    return make_toy(kind, 1)
