"""Dense fields and linear operators.

A "field" throughout the package is a C-contiguous ``float64`` numpy array;
its shape is the field's shape metadata (1-D signals, 2-D images, or the
stacked ``(2, H, W)`` output of the discrete gradient).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.fft as sfft

__all__ = [
    "ShapeError",
    "LinearMap",
    "as_field",
    "make_dense_map",
    "make_identity_map",
    "make_convolution_map",
    "make_gradient_map",
    "power_iteration",
    "PowerIterationResult",
]


class ShapeError(ValueError):
    """Raised when an array does not have the shape an operator expects."""


def as_field(x, shape=None) -> np.ndarray:
    """Return ``x`` as a contiguous float64 array, checking shape and finiteness."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ShapeError(f"expected shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite entries")
    return arr


@dataclass(frozen=True)
class LinearMap:
    """A linear operator with an explicit adjoint.

    Instances are immutable; ``apply`` and ``adjoint`` are pure.
    """

    domain_shape: tuple
    range_shape: tuple
    forward: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    backward: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kind: str = "dense"
    normal: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def gram(self, x: np.ndarray) -> np.ndarray:
        """``A^T A x``, in one pass when the operator provides it."""
        x = np.asarray(x, dtype=np.float64)
        if self.normal is not None:
            if x.shape != self.domain_shape:
                raise ShapeError(f"{self.kind} map expects input of shape {self.domain_shape}, got {x.shape}")
            return self.normal(x)
        return self.adjoint(self.apply(x))

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.domain_shape:
            raise ShapeError(
                f"{self.kind} map expects input of shape {self.domain_shape}, got {x.shape}"
            )
        return self.forward(x)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != self.range_shape:
            raise ShapeError(
                f"{self.kind} adjoint expects input of shape {self.range_shape}, got {y.shape}"
            )
        return self.backward(y)

    __call__ = apply

    @property
    def domain_size(self) -> int:
        return int(np.prod(self.domain_shape))

    @property
    def range_size(self) -> int:
        return int(np.prod(self.range_shape))


def make_dense_map(matrix) -> LinearMap:
    """Wrap a 2-D matrix ``M`` as ``x -> M @ x`` on 1-D vectors."""
    M = as_field(matrix)
    if M.ndim != 2:
        raise ShapeError(f"dense map needs a 2-D matrix, got ndim={M.ndim}")
    MT = np.ascontiguousarray(M.T)
    return LinearMap(
        domain_shape=(M.shape[1],),
        range_shape=(M.shape[0],),
        forward=lambda x: M @ x,
        backward=lambda y: MT @ y,
        kind="dense",
    )


def make_identity_map(shape) -> LinearMap:
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    return LinearMap(
        domain_shape=shape,
        range_shape=shape,
        forward=lambda x: x.copy(),
        backward=lambda y: y.copy(),
        kind="identity",
    )


def make_convolution_map(kernel, image_shape) -> LinearMap:
    """Periodic 2-D convolution with ``kernel``.

    The kernel's centre is at index ``(kh // 2, kw // 2)``. The adjoint is
    correlation with the same kernel, i.e. convolution with the flipped one.
    Both are applied in the Fourier domain.
    """
    k = as_field(kernel)
    if k.ndim != 2:
        raise ShapeError("kernel must be 2-D")
    image_shape = tuple(int(s) for s in image_shape)
    if len(image_shape) != 2:
        raise ShapeError("image_shape must be 2-D")
    if k.shape[0] > image_shape[0] or k.shape[1] > image_shape[1]:
        raise ShapeError(f"kernel {k.shape} larger than image {image_shape}")
    if not np.isclose(k.sum(), 1.0, rtol=0, atol=1e-12):
        raise ValueError(f"kernel must sum to 1 (got {k.sum()!r})")

    # Embed the kernel with its centre at the origin; the transfer function
    # then turns convolution into a pointwise product.
    ca, cb = k.shape[0] // 2, k.shape[1] // 2
    psf = np.zeros(image_shape)
    psf[: k.shape[0], : k.shape[1]] = k
    psf = np.roll(psf, (-ca, -cb), axis=(0, 1))
    transfer = np.fft.rfft2(psf)
    transfer_conj = np.conj(transfer)
    power = np.abs(transfer) ** 2

    def forward(x):
        return sfft.irfft2(sfft.rfft2(x) * transfer, s=image_shape)

    def backward(y):
        return sfft.irfft2(sfft.rfft2(y) * transfer_conj, s=image_shape)

    def normal(x):
        return sfft.irfft2(sfft.rfft2(x) * power, s=image_shape)

    return LinearMap(image_shape, image_shape, forward, backward, kind="convolution", normal=normal)


def make_gradient_map(image_shape) -> LinearMap:
    """Forward-difference gradient with Neumann boundary.

    Output has shape ``(2, H, W)``: index 0 holds horizontal (x, along
    columns) differences, index 1 vertical (y, along rows) differences. The
    last column/row of each difference field is zero.
    """
    image_shape = tuple(int(s) for s in np.atleast_1d(image_shape))
    if len(image_shape) != 2:
        raise ShapeError("gradient map needs a 2-D image shape")
    if min(image_shape) < 2:
        raise ShapeError("each image side must be >= 2")

    def forward(x):
        out = np.zeros((2,) + x.shape)
        out[0, :, :-1] = x[:, 1:] - x[:, :-1]
        out[1, :-1, :] = x[1:, :] - x[:-1, :]
        return out

    def backward(p):
        px, py = p[0], p[1]
        out = np.zeros(p.shape[1:])
        out[:, :-1] -= px[:, :-1]
        out[:, 1:] += px[:, :-1]
        out[:-1, :] -= py[:-1, :]
        out[1:, :] += py[:-1, :]
        return out

    return LinearMap(image_shape, (2,) + image_shape, forward, backward, kind="gradient")


class PowerIterationResult(NamedTuple):
    value: float
    converged: bool
    iterations: int


def power_iteration(op: LinearMap, max_iters: int = 200, tol: float = 1e-8, seed: int = 0):
    """Estimate ``lambda_max(B B^T)`` by power iteration on ``B^T B``.

    Stops when successive Rayleigh quotients differ by less than ``tol``
    relative to the current estimate. A zero operator returns 0 flagged as
    not converged.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.domain_shape)
    x /= np.linalg.norm(x)
    prev = None
    for it in range(1, max_iters + 1):
        y = op.adjoint(op.apply(x))
        q = float(np.vdot(x, y))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return PowerIterationResult(0.0, False, it)
        x = y / ny
        if prev is not None and abs(q - prev) < tol * abs(q):
            return PowerIterationResult(q, True, it)
        prev = q
    return PowerIterationResult(prev if prev is not None else 0.0, False, max_iters)
