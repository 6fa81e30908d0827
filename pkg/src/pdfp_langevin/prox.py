"""Elementary proximity operators: soft thresholding and the weighted L1 penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["soft_threshold", "L1Penalty", "prox_conjugate_scaled"]


def soft_threshold(x, t: float) -> np.ndarray:
    """Proximity operator of ``t * ||.||_1``: ``sign(x) * max(|x| - t, 0)``."""
    if not t > 0:
        raise ValueError(f"threshold must be positive, got {t!r}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass(frozen=True)
class L1Penalty:
    """``g(z) = weight * ||z||_1``.

    Its conjugate is the indicator of the box ``[-weight, weight]^n``, so the
    scaled conjugate prox is a clamp regardless of the scale.
    """

    weight: float = 1.0
    kind: str = "l1"

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"penalty weight must be >= 0, got {self.weight!r}")

    def value(self, z) -> float:
        return self.weight * float(np.abs(z).sum())

    def prox(self, z, t: float) -> np.ndarray:
        """``prox_{t g}(z)``."""
        if self.weight == 0.0:
            return np.array(z, dtype=np.float64)
        return soft_threshold(z, t * self.weight)

    def prox_conjugate(self, v, s: float) -> np.ndarray:
        """``prox_{s g*}(v)``: projection onto the dual box (independent of ``s``)."""
        if not s > 0:
            raise ValueError(f"scale must be positive, got {s!r}")
        return np.clip(v, -self.weight, self.weight)

    def dual_bound(self, dual_size: int) -> float:
        """Uniform bound ``C`` on ``||prox_{s g*}(v)||_2`` over all ``v``."""
        return self.weight * float(np.sqrt(dual_size))


def prox_conjugate_scaled(v, s: float, g: L1Penalty) -> np.ndarray:
    """``prox_{s g*}(v)`` for the penalty ``g``."""
    return g.prox_conjugate(np.asarray(v, dtype=np.float64), s)
