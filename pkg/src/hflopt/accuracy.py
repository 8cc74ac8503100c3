"""Iteration-count model linking local, edge and global accuracy targets.

``a`` local GD steps reach local accuracy ``theta``; ``b`` edge aggregations
reach edge accuracy ``mu``; ``R`` cloud rounds reach the global target
``epsilon``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# 1 - exp(-x) underflows to 0 for x below ~1e-300
_MIN_DENOMINATOR = 1e-300


class InsufficientWork(ArithmeticError):
    """Local/edge iteration counts too small for the round count to be finite."""


@dataclass(frozen=True)
class AccuracyParams:
    zeta: float
    gamma: float
    big_c: float = 1.0
    epsilon: float = 0.25
    smoothness_l: float | None = None
    strong_convexity_beta: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if not (self.zeta > 0 and self.gamma > 0 and self.big_c > 0):
            raise ValueError("zeta, gamma and big_c must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        extra = (self.smoothness_l, self.strong_convexity_beta, self.delta)
        if all(v is not None for v in extra):
            implied = gamma_from_smoothness(*extra)
            if abs(implied - self.gamma) > 1e-9 * abs(implied):
                raise ValueError(
                    f"gamma={self.gamma} inconsistent with 2L^2/(beta^2 delta)={implied}"
                )

    @property
    def log_inv_epsilon(self) -> float:
        return math.log(1.0 / self.epsilon)


def gamma_from_smoothness(smoothness_l: float, beta: float, delta: float) -> float:
    return 2.0 * smoothness_l**2 / (beta**2 * delta)


def local_iters(theta: float, zeta: float) -> float:
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    return zeta * math.log(1.0 / theta)


def theta_of(a: float, zeta: float) -> float:
    if a < 0:
        raise ValueError("a must be nonnegative")
    return math.exp(-a / zeta)


def edge_iters(mu: float, theta: float, gamma: float) -> float:
    if not 0 < mu <= 1:
        raise ValueError("mu must lie in (0, 1]")
    if not 0 <= theta < 1:
        raise ValueError("theta must lie in [0, 1)")
    return gamma * math.log(1.0 / mu) / (1.0 - theta)


def mu_of(b: float, theta: float, gamma: float) -> float:
    if b < 0:
        raise ValueError("b must be nonnegative")
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    return math.exp(-(b / gamma) * (1.0 - theta))


def progress(a, b, zeta: float, gamma: float):
    """Fraction of the remaining gap closed per cloud round, ``1 - mu``.

    Works elementwise on arrays; uses expm1 so tiny ``a``/``b`` keep precision.
    """
    y = -np.expm1(-np.asarray(a, dtype=float) / zeta)
    return -np.expm1(-(np.asarray(b, dtype=float) / gamma) * y)


def cloud_rounds(a: float, b: float, params: AccuracyParams, epsilon: float | None = None) -> float:
    """Cloud rounds ``R(a, b, eps) = C ln(1/eps) / (1 - exp(-(b/gamma)(1 - exp(-a/zeta))))``.

    ``epsilon`` overrides ``params.epsilon`` and may be 1 (zero rounds).
    """
    eps = params.epsilon if epsilon is None else epsilon
    if not 0 < eps <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    denom = float(progress(a, b, params.zeta, params.gamma))
    if denom < _MIN_DENOMINATOR:
        raise InsufficientWork("insufficient local/edge work: round count overflows")
    return params.big_c * math.log(1.0 / eps) / denom


def global_accuracy_gap(loss_now: float, loss_init: float, loss_opt: float) -> float:
    if not loss_init > loss_opt:
        raise ValueError("initial loss must exceed the optimal loss")
    return (loss_now - loss_opt) / (loss_init - loss_opt)
