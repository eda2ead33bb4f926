"""Step-size policies along geodesics of the positive orthant.

Armijo backtracking halves a trial step until the sufficient-decrease
inequality

    f(exp_map(x, d, tau)) <= f(x) + sigma * tau * <rgrad, d>_x

holds.  With the steepest-descent direction ``d = -rgrad`` the right-hand
side reduces to ``f(x) - sigma * tau * ||rgrad||_x^2``; the generalized
form accepts arbitrary descent directions (used by the conjugate-gradient
solver).  Overflow-flagged trial steps are treated as rejected.

The module also provides the exact-line-search residual
``Delta(tau) = -<rgrad(x), rgrad(x(tau))>_x``, which is the derivative of
``tau -> f(x(tau))`` along the descent geodesic, and its first-order
model built from the Hessian correction term.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (
    GeometryKind,
    exp_map,
    m_hessian_apply,
    metric_inner,
    riemannian_grad,
)
from .objective import Objective


@dataclass(frozen=True)
class ArmijoParams:
    """Backtracking constants: sufficient-decrease slope ``sigma``,
    halving factor ``beta``, initial trial ``tau_bar``, failure floor
    ``tau_min``, and a hard cap on halvings."""

    sigma: float = 1e-4
    beta: float = 0.5
    tau_bar: float = 1.0
    tau_min: float = 1e-10
    max_halvings: int = 60

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must be in (0, 1), got {self.sigma}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.tau_bar <= 0.0:
            raise ValueError(f"tau_bar must be positive, got {self.tau_bar}")
        if not 0.0 < self.tau_min < self.tau_bar:
            raise ValueError(
                f"tau_min must be in (0, tau_bar), got {self.tau_min}"
            )
        if self.max_halvings < 1:
            raise ValueError("max_halvings must be a positive integer")


@dataclass(frozen=True)
class ConstantStep:
    """Policy that always returns the same step size."""

    tau: float

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError(f"constant step must be positive, got {self.tau}")


def constant_step(tau: float) -> ConstantStep:
    """Build a constant step-size policy (``tau > 0``)."""
    return ConstantStep(tau)


class StepStatus(Enum):
    ACCEPTED = "accepted"
    HIT_TAU_MIN = "hit_tau_min"
    CLAMPED = "clamped"


@dataclass(frozen=True)
class StepResult:
    """Outcome of one line search: accepted step size, halving count,
    the new iterate with its objective value, and a status flag."""

    tau: float
    halvings: int
    new_point: np.ndarray
    new_value: float
    status: StepStatus


def armijo_backtrack(
    geom: GeometryKind,
    obj: Objective,
    x: np.ndarray,
    direction: np.ndarray,
    params: ArmijoParams,
    value: float | None = None,
    grad: np.ndarray | None = None,
) -> StepResult:
    """Backtracking line search along the geodesic through ``x``.

    ``direction`` must not be an ascent direction in the chosen metric
    (``<rgrad, direction>_x <= 0``); a zero slope, which happens exactly
    at critical points, is accepted immediately with the base point
    returned unchanged in value.  ``value``/``grad`` may be passed to
    reuse an evaluation at ``x``.

    Returns ``HIT_TAU_MIN`` when the trial step fell below ``tau_min``
    (or the halving cap) without acceptance, and ``CLAMPED`` when every
    trial overflowed the exponential map.
    """
    if value is None or grad is None:
        value, grad = obj.value_and_grad(x)
    rgrad = riemannian_grad(geom, x, grad)
    slope = metric_inner(geom, x, rgrad, direction)
    if slope > 0.0:
        raise ValueError(f"not a descent direction: slope {slope} > 0")

    tau = params.tau_bar
    halvings = 0
    saw_usable_trial = False
    while halvings <= params.max_halvings and tau >= params.tau_min:
        trial = exp_map(x, direction, tau)
        if trial.ok:
            saw_usable_trial = True
            f_trial = obj.value(trial.point)
            if f_trial <= value + params.sigma * tau * slope:
                return StepResult(tau, halvings, trial.point, f_trial, StepStatus.ACCEPTED)
        tau *= params.beta
        halvings += 1
    status = StepStatus.HIT_TAU_MIN if saw_usable_trial else StepStatus.CLAMPED
    return StepResult(tau, halvings, np.asarray(x, dtype=float), float(value), status)


def exact_residual(x: np.ndarray, obj: Objective, tau: float) -> float:
    """Derivative of ``tau -> f(x(tau))`` along the steepest-descent geodesic.

    ``x(tau) = exp_map(x, -rgrad, tau)`` with the Fisher-Rao gradient;
    the returned value is ``-<rgrad(x), rgrad(x(tau))>_x``, which equals
    ``-||rgrad(x)||_x^2`` at ``tau = 0`` and vanishes at an exact
    line-search optimum.
    """
    x = np.asarray(x, dtype=float)
    _, grad = obj.value_and_grad(x)
    rgrad = x * grad
    x_tau = exp_map(x, -rgrad, tau).point
    _, grad_tau = obj.value_and_grad(x_tau)
    rgrad_tau = x_tau * grad_tau
    return -metric_inner(GeometryKind.POISSON_FISHER_RAO, x, rgrad, rgrad_tau)


def exact_residual_model(x: np.ndarray, obj: Objective, tau: float) -> float:
    """First-order model of :func:`exact_residual` in ``tau``.

    Returns ``-||rgrad||_x^2 + tau * <rgrad, H>_x`` where ``H`` is the
    second-order geodesic correction term; the difference from the exact
    residual is O(tau^2).  Requires a Hessian-vector product.
    """
    x = np.asarray(x, dtype=float)
    _, grad = obj.value_and_grad(x)
    rgrad = x * grad
    h_term = m_hessian_apply(x, grad, lambda v: obj.hess_vec(x, v))
    kind = GeometryKind.POISSON_FISHER_RAO
    return -metric_inner(kind, x, rgrad, rgrad) + tau * metric_inner(kind, x, rgrad, h_term)
