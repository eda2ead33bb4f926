"""Iterative solvers on the positive orthant with shared tracing.

Four methods share one driver: multiplicative gradient descent along
Fisher-Rao geodesics (``eg``), the same geodesics driven by the
interior-point gradient (``ipgrgd``), the interior-point mirror-descent
quotient update (``ipemd``), and Polak-Ribiere-type geometric conjugate
gradients (``poicg``).  Every run records per-iteration objective values,
Riemannian gradient norms (measured in each method's own geometry),
accepted step sizes, halving counts, and cumulative operator
applications, and stops on the first of: gradient norm below tolerance,
accepted step below tolerance, or the iteration cap.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (
    ExpMapResult,
    GeometryKind,
    as_point,
    exp_map,
    metric_inner,
    multiplicative_update,
    riemannian_grad,
    transport_e,
)
from .linesearch import ArmijoParams, ConstantStep, StepStatus, armijo_backtrack
from .objective import Objective

logger = logging.getLogger(__name__)


class Method(Enum):
    EG = "eg"
    IP_G_RGD = "ipgrgd"
    IP_E_MD = "ipemd"
    POI_CG = "poicg"


class TerminalStatus(Enum):
    MAX_ITER = "max_iter"
    GRAD_TOL = "grad_tol"
    STEP_TOL = "step_tol"
    STEP_INFEASIBLE = "step_infeasible"


class StepInfeasible(RuntimeError):
    """A mirror-descent denominator hit zero or went negative."""

    def __init__(self, coordinate: int, denominator: float):
        self.coordinate = coordinate
        self.denominator = denominator
        super().__init__(
            f"update denominator {denominator} <= 0 at coordinate {coordinate}"
        )


@dataclass(frozen=True)
class SolverConfig:
    """Method selection, step policy, termination, and seed.

    ``linesearch`` may be :class:`ArmijoParams` or :class:`ConstantStep`;
    ``None`` selects Armijo defaults for the geodesic methods, while the
    mirror-descent method requires an explicit policy (its guaranteed
    constant step depends on the data, see
    :func:`relative_lipschitz_step`).
    """

    method: Method
    linesearch: ArmijoParams | ConstantStep | None = None
    max_iterations: int = 300
    grad_norm_tol: float = 1e-6
    step_size_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.grad_norm_tol < 0 or self.step_size_tol < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    f: float
    riem_grad_norm: float
    tau: float
    halvings: int
    matvec_count: int
    wall_nanos: int


# Column order of the CSV serialization.
TRACE_FIELDS = ("k", "f", "riem_grad_norm", "tau", "halvings", "matvec_count", "wall_nanos")
_INT_FIELDS = {"k", "halvings", "matvec_count", "wall_nanos"}


@dataclass
class RunTrace:
    """Ordered per-iteration records plus the final state of one run."""

    records: list[IterationRecord]
    terminal_status: TerminalStatus
    final_point: np.ndarray

    def to_csv(self, path_or_file, include_wall: bool = False) -> None:
        """Serialize records as RFC-4180 CSV with full-precision floats.

        Wall-clock times vary between otherwise identical runs, so the
        column is omitted unless ``include_wall`` is set; all remaining
        columns are bit-reproducible for a fixed config and seed.
        """
        fields = TRACE_FIELDS if include_wall else TRACE_FIELDS[:-1]
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        f = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            writer = csv.writer(f)
            writer.writerow(fields)
            for rec in self.records:
                writer.writerow(
                    [
                        getattr(rec, name) if name in _INT_FIELDS
                        else format(getattr(rec, name), ".17e")
                        for name in fields
                    ]
                )
        finally:
            if own:
                f.close()

    def summary_dict(self) -> dict:
        last = self.records[-1]
        return {
            "terminal_status": self.terminal_status.value,
            "iterations": last.k,
            "final_f": last.f,
            "final_grad_norm": last.riem_grad_norm,
            "total_matvecs": last.matvec_count,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary_dict())

    def objective_values(self) -> np.ndarray:
        return np.array([rec.f for rec in self.records])


def read_trace_csv(path) -> list[IterationRecord]:
    """Parse records written by :meth:`RunTrace.to_csv`.

    A missing wall-clock column reads back as zero.
    """
    records = []
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            records.append(
                IterationRecord(
                    k=int(row["k"]),
                    f=float(row["f"]),
                    riem_grad_norm=float(row["riem_grad_norm"]),
                    tau=float(row["tau"]),
                    halvings=int(row["halvings"]),
                    matvec_count=int(row["matvec_count"]),
                    wall_nanos=int(row.get("wall_nanos", 0) or 0),
                )
            )
    return records


def step_eg(x, euclid_grad, tau: float) -> ExpMapResult:
    """Multiplicative gradient step ``x * exp(-tau * g)``.

    Identical to the geodesic step with the Fisher-Rao Riemannian
    gradient as direction; overflow flags are propagated.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(euclid_grad, dtype=float)
    return multiplicative_update(x, -tau * g)


def step_ip_g_rgd(x, euclid_grad, tau: float) -> ExpMapResult:
    """Interior-point geodesic step ``x * exp(-tau * x * g)``."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(euclid_grad, dtype=float)
    return multiplicative_update(x, -tau * x * g)


def step_ip_e_md(x, euclid_grad, tau: float) -> np.ndarray:
    """Mirror-descent quotient update ``x / (1 + tau * x * g)``.

    This is the proximal step generated by the log barrier: it solves
    ``argmin_u tau * <g, u - x> + D(u, x)`` with the barrier-induced
    divergence, coordinate by coordinate.  Denominators must stay
    positive; a violating coordinate (large negative gradient times step)
    raises :class:`StepInfeasible`.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(euclid_grad, dtype=float)
    denom = 1.0 + tau * x * g
    if np.any(denom <= 0.0):
        bad = int(np.argmin(denom))
        raise StepInfeasible(bad, float(denom[bad]))
    return x / denom


def relative_lipschitz_step(b) -> float:
    """Guaranteed constant step ``1 / (2 * ||b||_1)`` for the quotient update."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(b <= 0.0):
        raise ValueError("b must be strictly positive")
    return float(1.0 / (2.0 * np.sum(b)))


def pr_beta(x_new, grad_new_riem, grad_old_norm_sq: float, transported_dir) -> float:
    """Polak-Ribiere-type conjugacy coefficient.

    ``<g_new, g_new - t>_{x_new} / ||g_old||^2`` where ``t`` is the
    previous search direction transported to the new point.  The caller
    applies the nonnegativity clamp ``max(beta, 0)``.
    """
    if grad_old_norm_sq <= 0.0:
        raise ValueError("previous gradient norm is zero; the solver should have stopped")
    u = np.asarray(grad_new_riem, dtype=float) - np.asarray(transported_dir, dtype=float)
    num = metric_inner(GeometryKind.POISSON_FISHER_RAO, x_new, grad_new_riem, u)
    return num / grad_old_norm_sq


def check_termination(record: IterationRecord, config: SolverConfig) -> TerminalStatus | None:
    """First satisfied criterion, in priority order grad > step > iterations.

    The step-size criterion only applies once a step has been taken
    (``k >= 1``); the initial record carries ``tau = 0``.
    """
    if record.riem_grad_norm < config.grad_norm_tol:
        return TerminalStatus.GRAD_TOL
    if record.k > 0 and record.tau < config.step_size_tol:
        return TerminalStatus.STEP_TOL
    if record.k >= config.max_iterations:
        return TerminalStatus.MAX_ITER
    return None


def default_x0(n: int, seed=0) -> np.ndarray:
    """Random interior starting point, i.i.d. uniform on (0.5, 1.5)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(0.5, 1.5, size=n)


def _geometry_of(method: Method) -> GeometryKind:
    if method in (Method.EG, Method.POI_CG):
        return GeometryKind.POISSON_FISHER_RAO
    return GeometryKind.INTERIOR_POINT


def _default_policy(method: Method, policy):
    if policy is not None:
        return policy
    if method is Method.IP_E_MD:
        raise ValueError(
            "the mirror-descent method needs an explicit step policy; "
            "use constant_step(relative_lipschitz_step(b)) for the guaranteed regime"
        )
    return ArmijoParams()


def _armijo_md(obj, x, grad, rgrad_norm_sq, params: ArmijoParams, value: float):
    """Backtracking over the quotient update (infeasible trials rejected)."""
    tau = params.tau_bar
    halvings = 0
    while halvings <= params.max_halvings and tau >= params.tau_min:
        try:
            trial = step_ip_e_md(x, grad, tau)
        except StepInfeasible:
            trial = None
        if trial is not None:
            f_trial = obj.value(trial)
            if f_trial <= value - params.sigma * tau * rgrad_norm_sq:
                return tau, halvings, trial, f_trial, True
        tau *= params.beta
        halvings += 1
    return tau, halvings, x, value, False


def solve(config: SolverConfig, obj: Objective, x0) -> RunTrace:
    """Run the configured method from ``x0`` until a criterion fires.

    Records one entry for the starting point (``k = 0``, ``tau = 0``) and
    one per completed iteration.  With Armijo policies the recorded
    objective values are nonincreasing; the conjugate-gradient method
    restarts to steepest descent whenever its direction fails the descent
    test, and an infeasible quotient update aborts with a partial trace.
    """
    x = as_point(x0)
    method = config.method
    kind = _geometry_of(method)
    policy = _default_policy(method, config.linesearch)
    t0 = time.perf_counter_ns()

    def record_at(k, f, gnorm, tau, halvings):
        return IterationRecord(
            k=k,
            f=f,
            riem_grad_norm=gnorm,
            tau=tau,
            halvings=halvings,
            matvec_count=obj.matvec_count(),
            wall_nanos=time.perf_counter_ns() - t0,
        )

    value, grad = obj.value_and_grad(x)
    rgrad = riemannian_grad(kind, x, grad)
    gnorm_sq = metric_inner(kind, x, rgrad, rgrad)
    gnorm = float(np.sqrt(max(gnorm_sq, 0.0)))

    records = [record_at(0, value, gnorm, 0.0, 0)]
    status = check_termination(records[0], config)
    v = -rgrad if method is Method.POI_CG else None

    k = 0
    while status is None:
        k += 1
        if method is Method.IP_E_MD:
            if isinstance(policy, ConstantStep):
                try:
                    x_new = step_ip_e_md(x, grad, policy.tau)
                except StepInfeasible as err:
                    logger.warning("aborting at iteration %d: %s", k, err)
                    status = TerminalStatus.STEP_INFEASIBLE
                    break
                tau, halvings = policy.tau, 0
            else:
                tau, halvings, x_new, _, accepted = _armijo_md(
                    obj, x, grad, gnorm_sq, policy, value
                )
                if not accepted:
                    records.append(record_at(k, value, gnorm, tau, halvings))
                    status = TerminalStatus.STEP_TOL
                    break
        else:
            if method is Method.POI_CG:
                slope = metric_inner(kind, x, rgrad, v)
                if slope >= 0.0 and gnorm > 0.0:
                    logger.info("restarting CG direction at iteration %d (slope %.3e)", k, slope)
                    v = -rgrad
                direction = v
            else:
                direction = -rgrad

            if isinstance(policy, ArmijoParams):
                step = armijo_backtrack(
                    kind, obj, x, direction, policy, value=value, grad=grad
                )
                if step.status is not StepStatus.ACCEPTED:
                    records.append(record_at(k, value, gnorm, step.tau, step.halvings))
                    status = TerminalStatus.STEP_TOL
                    break
                x_new, tau, halvings = step.new_point, step.tau, step.halvings
            else:
                result = exp_map(x, direction, policy.tau)
                if not result.ok:
                    logger.warning("constant step left the representable orthant at iteration %d", k)
                    status = TerminalStatus.STEP_INFEASIBLE
                    break
                x_new, tau, halvings = result.point, policy.tau, 0

        new_value, new_grad = obj.value_and_grad(x_new)
        new_rgrad = riemannian_grad(kind, x_new, new_grad)
        new_gnorm_sq = metric_inner(kind, x_new, new_rgrad, new_rgrad)
        new_gnorm = float(np.sqrt(max(new_gnorm_sq, 0.0)))

        if method is Method.POI_CG:
            transported = transport_e(x, x_new, v)
            beta_plus = 0.0
            if gnorm_sq > 0.0:
                beta_plus = max(pr_beta(x_new, new_rgrad, gnorm_sq, transported), 0.0)
            v = -new_rgrad + beta_plus * transported

        x, value, grad = x_new, new_value, new_grad
        rgrad, gnorm_sq, gnorm = new_rgrad, new_gnorm_sq, new_gnorm
        records.append(record_at(k, value, gnorm, tau, halvings))
        status = check_termination(records[-1], config)

    return RunTrace(records=records, terminal_status=status, final_point=x)
