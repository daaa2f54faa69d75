"""One-step feedback law for driving a plant to a constrained optimum.

Each step measures the plant output, projects the metric-scaled descent
direction of the reduced cost onto a linearization of the feasible set, and
advances the input by ``alpha`` times that direction.  Inputs remain inside
their polyhedron at every step; outputs satisfy their constraints to first
order, with the quadratic remainder bounded by the certificates module.

The projection subproblem is assembled so that its Lagrange multipliers are
exactly the stationarity multipliers of the underlying design problem: at a
fixed point of the update, ``(u, nu, mu)`` is a KKT triple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    DEFAULT_ACTIVE_TOL,
    ProblemSpec,
    eval_plant,
    eval_plant_jacobian,
    reduced_gradient,
)
from .qp import Infeasible, QpProblem, solve_qp

__all__ = [
    "LinearizedSetEmpty",
    "ControllerStep",
    "LicqReport",
    "assemble_projection_qp",
    "controller_step",
    "feedback_step",
    "stationarity_residual",
    "check_licq",
    "kkt_point_residual",
]

Array = np.ndarray


class LinearizedSetEmpty(RuntimeError):
    """The linearized constraint set at the current point has no solution.

    This indicates the problem data violates the standing regularity
    assumption at this input; it is an error, not a recoverable state."""


@dataclass(frozen=True)
class ControllerStep:
    """Result of one controller evaluation at input ``u`` with measured ``y``.

    ``w`` is the projected direction; ``nu`` and ``mu`` are the multipliers
    of the input rows and of the linearized output rows, in the row order of
    the respective constraint sets.  ``u_next`` equals ``u + alpha * w``
    exactly, and ``sigma_norm_G`` is the metric norm of ``w`` used as the
    stationarity residual.
    """

    u: Array
    y: Array
    alpha: float
    w: Array
    nu: Array
    mu: Array
    u_next: Array
    sigma_norm_G: float


@dataclass(frozen=True)
class LicqReport:
    """Row-rank summary of the active constraint gradients at a step."""

    satisfied: bool
    num_active: int
    rank: int
    active_rows: tuple[int, ...]
    singular_values: Array


def assemble_projection_qp(problem: ProblemSpec, u, y, alpha: float) -> QpProblem:
    """Build the per-step projection QP at ``(u, y)``.

    The quadratic term is ``alpha * G(u)``, the linear term ``alpha`` times
    the reduced cost gradient, and the rows stack the input constraints
    above the linearized output constraints:

        alpha * A w        <= b - A u
        alpha * C J(u) w   <= d - C y

    The first ``input_set.num_rows`` rows always belong to the input set,
    which is how multipliers are split back into ``(nu, mu)``.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    g = reduced_gradient(problem, u, y)
    G = problem.metric.eval(u)
    J = eval_plant_jacobian(problem.plant, u)
    A, b = problem.input_set.A, problem.input_set.b
    C, d = problem.output_set.A, problem.output_set.b
    M = np.vstack([alpha * A, alpha * (C @ J)])
    r = np.concatenate([b - A @ u, d - C @ y])
    return QpProblem(Q=alpha * np.asarray(G, dtype=float), c=alpha * g, M=M, r=r)


def controller_step(problem: ProblemSpec, u, y, alpha: float) -> ControllerStep:
    """Compute the projected direction and the next input from a measurement.

    Raises :class:`LinearizedSetEmpty` if the linearized constraints admit
    no direction at all.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    qp = assemble_projection_qp(problem, u, y, alpha)
    try:
        sol = solve_qp(qp)
    except Infeasible as exc:
        raise LinearizedSetEmpty(
            f"linearized constraint set is empty at u={u.tolist()}") from exc
    q = problem.input_set.num_rows
    w = sol.w
    G = np.asarray(problem.metric.eval(u), dtype=float)
    sigma_norm = float(np.sqrt(max(w @ G @ w, 0.0)))
    return ControllerStep(u=u, y=y, alpha=float(alpha), w=w,
                          nu=sol.multipliers[:q], mu=sol.multipliers[q:],
                          u_next=u + alpha * w, sigma_norm_G=sigma_norm)


def feedback_step(problem: ProblemSpec, u, alpha: float) -> ControllerStep:
    """Measure the plant at ``u`` and advance one controller step.

    ``u`` must lie in the input set (outputs may be violated during
    transients; inputs may not)."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if not problem.input_set.membership(u, tol=DEFAULT_ACTIVE_TOL):
        raise ValueError("current input lies outside the input set")
    y = eval_plant(problem.plant, u)
    return controller_step(problem, u, y, alpha)


def stationarity_residual(step: ControllerStep) -> float:
    """Metric norm of the projected direction; zero exactly at fixed points."""
    return step.sigma_norm_G


def check_licq(problem: ProblemSpec, u, y, alpha: float, w,
               tol: float = 1e-9) -> LicqReport:
    """Check linear independence of the active constraint rows at ``w``.

    Activity is measured on the assembled projection rows at the absolute
    tolerance ``DEFAULT_ACTIVE_TOL``; the rank of the corresponding unscaled
    rows ``[A; C J(u)]`` is then computed with singular-value threshold
    ``tol`` times the largest singular value.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    J = eval_plant_jacobian(problem.plant, u)
    A, b = problem.input_set.A, problem.input_set.b
    C, d = problem.output_set.A, problem.output_set.b
    rows = np.vstack([A, C @ J])
    resid = alpha * (rows @ w) - np.concatenate([b - A @ u, d - C @ y])
    active = np.flatnonzero(np.abs(resid) <= DEFAULT_ACTIVE_TOL)
    if active.size == 0:
        return LicqReport(True, 0, 0, (), np.zeros(0))
    svals = np.linalg.svd(rows[active], compute_uv=False)
    rank = int(np.sum(svals > tol * svals[0])) if svals.size else 0
    return LicqReport(satisfied=rank == active.size, num_active=int(active.size),
                      rank=rank, active_rows=tuple(int(i) for i in active),
                      singular_values=svals)


def kkt_point_residual(problem: ProblemSpec, u, nu, mu) -> float:
    """First-order optimality defect of ``(u, nu, mu)`` for the design problem.

    Maximum over the stationarity defect of the reduced gradient, the input
    and output feasibility defects, dual negativity, and complementarity
    products.  At a converged controller fixed point this inherits the size
    of the final projected direction.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    nu = np.asarray(nu, dtype=float).reshape(-1)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    y = eval_plant(problem.plant, u)
    g = reduced_gradient(problem, u, y)
    J = eval_plant_jacobian(problem.plant, u)
    A, b = problem.input_set.A, problem.input_set.b
    C, d = problem.output_set.A, problem.output_set.b
    stat = g + nu @ A + mu @ (C @ J)
    in_resid = A @ u - b
    out_resid = C @ y - d
    pieces = [
        float(np.linalg.norm(stat, ord=np.inf)) if stat.size else 0.0,
        float(np.max(in_resid, initial=0.0)),
        float(np.max(out_resid, initial=0.0)),
        float(max(np.max(-nu, initial=0.0), np.max(-mu, initial=0.0))),
        float(np.max(np.abs(nu * in_resid), initial=0.0)),
        float(np.max(np.abs(mu * out_resid), initial=0.0)),
    ]
    return max(pieces)
