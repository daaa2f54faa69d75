"""Tangent cones of the linearized feasible set and the small-step limit.

At a feasible point the projection subproblem's feasible set shrinks, as the
step size goes to zero, onto the cone of directions that keep the active
constraints satisfied to first order.  This module builds that cone, projects
onto it in the problem metric, and measures how fast the finite-step update
direction approaches the cone projection of the scaled negative gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DEFAULT_ACTIVE_TOL, ProblemSpec, eval_plant, \
    eval_plant_jacobian, reduced_gradient
from .qp import QpProblem, solve_qp

__all__ = [
    "NotFeasible",
    "TangentCone",
    "tangent_cone",
    "project_tangent_cone",
    "finite_step_projection_qp",
    "limit_consistency",
]

Array = np.ndarray


class NotFeasible(ValueError):
    """The point does not lie in the feasible set, so no tangent cone exists."""


def _constraint_rows(problem: ProblemSpec, u: Array) -> tuple[Array, Array]:
    """Stacked constraint rows and slacks at ``u``.

    Rows are ``[A; C J(u)]``, slacks ``[b - A u; d - C h(u)]``; the
    linearized feasible set at ``u`` with step size ``alpha`` is
    ``{w : rows @ w <= slack / alpha}``.
    """
    y = eval_plant(problem.plant, u)
    J = eval_plant_jacobian(problem.plant, u)
    rows = np.vstack([problem.input_set.A, problem.output_set.A @ J])
    slack = np.concatenate([problem.input_set.b - problem.input_set.A @ u,
                            problem.output_set.b - problem.output_set.A @ y])
    return rows, slack


@dataclass(frozen=True)
class TangentCone:
    """Cone of first-order feasible directions at a point.

    ``rows`` holds the active constraint rows (possibly zero of them, in
    which case the cone is the whole space); ``base_point`` the point the
    cone was taken at.
    """

    rows: Array
    base_point: Array

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        base = np.asarray(self.base_point, dtype=float).reshape(-1)
        if rows.size == 0:
            rows = rows.reshape(0, base.size)
        if rows.shape[1] != base.size:
            raise ValueError("row width does not match the base point")
        rows = np.array(rows)
        base = np.array(base)
        rows.setflags(write=False)
        base.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "base_point", base)

    @property
    def dim(self) -> int:
        return self.base_point.size

    def membership(self, w, tol: float = 0.0) -> bool:
        """Whether ``w`` lies in the cone (active rows nonpositive up to tol)."""
        w = np.asarray(w, dtype=float).reshape(-1)
        if self.rows.shape[0] == 0:
            return True
        return bool(np.all(self.rows @ w <= tol))


def tangent_cone(problem: ProblemSpec, u, tol: float = DEFAULT_ACTIVE_TOL) -> TangentCone:
    """Tangent cone of the feasible set at ``u``.

    ``u`` must satisfy the input constraints and its measured output the
    output constraints (within ``tol``); raises :class:`NotFeasible`
    otherwise.  The cone consists of directions ``w`` with ``row @ w <= 0``
    for every constraint row active at ``u``.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    rows, slack = _constraint_rows(problem, u)
    if np.any(slack < -tol):
        raise NotFeasible(f"point violates constraints by {float(-slack.min()):.3e}")
    active = slack <= tol
    return TangentCone(rows=rows[active], base_point=u)


def _projection_qp(G: Array, f: Array, rows: Array, rhs: Array) -> QpProblem:
    # min 1/2 (w-f)' G (w-f) s.t. rows w <= rhs, dropping the constant term
    return QpProblem(Q=G, c=-(G @ f), M=rows, r=rhs)


def project_tangent_cone(cone: TangentCone, G, f) -> Array:
    """Projection of ``f`` onto the cone in the metric ``G``.

    Solves ``min 1/2 (w - f)' G (w - f)`` over the cone.
    """
    G = np.asarray(G, dtype=float)
    f = np.asarray(f, dtype=float).reshape(-1)
    rows = cone.rows
    rhs = np.zeros(rows.shape[0])
    return solve_qp(_projection_qp(G, f, rows, rhs)).w


def finite_step_projection_qp(problem: ProblemSpec, u, alpha: float,
                              tol: float = DEFAULT_ACTIVE_TOL,
                              zero_active: bool = False) -> QpProblem:
    """Projection of the scaled negative gradient onto the step-``alpha``
    feasible set, as a quadratic program in the update direction.

    The target is ``-G(u)^{-1} grad`` and the feasible set
    ``{w : rows w <= slack / alpha}``.  With ``zero_active`` the right-hand
    side of the rows active at ``u`` is replaced by exactly zero — useful
    for comparing against the tangent cone without the ``slack / alpha``
    roundoff.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    if alpha <= 0.0:
        raise ValueError("step size must be positive")
    rows, slack = _constraint_rows(problem, u)
    if np.any(slack < -tol):
        raise NotFeasible(f"point violates constraints by {float(-slack.min()):.3e}")
    y = eval_plant(problem.plant, u)
    G = np.asarray(problem.metric.eval(u), dtype=float)
    grad = reduced_gradient(problem, u, y)
    f = -np.linalg.solve(G, grad)
    rhs = slack / alpha
    if zero_active:
        rhs = np.where(slack <= tol, 0.0, rhs)
    return _projection_qp(G, f, rows, rhs)


def limit_consistency(problem: ProblemSpec, u,
                      alphas) -> list[tuple[float, float]]:
    """Distance from the finite-step update direction to its small-step limit.

    For each step size the update direction is the metric projection of
    ``-G(u)^{-1} grad`` onto the step-scaled feasible set; the limit is the
    projection onto the tangent cone at ``u``.  Returns ``(alpha,
    deviation)`` pairs with the Euclidean distance between the two.  The
    step-scaled sets shrink onto the cone as ``alpha`` decreases, so over a
    decreasing ladder the deviations are nonincreasing (and exactly zero
    whenever no constraint is ever hit).

    ``alphas`` must be positive and strictly decreasing.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("need at least one step size")
    if any(a <= 0.0 for a in alphas):
        raise ValueError("step sizes must be positive")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("step sizes must be strictly decreasing")
    cone = tangent_cone(problem, u)
    y = eval_plant(problem.plant, u)
    G = np.asarray(problem.metric.eval(u), dtype=float)
    grad = reduced_gradient(problem, u, y)
    f = -np.linalg.solve(G, grad)
    w_limit = solve_qp(_projection_qp(G, f, cone.rows,
                                      np.zeros(cone.rows.shape[0]))).w
    rows, slack = _constraint_rows(problem, u)
    out = []
    for a in alphas:
        w = solve_qp(_projection_qp(G, f, rows, slack / a)).w
        out.append((a, float(np.linalg.norm(w - w_limit))))
    return out
