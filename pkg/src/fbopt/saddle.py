"""Projected primal-dual baseline on an augmented Lagrangian.

Handles the output constraints through explicit multipliers instead of a
projection subproblem: the input update is a projected gradient step on the
augmented Lagrangian, the multiplier update a projected (nonnegative) ascent
step on the constraint residuals.  Same measurement model as the controller
— only steady-state outputs and sensitivities are used — so the two schemes
are directly comparable on a problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Polyhedron, ProblemSpec, eval_plant, eval_plant_jacobian, \
    reduced_cost, reduced_gradient
from .qp import QpProblem, solve_qp

__all__ = [
    "SaddlePointState",
    "augmented_lagrangian",
    "augmented_lagrangian_gradients",
    "saddle_point_step",
    "saddle_residual",
    "project_polyhedron",
]

Array = np.ndarray


def project_polyhedron(set_: Polyhedron, x) -> Array:
    """Euclidean projection onto a polyhedron.

    Boxes are clamped coordinatewise; general polyhedra go through the
    quadratic program ``min ||z - x||^2 s.t. A z <= b``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != set_.dim:
        raise ValueError(f"point has size {x.size}, set has dimension {set_.dim}")
    if set_.is_box:
        lo, hi = set_.bounding_box()
        return np.minimum(np.maximum(x, lo), hi)
    qp = QpProblem(Q=2.0 * np.eye(set_.dim), c=-2.0 * x, M=set_.A, r=set_.b)
    return solve_qp(qp).w


@dataclass(frozen=True)
class SaddlePointState:
    """One iterate of the primal-dual scheme.

    ``u`` is the plant input, ``mu`` the output multipliers, ``alpha`` /
    ``gamma`` the primal / dual step sizes, and ``rho`` the quadratic
    penalty weight of the augmented Lagrangian.
    """

    u: Array
    mu: Array
    alpha: float
    gamma: float
    rho: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(mu))):
            raise ValueError("state contains non-finite entries")
        if np.any(mu < 0.0):
            raise ValueError("multipliers must be nonnegative")
        if self.alpha <= 0.0 or self.gamma <= 0.0:
            raise ValueError("step sizes must be positive")
        if self.rho < 0.0:
            raise ValueError("penalty weight must be nonnegative")
        u = np.array(u)
        mu = np.array(mu)
        u.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "mu", mu)


def _residual(problem: ProblemSpec, y: Array) -> Array:
    # C h(u) - d, signed
    return problem.output_set.A @ y - problem.output_set.b


def augmented_lagrangian(problem: ProblemSpec, u, mu, rho: float) -> float:
    """Augmented Lagrangian value at ``(u, mu)`` with measured output.

    Reduced cost plus ``mu`` times the signed output residuals plus a
    ``rho/2``-weighted squared violation penalty.  Equals the reduced cost on
    feasible points with zero duals.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    y = eval_plant(problem.plant, u)
    resid = _residual(problem, y)
    viol = np.maximum(resid, 0.0)
    return (reduced_cost(problem, u) + float(mu @ resid)
            + 0.5 * float(rho) * float(viol @ viol))


def augmented_lagrangian_gradients(problem: ProblemSpec, u, mu,
                                   rho: float) -> tuple[Array, Array]:
    """Gradients of the augmented Lagrangian in ``u`` and ``mu``.

    Returns ``(grad_u, grad_mu)`` with

        grad_u  = reduced gradient + (mu + rho * max(0, C h - d)) C J(u)
        grad_mu = C h(u) - d

    The penalty gradient uses the value 0 exactly on the constraint
    boundary (the squared positive part makes this the continuous choice).
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    y = eval_plant(problem.plant, u)
    J = eval_plant_jacobian(problem.plant, u)
    resid = _residual(problem, y)
    weights = mu + rho * np.maximum(resid, 0.0)
    grad_u = reduced_gradient(problem, u, y) + weights @ (problem.output_set.A @ J)
    return grad_u, resid


def saddle_point_step(problem: ProblemSpec, state: SaddlePointState) -> SaddlePointState:
    """One primal-dual update.

    Projected gradient descent on ``u`` (Euclidean projection onto the input
    set), projected gradient ascent on ``mu`` (clipped at zero).
    """
    grad_u, grad_mu = augmented_lagrangian_gradients(problem, state.u,
                                                     state.mu, state.rho)
    u_next = project_polyhedron(problem.input_set, state.u - state.alpha * grad_u)
    mu_next = np.maximum(state.mu + state.gamma * grad_mu, 0.0)
    return SaddlePointState(u=u_next, mu=mu_next, alpha=state.alpha,
                            gamma=state.gamma, rho=state.rho)


def saddle_residual(problem: ProblemSpec, state: SaddlePointState) -> float:
    """Fixed-point residual of the primal-dual map.

    Step-size-normalized displacement ``||u+ - u|| / alpha + ||mu+ - mu|| /
    gamma``; zero exactly at fixed points, which satisfy the first-order
    conditions of the constrained problem.
    """
    nxt = saddle_point_step(problem, state)
    return (float(np.linalg.norm(nxt.u - state.u)) / state.alpha
            + float(np.linalg.norm(nxt.mu - state.mu)) / state.gamma)
