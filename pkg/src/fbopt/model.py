"""Problem data for steady-state feedback optimization.

The central object is :class:`ProblemSpec`.  It bundles a static plant map
(the steady-state response of the physical system), a cost on input/output
pairs, polyhedral constraint sets for inputs and outputs, and a metric
field on the input space.  All containers are frozen dataclasses holding
read-only arrays; instances are safe to share across threads.

Plants and objectives are ordinary callables supplied by the user (or by
the builtin registry in :mod:`fbopt.problems`); nothing here parses
expressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "DEFAULT_ACTIVE_TOL",
    "PlantModel",
    "Polyhedron",
    "ObjectiveSpec",
    "MetricField",
    "ProblemSpec",
    "eval_plant",
    "eval_plant_jacobian",
    "reduced_gradient",
    "reduced_cost",
    "active_set",
    "violation",
]

# Activity of a constraint row is decided at this absolute tolerance.
DEFAULT_ACTIVE_TOL = 1e-9

Array = np.ndarray


def _vector(x, dim: int, name: str) -> Array:
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size != dim:
        raise ValueError(f"{name} must have length {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def _read_only(a: Array) -> Array:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PlantModel:
    """Static input-to-output map of the plant together with its sensitivity.

    ``eval`` maps an input vector of length ``input_dim`` to the measured
    steady-state output of length ``output_dim``; ``jacobian`` returns the
    (output_dim, input_dim) sensitivity matrix at the same point.
    """

    input_dim: int
    output_dim: int
    eval: Callable[[Array], Array]
    jacobian: Callable[[Array], Array]

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("plant dimensions must be positive")


@dataclass(frozen=True)
class Polyhedron:
    """Finite intersection of halfspaces ``{x : A x <= b}``.

    Boxes are stored in the same row form; :meth:`box` builds the
    2p-row encoding (upper bounds first, then lower bounds) and remembers
    the bounds so that callers can use cheap clamping and sampling paths.
    """

    A: Array
    b: Array
    lower: Array | None = field(default=None)
    upper: Array | None = field(default=None)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise ValueError(f"row mismatch: A has {A.shape[0]} rows, b has {b.size}")
        if A.shape[0] == 0:
            raise ValueError("a polyhedron needs at least one row")
        zero = ~np.any(A != 0.0, axis=1)
        if np.any(zero):
            raise ValueError(f"rows with zero norm are not allowed (rows {np.flatnonzero(zero)})")
        object.__setattr__(self, "A", _read_only(A))
        object.__setattr__(self, "b", _read_only(b))
        if self.lower is not None:
            object.__setattr__(self, "lower", _read_only(self.lower))
            object.__setattr__(self, "upper", _read_only(self.upper))

    @classmethod
    def box(cls, lower, upper) -> "Polyhedron":
        lo = np.asarray(lower, dtype=float).reshape(-1)
        hi = np.asarray(upper, dtype=float).reshape(-1)
        if lo.size != hi.size:
            raise ValueError("lower and upper must have the same length")
        if np.any(lo > hi):
            raise ValueError("box must satisfy lower <= upper")
        p = lo.size
        eye = np.eye(p)
        return cls(A=np.vstack([eye, -eye]), b=np.concatenate([hi, -lo]), lower=lo, upper=hi)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def is_box(self) -> bool:
        return self.lower is not None

    def membership(self, x, tol: float = 0.0) -> bool:
        x = _vector(x, self.dim, "x")
        return bool(np.all(self.A @ x <= self.b + tol))

    def bounding_box(self) -> tuple[Array, Array]:
        """Componentwise bounds of the set.  Exact for boxes, solved by
        linear programs otherwise; raises if the set is unbounded."""
        if self.is_box:
            return self.lower, self.upper
        from scipy.optimize import linprog

        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = 1.0
            for sign, dest in ((1.0, lo), (-1.0, hi)):
                res = linprog(sign * e, A_ub=self.A, b_ub=self.b,
                              bounds=[(None, None)] * self.dim, method="highs")
                if res.status != 0:
                    raise ValueError("polyhedron must be bounded and nonempty")
                dest[j] = sign * res.fun
        return lo, hi


@dataclass(frozen=True)
class ObjectiveSpec:
    """Cost on input/output pairs.

    ``eval(u, y)`` returns a scalar, ``gradient(u, y)`` the row vector of
    partial derivatives with respect to ``(u, y)`` (length p + n).
    """

    eval: Callable[[Array, Array], float]
    gradient: Callable[[Array, Array], Array]


@dataclass(frozen=True)
class MetricField:
    """Symmetric positive definite weighting of the input space, as a
    function of the current input."""

    eval: Callable[[Array], Array]

    @classmethod
    def identity(cls, dim: int) -> "MetricField":
        eye = np.eye(dim)
        return cls(eval=lambda u, _eye=eye: _eye.copy())

    @classmethod
    def constant(cls, matrix) -> "MetricField":
        G = _read_only(np.atleast_2d(np.asarray(matrix, dtype=float)))
        return cls(eval=lambda u, _G=G: np.array(_G))


@dataclass(frozen=True)
class ProblemSpec:
    """A complete closed-loop design problem.

    Ties together plant, objective, the input set ``{u : A u <= b}``, the
    output set ``{y : C y <= d}`` and the input-space metric.  Dimensions
    are checked once at construction.
    """

    plant: PlantModel
    objective: ObjectiveSpec
    input_set: Polyhedron
    output_set: Polyhedron
    metric: MetricField
    name: str = ""

    def __post_init__(self):
        if self.input_set.dim != self.plant.input_dim:
            raise ValueError("input set dimension does not match the plant")
        if self.output_set.dim != self.plant.output_dim:
            raise ValueError("output set dimension does not match the plant")

    @property
    def input_dim(self) -> int:
        return self.plant.input_dim

    @property
    def output_dim(self) -> int:
        return self.plant.output_dim


def eval_plant(plant: PlantModel, u) -> Array:
    """Evaluate the steady-state output for input ``u``."""
    u = _vector(u, plant.input_dim, "u")
    y = np.asarray(plant.eval(u), dtype=float).reshape(-1)
    if y.size != plant.output_dim:
        raise ValueError(f"plant returned {y.size} outputs, expected {plant.output_dim}")
    return y


def eval_plant_jacobian(plant: PlantModel, u) -> Array:
    """Evaluate the steady-state sensitivity matrix at ``u``."""
    u = _vector(u, plant.input_dim, "u")
    J = np.atleast_2d(np.asarray(plant.jacobian(u), dtype=float))
    if J.shape != (plant.output_dim, plant.input_dim):
        raise ValueError(
            f"jacobian shape {J.shape} does not match ({plant.output_dim}, {plant.input_dim})"
        )
    return J


def reduced_gradient(problem: ProblemSpec, u, y) -> Array:
    """Gradient of the cost along the plant manifold, as a function of the
    input alone.

    The caller supplies the measured output ``y``; the chain rule folds the
    output sensitivity into the input coordinates:
    ``grad_u cost + grad_y cost @ jacobian``.
    """
    u = _vector(u, problem.input_dim, "u")
    y = _vector(y, problem.output_dim, "y")
    p = problem.input_dim
    g = np.asarray(problem.objective.gradient(u, y), dtype=float).reshape(-1)
    if g.size != p + problem.output_dim:
        raise ValueError(f"objective gradient must have length {p + problem.output_dim}")
    J = eval_plant_jacobian(problem.plant, u)
    return g[:p] + g[p:] @ J


def reduced_cost(problem: ProblemSpec, u) -> float:
    """Cost evaluated on the plant manifold: ``cost(u, plant(u))``."""
    u = _vector(u, problem.input_dim, "u")
    y = eval_plant(problem.plant, u)
    return float(problem.objective.eval(u, y))


def active_set(set_: Polyhedron, x, tol: float = DEFAULT_ACTIVE_TOL) -> Array:
    """Indices of rows at (or beyond) their bound at ``x``.

    For feasible ``x`` this is the usual active set ``|A_i x - b_i| <= tol``;
    for infeasible points violated rows are included as well, and the caller
    decides what to do with them.
    """
    x = _vector(x, set_.dim, "x")
    resid = set_.A @ x - set_.b
    return np.flatnonzero(resid >= -tol)


def violation(set_: Polyhedron, x) -> Array:
    """Componentwise constraint violations ``max(0, A x - b)``."""
    x = _vector(x, set_.dim, "x")
    return np.maximum(set_.A @ x - set_.b, 0.0)
