"""Descent certificates for the closed loop.

Provides the merit function (reduced cost plus weighted output violations),
sampling-based estimators for the constants that enter the certified step
size, and the quadratic bound on transient output violations.

The estimators are deliberately simple: deterministic sampling of the input
set, worst pairwise difference quotients for Lipschitz constants, and the
largest observed constraint multiplier for the penalty weight, each inflated
by a safety factor.  The certificate is only as good as these estimates; the
harness flags trajectories that contradict them instead of aborting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .controller import LinearizedSetEmpty, controller_step
from .model import (
    Polyhedron,
    ProblemSpec,
    eval_plant,
    eval_plant_jacobian,
    reduced_cost,
    reduced_gradient,
    violation,
)

__all__ = [
    "SamplerSpec",
    "CertificateConstants",
    "sample_input_set",
    "lyapunov_value",
    "estimate_lipschitz_constants",
    "estimate_multiplier_bound",
    "estimate_constants",
    "certified_step_size",
    "transient_violation_bound",
]

Array = np.ndarray

# Safety inflation applied to sampled Lipschitz estimates and to the largest
# observed multiplier, plus floors that keep the certificate finite.
LIPSCHITZ_SAFETY = 1.1
LIPSCHITZ_FLOOR = 1e-12
MULTIPLIER_SAFETY = 2.0
MULTIPLIER_FLOOR = 1.0


@dataclass(frozen=True)
class SamplerSpec:
    """Deterministic sampling plan for the input set.

    ``kind`` is ``"grid"`` (``count`` points per dimension) or ``"random"``
    (``count`` points total, uniform over the bounding box with membership
    rejection, seeded).
    """

    kind: str = "grid"
    count: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("grid", "random"):
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.count < 2:
            raise ValueError("sampler needs at least two points")


def sample_input_set(input_set: Polyhedron, spec: SamplerSpec) -> Array:
    """Sample points of the input set according to ``spec`` (N x p array)."""
    lo, hi = input_set.bounding_box()
    p = input_set.dim
    if spec.kind == "grid":
        axes = [np.linspace(lo[j], hi[j], spec.count) for j in range(p)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        keep = np.all(input_set.A @ pts.T <= input_set.b[:, None] + 1e-12, axis=0)
        return pts[keep]
    rng = np.random.default_rng(spec.seed)
    out = []
    attempts = 0
    while len(out) < spec.count:
        x = lo + (hi - lo) * rng.uniform(size=p)
        attempts += 1
        if input_set.membership(x, tol=1e-12):
            out.append(x)
        if attempts > 1000 * spec.count:
            raise RuntimeError("rejection sampling failed; set too thin")
    return np.array(out)


@dataclass(frozen=True)
class CertificateConstants:
    """Constants entering the certified step size.

    ``grad_lipschitz`` bounds the variation of the reduced cost gradient,
    ``output_lipschitz`` the variation of each linearized output row,
    ``multiplier_bound`` the output multipliers along trajectories, and
    ``metric_floor`` the smallest metric eigenvalue.  ``step_size_bound``
    is derived from the other fields at construction:

        2 * metric_floor / (grad_lipschitz + multiplier_bound * sum(output_lipschitz))
    """

    grad_lipschitz: float
    output_lipschitz: Array
    multiplier_bound: float
    metric_floor: float
    step_size_bound: float = 0.0

    def __post_init__(self):
        ell = np.asarray(self.output_lipschitz, dtype=float).reshape(-1)
        if self.grad_lipschitz <= 0.0 or self.multiplier_bound <= 0.0:
            raise ValueError("certificate constants must be positive")
        if self.metric_floor <= 0.0:
            raise ValueError("metric floor must be positive")
        if np.any(ell < 0.0):
            raise ValueError("output Lipschitz constants must be nonnegative")
        ell = np.array(ell)
        ell.setflags(write=False)
        object.__setattr__(self, "output_lipschitz", ell)
        object.__setattr__(self, "step_size_bound", _step_bound(
            self.metric_floor, self.grad_lipschitz, self.multiplier_bound, ell))


def _step_bound(metric_floor: float, grad_lipschitz: float,
                multiplier_bound: float, ell: Array) -> float:
    return 2.0 * metric_floor / (grad_lipschitz + multiplier_bound * float(np.sum(ell)))


def certified_step_size(constants: CertificateConstants) -> float:
    """Largest step size covered by the descent certificate.

    Recomputed exactly from the stored fields, so it always equals
    ``constants.step_size_bound``.
    """
    return _step_bound(constants.metric_floor, constants.grad_lipschitz,
                       constants.multiplier_bound, constants.output_lipschitz)


def lyapunov_value(problem: ProblemSpec, penalty: float, u) -> float:
    """Merit value: reduced cost plus ``penalty`` times summed output violations.

    Coincides with the reduced cost on the feasible set; non-increasing along
    closed-loop trajectories whenever the step size is below the certified
    bound computed with the same penalty.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    y = eval_plant(problem.plant, u)
    return reduced_cost(problem, u) + penalty * float(np.sum(violation(problem.output_set, y)))


def _max_pair_slope(points: Array, values: Array) -> float:
    """Worst difference quotient ||v_i - v_j|| / ||x_i - x_j|| over all pairs."""
    dx = points[:, None, :] - points[None, :, :]
    dist = np.linalg.norm(dx, axis=2)
    dv = values[:, None, :] - values[None, :, :]
    num = np.linalg.norm(dv, axis=2)
    mask = dist > 1e-12
    if not np.any(mask):
        return 0.0
    return float(np.max(num[mask] / dist[mask]))


def estimate_lipschitz_constants(problem: ProblemSpec,
                       sampler: SamplerSpec | None = None) -> tuple[float, Array]:
    """Estimate the gradient and output-row Lipschitz constants by sampling.

    Returns ``(grad_lipschitz, output_lipschitz)`` where the first bounds the
    reduced cost gradient and the second holds one constant per output row
    (the map ``u -> C_i J(u)``).  Worst pairwise difference quotients over
    the sampled points, inflated by ``LIPSCHITZ_SAFETY``; deterministic for a
    given sampler.
    """
    sampler = sampler or SamplerSpec()
    pts = sample_input_set(problem.input_set, sampler)
    if pts.shape[0] < 2:
        raise ValueError("sampler produced fewer than two feasible points")
    grads = np.array([reduced_gradient(problem, u, eval_plant(problem.plant, u))
                      for u in pts])
    grad_lipschitz = LIPSCHITZ_SAFETY * _max_pair_slope(pts, grads)
    C = problem.output_set.A
    rows = np.array([C @ eval_plant_jacobian(problem.plant, u) for u in pts])
    ell = np.empty(problem.output_set.num_rows)
    for i in range(ell.size):
        ell[i] = max(LIPSCHITZ_SAFETY * _max_pair_slope(pts, rows[:, i, :]),
                     LIPSCHITZ_FLOOR)
    return float(max(grad_lipschitz, LIPSCHITZ_FLOOR)), ell


def estimate_multiplier_bound(problem: ProblemSpec, alpha: float,
                              sampler: SamplerSpec | None = None) -> float:
    """Bound the output multipliers of the projection subproblem over the
    input set.

    Runs the controller at every sampled input (with measured outputs) and
    doubles the largest observed output multiplier; points where the
    linearized set is empty are skipped with a warning.  Floored at
    ``MULTIPLIER_FLOOR`` so the certificate stays finite when no output
    constraint is ever active.
    """
    sampler = sampler or SamplerSpec()
    pts = sample_input_set(problem.input_set, sampler)
    mu_max = 0.0
    for u in pts:
        y = eval_plant(problem.plant, u)
        try:
            step = controller_step(problem, u, y, alpha)
        except LinearizedSetEmpty:
            warnings.warn(f"skipping sample {u.tolist()}: linearized set empty",
                          stacklevel=2)
            continue
        if step.mu.size:
            mu_max = max(mu_max, float(np.max(step.mu)))
    return max(MULTIPLIER_SAFETY * mu_max, MULTIPLIER_FLOOR)


def estimate_constants(problem: ProblemSpec, alpha: float,
                       sampler: SamplerSpec | None = None) -> CertificateConstants:
    """Estimate all certificate constants with one sampling plan.

    The multiplier bound depends on the step size used to linearize the
    output constraints, hence the ``alpha`` argument.
    """
    sampler = sampler or SamplerSpec()
    grad_lipschitz, ell = estimate_lipschitz_constants(problem, sampler)
    mult = estimate_multiplier_bound(problem, alpha, sampler)
    pts = sample_input_set(problem.input_set, sampler)
    floor = np.inf
    for u in pts:
        G = np.asarray(problem.metric.eval(u), dtype=float)
        floor = min(floor, float(np.linalg.eigvalsh(G)[0]))
    if not np.isfinite(floor) or floor <= 0.0:
        raise ValueError("metric must be positive definite on the input set")
    return CertificateConstants(grad_lipschitz=grad_lipschitz,
                                output_lipschitz=ell,
                                multiplier_bound=mult,
                                metric_floor=floor)


def transient_violation_bound(output_lipschitz, alpha: float, w) -> Array:
    """Per-row bound on the output violation committed by one step.

    A step of size ``alpha * w`` that satisfies the linearized output
    constraints can overshoot each true constraint by at most
    ``output_lipschitz_i / 2 * ||alpha * w||^2``.
    """
    ell = np.asarray(output_lipschitz, dtype=float).reshape(-1)
    d = float(alpha) * np.asarray(w, dtype=float).reshape(-1)
    return 0.5 * ell * float(d @ d)
