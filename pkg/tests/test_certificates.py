import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fbopt import (
    CertificateConstants,
    MetricField,
    ObjectiveSpec,
    PlantModel,
    Polyhedron,
    ProblemSpec,
    SamplerSpec,
    builtin_example,
    certified_step_size,
    estimate_constants,
    estimate_lipschitz_constants,
    estimate_multiplier_bound,
    eval_plant,
    get_problem,
    lyapunov_value,
    reduced_cost,
    sample_input_set,
    transient_violation_bound,
)

GRAD_CURVATURE = (5.0 + np.sqrt(5.0)) / 2.0  # top eigenvalue of the cost Hessian


def scalar_plant():
    return PlantModel(input_dim=1, output_dim=1,
                      eval=lambda u: np.array(u, dtype=float),
                      jacobian=lambda u: np.eye(1))


def test_lyapunov_feasible_point_ignores_penalty():
    prob = builtin_example()
    for penalty in (0.0, 1.0, 50.0):
        assert_allclose(lyapunov_value(prob, penalty, [0.0, 0.0]), 2.0)


def test_lyapunov_adds_scaled_violation():
    prob = builtin_example()
    u = np.array([0.7, 0.0])  # output lands at 1.2, violating the upper bound
    y = eval_plant(prob.plant, u)
    assert y[0] == 1.2
    expected = reduced_cost(prob, u) + 10.0 * (1.2 - 1.0)
    assert_allclose(lyapunov_value(prob, 10.0, u), expected, rtol=1e-12)
    assert_allclose(lyapunov_value(prob, 10.0, u), reduced_cost(prob, u) + 2.0,
                    rtol=1e-12)


def test_lyapunov_penalty_independent_on_feasible_samples():
    prob = builtin_example()
    rng = np.random.default_rng(13)
    count = 0
    while count < 25:
        u = rng.uniform(-1.0, 1.0, size=2)
        y = eval_plant(prob.plant, u)
        if not prob.output_set.membership(y):
            continue
        count += 1
        assert lyapunov_value(prob, 1.0, u) == lyapunov_value(prob, 100.0, u)


def test_gradient_curvature_estimate():
    prob = builtin_example()
    L, ell = estimate_lipschitz_constants(prob)
    raw = L / 1.1  # undo the safety inflation
    assert abs(raw - GRAD_CURVATURE) <= 0.05 * GRAD_CURVATURE
    assert L > raw  # stored value keeps the safety margin


def test_output_row_curvature_estimate():
    prob = builtin_example()
    _, ell = estimate_lipschitz_constants(prob)
    assert ell.shape == (2,)
    # the two output rows are mirrored, so their constants coincide
    assert_allclose(ell[0], ell[1], rtol=1e-12)
    raw = ell / 1.1
    assert np.all(np.abs(raw - 6.0) <= 0.6)
    assert np.all(ell >= 6.0)  # inflated estimate dominates the true constant


def test_affine_rows_hit_curvature_floor():
    prob = get_problem("quad1d")  # identity plant: output rows are constant
    _, ell = estimate_lipschitz_constants(prob)
    assert np.all(ell > 0.0)
    assert np.all(ell <= 1e-10)


def test_multiplier_bound_floor_when_outputs_inactive():
    prob = get_problem("quad1d")
    assert estimate_multiplier_bound(prob, 0.01) == 1.0


def test_multiplier_bound_known_single_active_sample():
    # y = u, cost (u - 2)^2, y <= 0.25: only the sample u = 1 activates the
    # output row, with multiplier (0.75 + 0.02) / 0.01 = 77 at alpha = 0.01
    plant = scalar_plant()
    obj = ObjectiveSpec(eval=lambda u, y: float((u[0] - 2.0) ** 2),
                        gradient=lambda u, y: np.array([2.0 * (u[0] - 2.0), 0.0]))
    prob = ProblemSpec(plant=plant, objective=obj,
                       input_set=Polyhedron.box([-1.0], [1.0]),
                       output_set=Polyhedron(A=[[1.0]], b=[0.25]),
                       metric=MetricField.identity(1))
    xi = estimate_multiplier_bound(prob, 0.01, SamplerSpec(kind="grid", count=2))
    assert_allclose(xi, 2.0 * 77.0, rtol=1e-9)


def test_multiplier_bound_scales_with_objective_and_metric():
    prob = builtin_example()
    doubled = dataclasses.replace(
        prob,
        objective=ObjectiveSpec(
            eval=lambda u, y: 2.0 * prob.objective.eval(u, y),
            gradient=lambda u, y: 2.0 * prob.objective.gradient(u, y)),
        metric=MetricField.constant(2.0 * np.eye(2)))
    xi = estimate_multiplier_bound(prob, 0.01)
    xi2 = estimate_multiplier_bound(doubled, 0.01)
    assert xi > 1.0  # well above the floor, so doubling is observable
    assert_allclose(xi2, 2.0 * xi, rtol=1e-9)


def test_certified_step_size_example():
    constants = CertificateConstants(grad_lipschitz=4.0,
                                     output_lipschitz=[6.0, 6.0],
                                     multiplier_bound=1.0,
                                     metric_floor=1.0)
    assert certified_step_size(constants) == 0.125
    assert constants.step_size_bound == 0.125


def test_certified_step_size_matches_stored_field():
    prob = builtin_example()
    constants = estimate_constants(prob, 0.01)
    assert certified_step_size(constants) == constants.step_size_bound
    assert 0.0 < constants.step_size_bound < 1.0
    assert constants.metric_floor == 1.0


def test_certified_step_size_decreases_with_multiplier_bound():
    base = dict(grad_lipschitz=4.0, output_lipschitz=[6.0, 6.0], metric_floor=1.0)
    bounds = [certified_step_size(CertificateConstants(multiplier_bound=m, **base))
              for m in (0.5, 1.0, 2.0, 8.0)]
    assert all(a > b for a, b in zip(bounds, bounds[1:]))


def test_constants_validation():
    good = dict(grad_lipschitz=1.0, output_lipschitz=[1.0],
                multiplier_bound=1.0, metric_floor=1.0)
    for key, bad in (("grad_lipschitz", 0.0), ("multiplier_bound", -1.0),
                     ("metric_floor", 0.0), ("output_lipschitz", [-1.0])):
        kwargs = dict(good)
        kwargs[key] = bad
        with pytest.raises(ValueError):
            CertificateConstants(**kwargs)


def test_estimate_constants_deterministic():
    prob = builtin_example()
    a = estimate_constants(prob, 0.01)
    b = estimate_constants(prob, 0.01)
    assert a.grad_lipschitz == b.grad_lipschitz
    assert np.array_equal(a.output_lipschitz, b.output_lipschitz)
    assert a.multiplier_bound == b.multiplier_bound
    assert a.step_size_bound == b.step_size_bound


def test_transient_bound_zero_direction():
    assert_allclose(transient_violation_bound([6.0, 6.0], 0.01, [0.0, 0.0]),
                    [0.0, 0.0])


def test_transient_bound_example():
    bound = transient_violation_bound([6.0, 6.0], 0.01, [-1.0, 4.0])
    assert_allclose(bound, [3.0 * 17e-4, 3.0 * 17e-4], rtol=1e-12)


def test_transient_bound_quadratic_in_alpha():
    w = np.array([-1.0, 4.0])
    b1 = transient_violation_bound([6.0], 0.02, w)
    b2 = transient_violation_bound([6.0], 0.01, w)
    assert_allclose(b1, 4.0 * b2, rtol=1e-12)


def test_grid_sampler_covers_box():
    box = Polyhedron.box([-1.0, -1.0], [1.0, 1.0])
    pts = sample_input_set(box, SamplerSpec(kind="grid", count=5))
    assert pts.shape == (25, 2)
    assert np.all(np.abs(pts) <= 1.0)


def test_grid_sampler_filters_infeasible():
    # simplex: the grid over the bounding box keeps only feasible nodes
    poly = Polyhedron(A=np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]),
                      b=np.array([1.0, 0.0, 0.0]))
    pts = sample_input_set(poly, SamplerSpec(kind="grid", count=5))
    assert pts.shape[0] < 25
    assert np.all(poly.A @ pts.T <= poly.b[:, None] + 1e-9)


def test_random_sampler_deterministic():
    box = Polyhedron.box([-1.0, -1.0], [1.0, 1.0])
    a = sample_input_set(box, SamplerSpec(kind="random", count=30, seed=3))
    b = sample_input_set(box, SamplerSpec(kind="random", count=30, seed=3))
    c = sample_input_set(box, SamplerSpec(kind="random", count=30, seed=4))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (30, 2)


def test_sampler_validation():
    with pytest.raises(ValueError):
        SamplerSpec(kind="sobol")
    with pytest.raises(ValueError):
        SamplerSpec(count=1)
