import numpy as np
import pytest
from numpy.testing import assert_allclose

from fbopt import (
    MetricField,
    NotFeasible,
    ObjectiveSpec,
    PlantModel,
    Polyhedron,
    ProblemSpec,
    TangentCone,
    builtin_example,
    finite_step_projection_qp,
    limit_consistency,
    project_tangent_cone,
    solve_qp,
    tangent_cone,
)

OPTIMUM = np.array([-0.5, 1.0])


def wide_output_problem():
    # sum plant with a roomy output set: only input constraints can activate
    plant = PlantModel(input_dim=2, output_dim=1,
                       eval=lambda u: np.array([u[0] + u[1]]),
                       jacobian=lambda u: np.array([[1.0, 1.0]]))
    obj = ObjectiveSpec(eval=lambda u, y: float(u @ u),
                        gradient=lambda u, y: np.array([2 * u[0], 2 * u[1], 0.0]))
    return ProblemSpec(plant=plant, objective=obj,
                       input_set=Polyhedron.box([-1.0, -1.0], [1.0, 1.0]),
                       output_set=Polyhedron.box([-10.0], [10.0]),
                       metric=MetricField.identity(2))


def test_interior_point_cone_is_whole_space():
    prob = builtin_example()
    cone = tangent_cone(prob, [0.0, 0.0])
    assert cone.rows.shape == (0, 2)
    assert cone.membership([100.0, -7.0])


def test_output_face_single_row():
    prob = builtin_example()
    u = np.array([0.329, -0.9])  # output exactly on its upper bound
    cone = tangent_cone(prob, u)
    assert cone.rows.shape == (1, 2)
    assert_allclose(cone.rows[0], [1.0, 3 * 0.81 - 1.0])  # C_1 times jacobian


def test_optimum_has_two_active_rows():
    prob = builtin_example()
    cone = tangent_cone(prob, OPTIMUM)
    # input upper bound on u2 and the lower output row
    assert_allclose(cone.rows, [[0.0, 1.0], [-1.0, -2.0]])


def test_corner_without_output_activity():
    prob = wide_output_problem()
    cone = tangent_cone(prob, [1.0, 1.0])
    assert_allclose(cone.rows, [[1.0, 0.0], [0.0, 1.0]])
    assert cone.membership([-1.0, -2.0])
    assert not cone.membership([1.0, 0.0])


def test_infeasible_points_rejected():
    prob = builtin_example()
    with pytest.raises(NotFeasible):
        tangent_cone(prob, [1.0, 1.0])  # output 1.5 above the bound
    with pytest.raises(NotFeasible):
        tangent_cone(prob, [1.5, 0.0])  # outside the input box
    with pytest.raises(NotFeasible):
        finite_step_projection_qp(prob, [1.0, 1.0], 0.01)


def test_project_halfspace_cone():
    cone = TangentCone(rows=np.array([[1.0, 0.0]]), base_point=np.zeros(2))
    assert_allclose(project_tangent_cone(cone, np.eye(2), [1.0, 1.0]),
                    [0.0, 1.0], atol=1e-12)


def test_project_feasible_direction_unchanged():
    cone = TangentCone(rows=np.array([[1.0, 0.0]]), base_point=np.zeros(2))
    assert_allclose(project_tangent_cone(cone, np.eye(2), [-1.0, 0.3]),
                    [-1.0, 0.3], atol=1e-12)


def test_project_whole_space_identity():
    cone = TangentCone(rows=np.zeros((0, 2)), base_point=np.zeros(2))
    f = np.array([2.5, -1.5])
    assert_allclose(project_tangent_cone(cone, np.eye(2), f), f, atol=1e-14)


def test_projection_positively_homogeneous():
    prob = builtin_example()
    cone = tangent_cone(prob, OPTIMUM)
    rng = np.random.default_rng(6)
    for _ in range(15):
        f = rng.normal(size=2)
        base = project_tangent_cone(cone, np.eye(2), f)
        for t in (0.5, 2.0, 10.0):
            scaled = project_tangent_cone(cone, np.eye(2), t * f)
            assert np.linalg.norm(scaled - t * base) <= 1e-9 * max(1.0, t)


def test_projection_lands_in_cone():
    prob = builtin_example()
    cone = tangent_cone(prob, OPTIMUM)
    rng = np.random.default_rng(14)
    for _ in range(20):
        f = rng.normal(size=2) * 3.0
        w = project_tangent_cone(cone, np.eye(2), f)
        assert cone.membership(w, tol=1e-9)
        assert cone.membership(5.0 * w, tol=1e-8)  # cones are scale-closed


def test_zeroed_active_rows_match_cone_data():
    prob = builtin_example()
    qp = finite_step_projection_qp(prob, OPTIMUM, 0.01, zero_active=True)
    cone = tangent_cone(prob, OPTIMUM)
    active = np.flatnonzero(qp.r == 0.0)
    assert list(active) == [1, 5]  # u2 upper bound, lower output row
    assert np.array_equal(qp.M[active], cone.rows)


def test_zeroed_finite_step_reproduces_cone_projection_bitwise():
    prob = builtin_example()
    for u in (OPTIMUM, np.array([0.329, -0.9])):
        qp = finite_step_projection_qp(prob, u, 0.01, zero_active=True)
        w_fin = solve_qp(qp).w
        cone = tangent_cone(prob, u)
        G = prob.metric.eval(u)
        y = prob.plant.eval(u)
        grad = prob.objective.gradient(u, y)[:2] + \
            prob.objective.gradient(u, y)[2:] @ prob.plant.jacobian(u)
        w_cone = project_tangent_cone(cone, G, -np.linalg.solve(G, grad))
        assert np.array_equal(w_fin, w_cone)


def test_finite_step_rhs_scales_inversely_with_alpha():
    prob = builtin_example()
    qp1 = finite_step_projection_qp(prob, [0.0, 0.0], 0.01)
    qp2 = finite_step_projection_qp(prob, [0.0, 0.0], 0.005)
    assert_allclose(qp2.r, 2.0 * qp1.r, rtol=1e-12)
    assert np.array_equal(qp1.M, qp2.M)


def test_finite_step_rejects_bad_alpha():
    prob = builtin_example()
    with pytest.raises(ValueError):
        finite_step_projection_qp(prob, [0.0, 0.0], 0.0)


def test_limit_deviation_zero_at_interior_point():
    prob = builtin_example()
    ladder = [10.0 ** (-k) for k in range(1, 7)]
    for alpha, dev in limit_consistency(prob, [0.0, 0.0], ladder):
        assert dev == 0.0


def test_limit_deviation_nonincreasing_and_vanishing():
    prob = builtin_example()
    ladder = [10.0 ** (-k) for k in range(1, 7)]
    for u in (OPTIMUM, np.array([0.329, -0.9]), np.array([-0.45, 0.0])):
        devs = [dev for _, dev in limit_consistency(prob, u, ladder)]
        assert all(a >= b - 1e-10 for a, b in zip(devs, devs[1:]))
        assert devs[-1] <= 1e-8


def test_limit_consistency_validates_ladder():
    prob = builtin_example()
    with pytest.raises(ValueError):
        limit_consistency(prob, [0.0, 0.0], [])
    with pytest.raises(ValueError):
        limit_consistency(prob, [0.0, 0.0], [0.1, -0.01])
    with pytest.raises(ValueError):
        limit_consistency(prob, [0.0, 0.0], [0.01, 0.1])


def test_membership_tolerance():
    cone = TangentCone(rows=np.array([[1.0, 0.0]]), base_point=np.zeros(2))
    assert not cone.membership([1e-12, 0.0])
    assert cone.membership([1e-12, 0.0], tol=1e-9)
