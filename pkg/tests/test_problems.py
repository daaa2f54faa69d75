import numpy as np
import pytest

from fbopt import (
    builtin_example,
    eval_plant,
    get_problem,
    problem_names,
    register_problem,
)


def test_builtin_names_registered():
    names = problem_names()
    assert "cubic2d" in names
    assert "quad1d" in names
    assert names == sorted(names)


def test_builtin_example_is_cubic2d():
    prob = builtin_example()
    assert prob.name == "cubic2d"
    assert prob.input_dim == 2
    assert prob.output_dim == 1


def test_get_problem_returns_fresh_instances():
    a = get_problem("cubic2d")
    b = get_problem("cubic2d")
    assert a.input_dim == b.input_dim
    np.testing.assert_allclose(eval_plant(a.plant, [0.0, 0.0]),
                               eval_plant(b.plant, [0.0, 0.0]))


def test_get_problem_unknown_name():
    with pytest.raises(KeyError) as err:
        get_problem("definitely-not-registered")
    assert "cubic2d" in str(err.value)  # message lists what exists


def test_register_rejects_duplicates():
    with pytest.raises(ValueError):
        register_problem("cubic2d", builtin_example)


def test_register_rejects_empty_name():
    with pytest.raises(ValueError):
        register_problem("", builtin_example)
