import numpy as np
import pytest
from scipy.optimize import linprog

from xorelay.errors import SimplexError
from xorelay.simplex import solve_equality_lp


def test_two_variable_assignment():
    # min -x1 - 2 x2 subject to x1 + x2 = 1: put everything on x2.
    result = solve_equality_lp(np.array([-1.0, -2.0]), np.array([[1.0, 1.0]]), np.array([1.0]))
    assert result.objective == pytest.approx(-2.0)
    assert result.x == pytest.approx([0.0, 1.0])


def test_redundant_rows_are_dropped():
    a = np.array([[1.0, 1.0], [2.0, 2.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0, 1.0])
    result = solve_equality_lp(np.array([3.0, 1.0]), a, b)
    assert result.objective == pytest.approx(1.0)


def test_zero_row_is_redundant():
    a = np.array([[1.0], [0.0]])
    b = np.array([1.0, 0.0])
    result = solve_equality_lp(np.array([2.0]), a, b)
    assert result.x == pytest.approx([1.0])


def test_infeasible_raises():
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])
    with pytest.raises(SimplexError, match="infeasible"):
        solve_equality_lp(np.array([1.0, 1.0]), a, b)


def test_unbounded_raises():
    # x1 - x2 = 1 with objective pushing both up forever.
    a = np.array([[1.0, -1.0]])
    b = np.array([1.0])
    with pytest.raises(SimplexError, match="unbounded"):
        solve_equality_lp(np.array([-1.0, -1.0]), a, b)


def test_negative_rhs_is_normalized():
    result = solve_equality_lp(np.array([1.0, 1.0]), np.array([[-1.0, -1.0]]), np.array([-1.0]))
    assert result.objective == pytest.approx(1.0)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        solve_equality_lp(np.ones(3), np.ones((2, 2)), np.ones(2))


@pytest.mark.parametrize("trial", range(10))
def test_random_instances_match_scipy(trial):
    """Cross-check against an unrelated LP implementation."""
    rng = np.random.default_rng(1000 + trial)
    m, n = rng.integers(2, 6), rng.integers(6, 12)
    a = rng.normal(size=(m, n))
    x_feasible = rng.uniform(0.1, 1.0, size=n)
    b = a @ x_feasible
    c = rng.uniform(0.0, 2.0, size=n)

    reference = linprog(c, A_eq=a, b_eq=b, bounds=(0, None), method="highs")
    result = solve_equality_lp(c, a, b)
    assert reference.status == 0
    assert result.objective == pytest.approx(reference.fun, abs=1e-7)
    assert np.allclose(a @ result.x, b, atol=1e-8)
    assert np.all(result.x >= -1e-9)
