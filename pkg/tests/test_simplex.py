import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import linprog

from sphere_gridder.errors import InfeasibleError, InvariantError, UnboundedError
from sphere_gridder.simplex import linprog_bland


def test_textbook_program():
    result = linprog_bland(
        c=[-3.0, -5.0],
        a_ub=[[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]],
        b_ub=[4.0, 12.0, 18.0],
    )
    assert_allclose(result.x, [2.0, 6.0], atol=1e-12)
    assert_allclose(result.objective, -36.0)


def test_negative_right_hand_side():
    # x + y >= 2 written as -x - y <= -2
    result = linprog_bland(c=[1.0, 2.0], a_ub=[[-1.0, -1.0], [1.0, 0.0]], b_ub=[-2.0, 5.0])
    assert_allclose(result.x, [2.0, 0.0], atol=1e-12)
    assert_allclose(result.objective, 2.0)


def test_infeasible():
    with pytest.raises(InfeasibleError):
        linprog_bland(c=[1.0], a_ub=[[1.0]], b_ub=[-1.0])


def test_unbounded():
    with pytest.raises(UnboundedError):
        linprog_bland(c=[-1.0], a_ub=[[-1.0]], b_ub=[1.0])
    assert issubclass(UnboundedError, InvariantError)


def test_degenerate_program_terminates():
    # redundant and degenerate rows through the origin
    a_ub = [[1.0, 1.0], [1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [2.0, 2.0]]
    b_ub = [0.0, 0.0, 0.0, 0.0, 0.0]
    result = linprog_bland(c=[-1.0, -1.0], a_ub=a_ub, b_ub=b_ub)
    assert_allclose(result.x, [0.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_against_scipy(seed):
    rng = np.random.default_rng(seed)
    n_vars, n_rows = rng.integers(2, 7), rng.integers(2, 10)
    c = rng.uniform(0.1, 1.0, n_vars)
    a_ub = rng.standard_normal((n_rows, n_vars))
    b_ub = rng.standard_normal(n_rows)
    reference = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    if reference.status == 2:
        with pytest.raises(InfeasibleError):
            linprog_bland(c, a_ub, b_ub)
        return
    assert reference.status == 0
    result = linprog_bland(c, a_ub, b_ub)
    assert_allclose(result.objective, reference.fun, rtol=1e-8, atol=1e-9)
    assert np.all(result.x >= -1e-9)
    assert np.all(a_ub @ result.x <= b_ub + 1e-9)
