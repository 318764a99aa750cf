"""
Dense two-phase tableau simplex with Bland's anti-cycling rule, for the small
linear programs of Heisenberg box sizing.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, UnboundedError

PIVOT_TOLERANCE = 1e-11
MAX_ITERATIONS = 10_000


@dataclass
class LinearProgramResult:
    x: np.ndarray
    objective: float
    iterations: int


def _pivot(tableau: np.ndarray, basis: list, row: int, column: int):
    tableau[row] /= tableau[row, column]
    for other in range(len(tableau)):
        if other != row and tableau[other, column] != 0:
            tableau[other] -= tableau[other, column] * tableau[row]
    basis[row] = column


def _optimize(tableau: np.ndarray, basis: list, cost: np.ndarray, allowed: np.ndarray) -> int:
    """
    Run Bland pivots until no allowed column has a negative reduced cost.
    """
    for iteration in range(MAX_ITERATIONS):
        reduced = cost - cost[basis] @ tableau[:, :-1]
        candidates = np.flatnonzero(allowed & (reduced < -PIVOT_TOLERANCE))
        if len(candidates) == 0:
            return iteration
        entering = candidates[0]
        column = tableau[:, entering]
        rows = np.flatnonzero(column > PIVOT_TOLERANCE)
        if len(rows) == 0:
            raise UnboundedError(f"Objective unbounded along column {entering}")
        ratios = tableau[rows, -1] / column[rows]
        ties = rows[ratios <= ratios.min() + PIVOT_TOLERANCE]
        leaving = min(ties, key=lambda r: basis[r])
        _pivot(tableau, basis, leaving, entering)
    raise InfeasibleError(f"Simplex did not converge in {MAX_ITERATIONS} iterations")


def linprog_bland(c, a_ub, b_ub) -> LinearProgramResult:
    """
    Minimize c @ x subject to a_ub @ x <= b_ub and x >= 0.
    """
    c = np.asarray(c, dtype=np.float64)
    a_ub = np.asarray(a_ub, dtype=np.float64).reshape(-1, len(c))
    b_ub = np.asarray(b_ub, dtype=np.float64).reshape(-1)
    n_rows, n_vars = a_ub.shape

    # Rows with a negative right-hand side become >= rows with a surplus and an artificial
    sign = np.where(b_ub < 0, -1.0, 1.0)
    artificial_rows = np.flatnonzero(sign < 0)
    n_artificial = len(artificial_rows)
    n_columns = n_vars + n_rows + n_artificial

    tableau = np.zeros((n_rows, n_columns + 1))
    tableau[:, :n_vars] = a_ub * sign[:, None]
    tableau[np.arange(n_rows), n_vars + np.arange(n_rows)] = sign
    tableau[artificial_rows, n_vars + n_rows + np.arange(n_artificial)] = 1.0
    tableau[:, -1] = b_ub * sign

    basis = [n_vars + i for i in range(n_rows)]
    for k, row in enumerate(artificial_rows):
        basis[row] = n_vars + n_rows + k

    iterations = 0
    everything = np.ones(n_columns, dtype=bool)
    if n_artificial:
        phase_one = np.zeros(n_columns)
        phase_one[n_vars + n_rows :] = 1.0
        iterations += _optimize(tableau, basis, phase_one, everything)
        infeasibility = phase_one[basis] @ tableau[:, -1]
        if infeasibility > 1e-9:
            raise InfeasibleError(f"No feasible point (residual infeasibility {infeasibility:.3e})")
        # Drive zero-level artificials out of the basis, dropping redundant rows
        keep = []
        for row, column in enumerate(list(basis)):
            if column < n_vars + n_rows:
                keep.append(row)
                continue
            replacements = np.flatnonzero(np.abs(tableau[row, : n_vars + n_rows]) > PIVOT_TOLERANCE)
            if len(replacements):
                _pivot(tableau, basis, row, replacements[0])
                keep.append(row)
        tableau = tableau[keep]
        basis = [basis[row] for row in keep]

    allowed = everything.copy()
    allowed[n_vars + n_rows :] = False
    cost = np.zeros(n_columns)
    cost[:n_vars] = c
    iterations += _optimize(tableau, basis, cost, allowed)

    solution = np.zeros(n_columns)
    solution[basis] = tableau[:, -1]
    x = solution[:n_vars]
    logging.debug(f"Simplex converged in {iterations} pivots")
    return LinearProgramResult(x=x, objective=float(c @ x), iterations=iterations)
