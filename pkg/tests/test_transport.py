"""Exact transport checked against brute-force vertex enumeration.

Transportation-polytope optima sit on basic feasible solutions; for a
3x3 instance those are found by zeroing all but 5 of the 9 flow cells
and solving the marginal equations. Enumerating every basis and taking
the cheapest feasible one is an independent oracle for the LP solve.
"""

import itertools

import numpy as np
import pytest

from noteval.transport import TransportPlan, relaxed_lower_bound, solve_transport


def vertex_enumeration_optimum(p, q, costs):
    n, m = len(p), len(q)
    b = np.concatenate([p, q])
    # Row/column sum constraint matrix over the n*m flow variables.
    a_full = np.zeros((n + m, n * m))
    for i in range(n):
        a_full[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_full[n + j, j::m] = 1.0
    rank = n + m - 1
    best = None
    for basis in itertools.combinations(range(n * m), rank):
        a_b = a_full[:, basis]
        sol, residuals, a_rank, _ = np.linalg.lstsq(a_b, b, rcond=None)
        if a_rank < rank:
            continue
        if np.max(np.abs(a_b @ sol - b)) > 1e-9:
            continue
        if np.min(sol) < -1e-10:
            continue
        cost = float(costs.ravel()[list(basis)] @ sol)
        if best is None or cost < best:
            best = cost
    return best


class TestSolveTransport:
    def test_identity_zero_cost(self):
        p = np.array([0.5, 0.5])
        costs = np.array([[0.0, 1.0], [1.0, 0.0]])
        plan = solve_transport(p, p, costs)
        assert plan.cost == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(plan.flow, np.diag(p))

    def test_single_cell(self):
        plan = solve_transport(np.array([1.0]), np.array([1.0]), np.array([[3.5]]))
        assert plan.cost == pytest.approx(3.5)

    def test_forced_cross(self):
        p = np.array([1.0, 0.0])
        q = np.array([0.0, 1.0])
        costs = np.array([[9.0, 2.0], [1.0, 9.0]])
        plan = solve_transport(p, q, costs)
        assert plan.cost == pytest.approx(2.0)

    def test_three_by_three_battery(self):
        rng = np.random.default_rng(2024)
        for case in range(100):
            p = rng.random(3) + 0.05
            p /= p.sum()
            q = rng.random(3) + 0.05
            q /= q.sum()
            costs = rng.random((3, 3)) * 4.0
            plan = solve_transport(p, q, costs)
            oracle = vertex_enumeration_optimum(p, q, costs)
            assert plan.cost == pytest.approx(oracle, abs=1e-8), f"case {case}"
            assert plan.cost == pytest.approx(
                float((plan.flow * costs).sum()), abs=1e-9
            )

    def test_marginals_hold_on_every_plan(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n, m = rng.integers(1, 6), rng.integers(1, 6)
            p = rng.random(n) + 1e-3
            p /= p.sum()
            q = rng.random(m) + 1e-3
            q /= q.sum()
            plan = solve_transport(p, q, rng.random((n, m)))
            row_err, col_err = plan.marginal_errors()
            assert max(row_err, col_err) <= 1e-9
            assert plan.flow.min() >= 0.0
            assert plan.flow.sum() == pytest.approx(1.0, abs=1e-9)

    def test_independent_coupling_never_cheaper(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = rng.random(4) + 1e-3
            p /= p.sum()
            q = rng.random(3) + 1e-3
            q /= q.sum()
            costs = rng.random((4, 3)) * 3.0
            plan = solve_transport(p, q, costs)
            outer_cost = float((np.outer(p, q) * costs).sum())
            assert plan.cost <= outer_cost + 1e-9

    def test_relaxed_bound_below_exact(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            p = rng.random(3) + 1e-3
            p /= p.sum()
            q = rng.random(3) + 1e-3
            q /= q.sum()
            costs = rng.random((3, 3)) * 2.0
            assert relaxed_lower_bound(p, q, costs) <= solve_transport(
                p, q, costs
            ).cost + 1e-9

    def test_input_validation(self):
        good = np.array([0.5, 0.5])
        with pytest.raises(ValueError):
            solve_transport(np.array([0.7, 0.7]), good, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            solve_transport(np.array([-0.5, 1.5]), good, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            solve_transport(good, good, np.zeros((3, 2)))
        with pytest.raises(ValueError):
            solve_transport(np.array([]), good, np.zeros((0, 2)))
