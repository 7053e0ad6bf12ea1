"""Box-constrained tension QP: exact cases, KKT contracts, brute-force parity.

The brute-force oracle enumerates a 0.1 N lattice over the box and keeps
points that satisfy the equality rows to within half a lattice step, so the
continuous optimum and the lattice optimum must agree to the lattice
resolution in objective value.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wipsim import QpInfeasibleError, default_muscle_config, solve_box_qp
from oracles import kkt_violation, lattice_best, random_qp_instance


def _contracts_hold(w, C, d, lo, hi, sol):
    assert sol.equality_residual <= 1e-9 * (1.0 + np.linalg.norm(d))
    assert np.all(sol.x >= lo - 1e-9)
    assert np.all(sol.x <= hi + 1e-9)
    scale = 1.0 + np.abs(2.0 * w * sol.x).max()
    assert kkt_violation(w, C, sol.x, sol.lam, lo, hi) <= 1e-6 * scale


def test_input_validation():
    with pytest.raises(ValueError):
        solve_box_qp([1.0], [[1.0, 1.0]], [0.0], [0.0], [1.0])
    with pytest.raises(ValueError):
        solve_box_qp([1.0, 0.0], [[1.0, 1.0]], [0.5], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        solve_box_qp([1.0, 1.0], [[1.0, 1.0]], [0.5], [2.0, 0.0], [1.0, 1.0])


def test_antagonist_pair_rests_at_minimum_cocontraction():
    # equal moment arms, zero demand: both tensions sit on the lower bound
    C = np.array([[-0.03, 0.03]])
    sol = solve_box_qp([1.0, 1.0], C, [0.0], [10.0, 10.0], [200.0, 200.0])
    assert np.allclose(sol.x, [10.0, 10.0], rtol=0, atol=1e-9)
    assert sol.active_lower == (0, 1)


def test_antagonist_pair_meets_torque_demand():
    # 0.9 N m across a +/-3 cm arm pair: cheapest split is (10, 40)
    C = np.array([[-0.03, 0.03]])
    sol = solve_box_qp([1.0, 1.0], C, [0.9], [10.0, 10.0], [200.0, 200.0])
    assert np.allclose(sol.x, [10.0, 40.0], rtol=0, atol=1e-8)
    assert sol.active_lower == (0,)
    assert sol.active_upper == ()
    _contracts_hold(np.ones(2), C, np.array([0.9]), np.full(2, 10.0),
                    np.full(2, 200.0), sol)


def test_cocontraction_floor_shifts_the_optimum():
    C = np.array([[-0.03, 0.03]])
    prev_obj = -1.0
    for floor in (10.0, 12.0, 14.0):
        sol = solve_box_qp([1.0, 1.0], C, [0.9], [floor, floor], [200.0, 200.0])
        assert np.allclose(sol.x, [floor, floor + 30.0], rtol=0, atol=1e-8)
        assert sol.objective > prev_obj
        prev_obj = sol.objective


def test_square_system_ignores_weights():
    C = np.eye(2)
    d = np.array([5.0, 6.0])
    for w in ([1.0, 1.0], [9.0, 0.1]):
        sol = solve_box_qp(w, C, d, [0.0, 0.0], [10.0, 10.0])
        assert np.allclose(sol.x, d, rtol=0, atol=1e-12)


def test_pinned_variable():
    sol = solve_box_qp([1.0, 1.0], [[1.0, 1.0]], [5.0], [2.0, 0.0], [2.0, 10.0])
    assert np.allclose(sol.x, [2.0, 3.0], rtol=0, atol=1e-9)


def test_infeasible_demand_raises_with_violation():
    with pytest.raises(QpInfeasibleError) as exc:
        solve_box_qp([1.0, 1.0], [[1.0, 1.0]], [100.0],
                     [0.0, 0.0], [1.0, 1.0])
    assert exc.value.violation == pytest.approx(98.0, rel=1e-6)


def test_random_instances_meet_kkt(rng):
    for _ in range(40):
        M = int(rng.integers(2, 7))
        J = int(rng.integers(1, min(M, 3) + 1))
        while True:
            C = rng.uniform(-0.06, 0.06, (J, M))
            if np.linalg.matrix_rank(C) == J:
                break
        lo = np.full(M, 10.0)
        hi = np.full(M, 200.0)
        w = rng.uniform(0.5, 2.0, M)
        d = C @ rng.uniform(lo, hi)
        sol = solve_box_qp(w, C, d, lo, hi)
        _contracts_hold(w, C, d, lo, hi, sol)


def test_warm_start_matches_cold_solution(rng):
    for _ in range(10):
        w, C, d, lo, hi = random_qp_instance(rng, 5, 2)
        cold = solve_box_qp(w, C, d, lo, hi)
        hot = solve_box_qp(w, C, d, lo, hi, x0=cold.x)
        assert np.allclose(hot.x, cold.x, rtol=0, atol=1e-9)
        assert hot.objective == pytest.approx(cold.objective, rel=1e-12)


def test_matches_lattice_search(rng):
    # brute force over a 0.1 N grid; two joints, three to five muscles
    step = 0.1
    sizes = [3] * 8 + [4] * 8 + [5] * 4
    for M in sizes:
        w, C, d, lo, hi = random_qp_instance(rng, M, 2, step)
        sol = solve_box_qp(w, C, d, lo, hi)
        obj_lat, x_lat = lattice_best(w, C, d, lo, hi, step)
        assert obj_lat is not None
        # rounding the continuous optimum to the nearest lattice point moves
        # each coordinate by at most half a step and stays inside the
        # membership slack, so the lattice winner cannot be worse than that
        round_bound = step * float(np.sum(w * (np.abs(sol.x) + step / 4.0)))
        assert obj_lat <= sol.objective + round_bound
        # Lagrangian duality: obj(x_lat) >= obj_qp + lam @ (C x_lat - d) for
        # any box point, which is exact however the slack was spent
        r_lat = C @ x_lat - d
        assert sol.objective <= obj_lat - float(sol.lam @ r_lat) \
            + 1e-6 * (1.0 + abs(obj_lat))
        _contracts_hold(w, C, d, lo, hi, sol)


def test_degenerate_vertex_does_not_cycle():
    # regression: torque demand on the feasibility boundary pins five of six
    # tensions; the reduced subproblem is rank deficient and the working set
    # used to churn without moving
    cfg = default_muscle_config()
    C = -np.asarray(cfg.G, float).T
    tau = np.array([17.07437001, 3.35413915])
    w = np.ones(6)
    lo = np.full(6, 10.0)
    hi = np.full(6, 200.0)
    warm = np.array([10.0, 200.0, 138.62592758, 10.0, 10.0, 199.99983832])

    cold = solve_box_qp(w, C, tau, lo, hi)
    hot = solve_box_qp(w, C, tau, lo, hi, x0=warm)
    assert np.array_equal(cold.x, hot.x)
    assert cold.iterations < 50 and hot.iterations < 50
    assert cold.equality_residual <= 1e-9 * (1.0 + np.linalg.norm(tau))
    scale = 1.0 + np.abs(2.0 * w * cold.x).max()
    assert kkt_violation(w, C, cold.x, cold.lam, lo, hi) <= 1e-6 * scale
    assert np.allclose(
        cold.x, [10.0, 200.0, 138.8283075, 10.0, 10.0, 200.0], atol=1e-6)


def test_null_space_perturbations_only_raise_the_objective(rng):
    w, C, d, lo, hi = random_qp_instance(rng, 5, 2)
    sol = solve_box_qp(w, C, d, lo, hi)
    _, _, vt = np.linalg.svd(C)
    null = vt[2:]
    for v in null:
        for eps in (1e-4, -1e-4):
            cand = np.clip(sol.x + eps * v, lo, hi)
            if np.linalg.norm(C @ cand - d) > 1e-6:
                continue
            assert float(w @ (cand * cand)) >= sol.objective - 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_random_feasible_instances_solve_cleanly(seed):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(2, 6))
    w, C, d, lo, hi = random_qp_instance(rng, M, int(rng.integers(1, 3)))
    sol = solve_box_qp(w, C, d, lo, hi)
    _contracts_hold(w, C, d, lo, hi, sol)
