import time

import numpy as np
import pytest

import ola_core.constants as c
from ola_core.optimizer import (Solution, InstanceTooLargeError, BoundUnreachableError,
                                solve_dp, brute_force, greedy_allocation, search_budget,
                                scan_r, best_r, tune_r)
from ola_core.runtime import DegreeSpace, DiscreteCostTable, synthetic_profile, discretize
from ola_core.sensitivity import loss_variance


INF = float("inf")


def cost_table(rows):
    return DiscreteCostTable(0.25, [dict([(c.SENTINEL_DEGREE, 0)] + list(row.items()))
                                    for row in rows])


def random_instance(seed, integer_valued=False):
    """ N_L <= 4, |S| <= 4, N_K <= 40, costs and MSE monotone in the degree. """
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(1, 5))
    n_degrees = int(rng.integers(1, 5))
    space = DegreeSpace(sorted(int(d) for d in rng.choice(np.arange(1, 256), n_degrees,
                                                         replace=False)))
    n_budget = int(rng.integers(0, 41))
    A, E, rows = [], [], []
    for _ in range(n_layers):
        costs = np.sort(rng.integers(1, 13, size=n_degrees))
        if integer_valued:
            mse = np.sort(rng.integers(0, 4, size=n_degrees))[::-1].astype(float)
            a = float(rng.integers(0, 3))
        else:
            mse = np.sort(rng.uniform(0.0, 1.0, size=n_degrees))[::-1]
            a = 0.0 if rng.uniform() < 0.1 else float(rng.uniform(0.0, 5.0))
        A.append(a)
        E.append({d: float(e) for d, e in zip(space, mse)})
        rows.append({d: int(t) for d, t in zip(space, costs)})
    return A, E, cost_table(rows), n_budget, space


@pytest.mark.parametrize("seed", range(200))
def test_dp_matches_brute_force(seed):
    A, E, tau, n_budget, space = random_instance(seed, integer_valued=seed % 2 == 1)
    expected = brute_force(A, E, tau, n_budget, space)
    got = solve_dp(A, E, tau, n_budget, space).solution()
    assert got.degrees == expected.degrees
    assert got.objective == expected.objective
    assert got.cost == expected.cost


@pytest.mark.parametrize("seed", range(20))
def test_dp_recurrence(seed):
    A, E, tau, n_budget, space = random_instance(1000 + seed)
    table = solve_dp(A, E, tau, n_budget, space)
    for l in range(1, table.n_layers + 1):
        for k in range(n_budget + 1):
            candidates = [INF]
            for d in space:
                t = tau.cost(l - 1, d)
                if t <= k:
                    before = 0.0 if l == 1 else table.value(l - 1, k - t)
                    candidates.append(before + A[l - 1] * E[l - 1][d])
            assert table.value(l, k) == min(candidates)


@pytest.mark.parametrize("seed", range(20))
def test_dp_cells_are_feasible_and_monotone(seed):
    A, E, tau, n_budget, space = random_instance(2000 + seed)
    table = solve_dp(A, E, tau, n_budget, space)
    for l in range(1, table.n_layers + 1):
        previous = INF
        for k in range(n_budget + 1):
            d = table.degrees(l, k)
            v = table.value(l, k)
            assert len(d) == l
            assert v <= previous
            previous = v
            if v < INF:
                assert sum(tau.cost(i, x) for i, x in enumerate(d)) <= k
                assert loss_variance(A[:l], E[:l], d) == v
            else:
                assert d == (c.SENTINEL_DEGREE,) * l


def test_first_row_takes_the_largest_affordable_degree():
    space = DegreeSpace([3, 7, 15])
    tau = cost_table([{3: 2, 7: 4, 15: 7}])
    table = solve_dp([1.0], [{3: 0.3, 7: 0.2, 15: 0.1}], tau, 9, space)
    assert [table.degrees(1, k)[0] for k in range(10)] == [-1, -1, 3, 3, 7, 7, 7, 15, 15, 15]
    assert table.first_row_ties() == []


def test_ties_go_to_the_smaller_degree():
    space = DegreeSpace([3, 7])
    tau = cost_table([{3: 1, 7: 2}])
    table = solve_dp([0.0], [{3: 0.5, 7: 0.1}], tau, 5, space)
    assert table.degrees(1, 5) == (3,)
    assert table.largest_affordable(5) == 7
    assert table.first_row_ties() == [2, 3, 4, 5]


def test_nothing_affordable():
    space = DegreeSpace([3, 7])
    tau = cost_table([{3: 4, 7: 6}, {3: 4, 7: 6}])
    table = solve_dp([1.0, 1.0], [{3: 0.5, 7: 0.1}] * 2, tau, 7, space)
    sol = table.solution()
    assert sol.degrees == (c.SENTINEL_DEGREE, c.SENTINEL_DEGREE)
    assert sol.objective == INF
    assert sol.has_sentinel
    assert table.k_min is None


def greedy_trap():
    space = DegreeSpace([3, 7])
    tau = cost_table([{3: 1, 7: 2}, {3: 1, 7: 5}, {3: 1, 7: 2}])
    E = [{3: 1.0, 7: 0.9}, {3: 10.0, 7: 0.0}, {3: 1.0, 7: 0.9}]
    return [1.0, 1.0, 1.0], E, tau, 7, space


def test_greedy_is_not_optimal():
    A, E, tau, n_budget, space = greedy_trap()
    greedy = greedy_allocation(A, E, tau, n_budget, space)
    optimum = brute_force(A, E, tau, n_budget, space)
    assert greedy.degrees == (7, 3, 7)
    assert greedy.objective == pytest.approx(11.8)
    assert optimum.degrees == (3, 7, 3)
    assert optimum.objective == 2.0
    assert optimum.objective < greedy.objective
    assert solve_dp(A, E, tau, n_budget, space).solution() == optimum


def test_dp_at_scale():
    space = DegreeSpace()
    tau = discretize(synthetic_profile(31, space))
    rng = np.random.default_rng(7)
    A = list(rng.uniform(0.01, 2.0, size=31))
    E = [{d: (i + 1) / d ** 1.5 for d in space} for i in range(31)]
    start = time.perf_counter()
    table = solve_dp(A, E, tau, 5000, space)
    assert time.perf_counter() - start < 5.0
    values = table.values[-1]
    assert np.all(values[1:] <= values[:-1])
    assert table.k_min is not None
    for k in range(table.k_min, 5001, 97):
        sol = table.solution(k)
        assert sol.cost <= k
        assert not sol.has_sentinel
    assert table.solution().degrees == (255,) * 31


def test_brute_force_guard():
    A, E, tau, n_budget, space = greedy_trap()
    with pytest.raises(InstanceTooLargeError):
        brute_force(A, E, tau, n_budget, space, limit=7)


def test_solution_over_budget():
    with pytest.raises(ValueError):
        Solution((3, 7), 1.0, 10, 9)


def test_solution_json_with_infinite_objective():
    sol = Solution((-1, -1), INF, 0, 0)
    assert Solution.from_json(sol.to_json()) == sol
    assert sol.to_json()["objective"] == "inf"


def budget_table():
    """ One layer, D(1, k) = 3, 7, 15, 31 for k = 1..4. """
    space = DegreeSpace([3, 7, 15, 31])
    tau = cost_table([{3: 1, 7: 2, 15: 3, 31: 4}])
    return solve_dp([1.0], [{3: 1.0, 7: 0.5, 15: 0.25, 31: 0.125}], tau, 4, space)


def accuracy_failing_on(*failing):
    def evaluate(degrees):
        return 0.5 if degrees[0] in failing else 0.9
    return evaluate


def test_search_finds_the_smallest_budget():
    search = search_budget(budget_table(), accuracy_failing_on(3), 0.9)
    assert search.solution.budget == 2
    assert search.solution.degrees == (7,)
    assert search.accuracy == 0.9
    assert search.threshold == pytest.approx(0.89)
    assert not search.anomaly
    assert not search.sentinel


def test_search_starts_at_the_first_finite_budget():
    search = search_budget(budget_table(), accuracy_failing_on(), 0.9)
    assert search.solution.budget == 1


def test_search_flags_a_non_monotone_response():
    search = search_budget(budget_table(), accuracy_failing_on(3, 15), 0.9)
    assert search.anomaly
    assert search.solution.budget == 2
    assert search.solution.degrees == (7,)
    ks = [p[0] for p in search.points]
    assert sorted(ks) == [1, 2, 3, 4]
    assert len(set(p[1] for p in search.points)) == len(search.points)


def test_search_without_the_monotone_check():
    search = search_budget(budget_table(), accuracy_failing_on(3, 15), 0.9,
                           check_monotone=False)
    assert not search.anomaly
    assert search.solution.budget == 2


def test_search_finds_a_pass_below_a_failing_budget():
    # the binary search lands on 3, budget 1 passes too
    search = search_budget(budget_table(), accuracy_failing_on(7), 0.9)
    assert search.solution.budget == 1
    assert search.solution.degrees == (3,)
    assert search.anomaly
    assert sorted(p[0] for p in search.points) == [1, 2, 3, 4]


def test_search_when_only_the_largest_budget_fails():
    search = search_budget(budget_table(), accuracy_failing_on(31), 0.9)
    assert search.solution.budget == 1
    assert search.anomaly


def test_search_binary_only_when_unchecked():
    search = search_budget(budget_table(), accuracy_failing_on(7), 0.9,
                           check_monotone=False)
    assert search.solution.budget == 3
    assert not search.anomaly
    with pytest.raises(BoundUnreachableError):
        search_budget(budget_table(), accuracy_failing_on(31), 0.9, check_monotone=False)


def test_search_bound_unreachable():
    with pytest.raises(BoundUnreachableError) as info:
        search_budget(budget_table(), accuracy_failing_on(3, 7, 15, 31), 0.9)
    assert info.value.best.degrees == (31,)
    assert info.value.accuracy == 0.5
    assert info.value.return_value == c.RV_BOUND_UNREACHABLE


def test_search_with_no_finite_budget():
    space = DegreeSpace([3])
    table = solve_dp([1.0], [{3: 1.0}], cost_table([{3: 2}]), 1, space)
    with pytest.raises(BoundUnreachableError) as info:
        search_budget(table, accuracy_failing_on(), 0.9)
    assert info.value.accuracy is None
    assert info.value.best.has_sentinel


def test_scan_r_keeps_the_grid_order():
    curve = scan_r([1.0, 1.5, 2.0], lambda r: 1.0 / r)
    assert curve == [(1.0, 1.0), (1.5, 1.0 / 1.5), (2.0, 0.5)]


def test_best_r_prefers_the_smaller_ratio():
    assert best_r([(1.0, 0.7), (1.5, 0.9), (2.0, 0.9), (2.5, 0.8)]) == 1.5
    assert tune_r([1.0, 2.0, 3.0], lambda r: 0.5) == 1.0


@pytest.mark.parametrize("grid", [[], [1.0, 1.0], [2.0, 1.5], [0.5, 1.0]])
def test_bad_r_grid(grid):
    with pytest.raises(ValueError):
        scan_r(grid, lambda r: 0.0)
