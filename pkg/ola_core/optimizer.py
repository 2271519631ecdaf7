#!/usr/bin/env python
# -*- coding: utf-8 -*-

#
#   ola - Optimized Layerwise Approximation.
#   Distribution-aware polynomial replacement of activation functions
#   under a private-inference runtime budget.
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.
#

"""
Degree allocation under a runtime budget.

minimize   V(d) = sum_i A_i E_i(d_i)
subject to tau(d) = sum_i tau_i(d_i) <= N_K,  d_i in S u {-1}

solved exactly by dynamic programming over (layers, budget), plus the
outer searches over the budget k and the scale ratio r.
"""

import itertools
import logging

import numpy as np

import ola_core.constants as c
from ola_core.runtime import total_cost
from ola_core.sensitivity import loss_variance
from ola_core.util import OlaError, DegreeLookupError, json_float, float_from_json


INF = float("inf")


class InstanceTooLargeError(OlaError, ValueError):
    """ Raised when brute force would enumerate too many degree vectors. """
    return_value = c.RV_BAD_INPUT


class BoundUnreachableError(OlaError):
    """ Raised when no budget keeps the accuracy above the bound.

    Inputs:
     - best -- The Solution with the highest accuracy among those evaluated
     - accuracy -- Its accuracy, None if nothing could be evaluated
     - threshold -- The accuracy bound that was required

    """
    return_value = c.RV_BOUND_UNREACHABLE

    def __init__(self, best, accuracy, threshold):
        if accuracy is None:
            msg = "No budget up to {0} has a finite loss variance".format(best.budget)
        else:
            msg = ("No budget up to {0} reaches accuracy {1:.4f}, best found {2:.4f} "
                   "with degrees {3}".format(best.budget, threshold, accuracy,
                                             list(best.degrees)))
        OlaError.__init__(self, msg)
        self.best = best
        self.accuracy = accuracy
        self.threshold = threshold

    def __reduce__(self):
        return (BoundUnreachableError, (self.best, self.accuracy, self.threshold))


class Solution:
    """ A degree vector with its objective, cost, budget and scale ratio. """

    def __init__(self, degrees, objective, cost, budget, r=1.0):
        self.degrees = tuple(int(d) for d in degrees)
        self.objective = float(objective)
        self.cost = int(cost)
        self.budget = int(budget)
        self.r = float(r)
        if self.cost > self.budget:
            raise ValueError("Cost {0} is above the budget {1}".format(self.cost, self.budget))

    @property
    def has_sentinel(self):
        return c.SENTINEL_DEGREE in self.degrees

    def with_r(self, r):
        return Solution(self.degrees, self.objective, self.cost, self.budget, r)

    def __eq__(self, other):
        return (isinstance(other, Solution) and self.degrees == other.degrees
                and self.objective == other.objective and self.cost == other.cost
                and self.budget == other.budget and self.r == other.r)

    def __repr__(self):
        return "Solution(degrees={0}, objective={1!r}, cost={2}, budget={3}, r={4!r})".format(
            list(self.degrees), self.objective, self.cost, self.budget, self.r)

    def to_json(self):
        return {"degrees": list(self.degrees), "objective": json_float(self.objective),
                "cost": self.cost, "budget": self.budget, "r": self.r}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["degrees"], float_from_json(obj["objective"]), obj["cost"],
                   obj["budget"], obj["r"])


def _mse_values(E, space):
    """ Per layer list of E_i(d) in the order of space.with_sentinel. """

    rows = []
    for i, table in enumerate(E):
        row = [INF]
        for d in space:
            try:
                row.append(float(table[d]))
            except KeyError:
                raise DegreeLookupError(i + 1, d)
        rows.append(row)
    return rows


def _cost_values(tau, space):
    return [[tau.cost(i, d) for d in space.with_sentinel] for i in range(len(tau))]


def _check_inputs(A, E, tau, n_budget):
    if not (len(A) == len(E) == len(tau)):
        raise ValueError("A, E and tau must have one entry per layer, got {0}, {1} "
                         "and {2}".format(len(A), len(E), len(tau)))
    if len(A) < 1:
        raise ValueError("Nothing to optimize, there are no layers")
    if n_budget < 0:
        raise ValueError("The budget must be >= 0, got {0}".format(n_budget))


class DPTable:
    """ Dynamic programming table of the subproblems P(l, k).

    Cell (l, k), 1 <= l <= N_L and 0 <= k <= N_K, stores the value
    V(D(l, k)), the last degree D_l(l, k) and the budget left for the first
    l - 1 layers. Full degree vectors are rebuilt by backtracking.
    """

    def __init__(self, space, tau, values, last, pred, A, E):
        self.space = space
        self.tau = tau
        self.values = values
        self.last = last
        self.pred = pred
        self.A = list(A)
        self.E = list(E)

    @property
    def n_layers(self):
        return self.values.shape[0]

    @property
    def n_budget(self):
        return self.values.shape[1] - 1

    def value(self, l, k):
        return float(self.values[l - 1, k])

    def degrees(self, l, k):
        """ D(l, k), all sentinel when no finite vector fits in k. """

        if self.values[l - 1, k] == INF:
            return (c.SENTINEL_DEGREE,) * l
        out = []
        for row in range(l - 1, -1, -1):
            out.append(int(self.last[row, k]))
            k = int(self.pred[row, k])
        return tuple(reversed(out))

    def cell(self, l, k):
        return {"degrees": self.degrees(l, k), "value": self.value(l, k)}

    def largest_affordable(self, k):
        """ max{d in S : tau_1(d) <= k}, the sentinel if nothing fits. """

        fits = [d for d in self.space if self.tau.cost(0, d) <= k]
        return fits[-1] if fits else c.SENTINEL_DEGREE

    def first_row_ties(self):
        """ Budgets k where D_1(1, k) is smaller than the largest affordable degree.

        Only happens on an equal objective (A_1 = 0 or a flat MSE table),
        the smaller degree is kept then.
        """

        return [k for k in range(self.n_budget + 1)
                if self.last[0, k] != self.largest_affordable(k)]

    def solution(self, k=None):
        """ Solution of P(N_L, k), k defaults to N_K. """

        k = self.n_budget if k is None else k
        if not 0 <= k <= self.n_budget:
            raise ValueError("Budget {0} outside [0, {1}]".format(k, self.n_budget))
        d = self.degrees(self.n_layers, k)
        return Solution(d, self.value(self.n_layers, k), total_cost(self.tau, d), k)

    @property
    def k_min(self):
        """ Smallest k with finite V(N_L, k), None if there is none. """

        finite = np.nonzero(np.isfinite(self.values[-1]))[0]
        return int(finite[0]) if len(finite) else None


def solve_dp(A, E, tau, n_budget, space):
    """ Fill the DP table for every l <= N_L and k <= N_K.

    Inputs:
     - A -- Sensitivity weight per layer
     - E -- Per layer dict degree -> MSE, covering space
     - tau -- DiscreteCostTable covering space
     - n_budget -- N_K
     - space -- DegreeSpace S

    Row l + 1 takes, for every k, the argmin over d in S u {-1} with
    tau_{l+1}(d) <= k of V(l, k - tau_{l+1}(d)) + A_{l+1} E_{l+1}(d), with
    V(0, k) = 0. Candidates are scanned in increasing degree and replaced
    only on a strict improvement, so ties go to the smaller degree.
    """

    _check_inputs(A, E, tau, n_budget)
    n_layers = len(A)
    degrees = space.with_sentinel
    mse = _mse_values(E, space)
    cost = _cost_values(tau, space)
    width = n_budget + 1

    values = np.empty((n_layers, width))
    last = np.empty((n_layers, width), dtype=np.int64)
    pred = np.empty((n_layers, width), dtype=np.int64)
    budgets = np.arange(width)
    previous = np.zeros(width)

    for l in range(n_layers):
        best = np.full(width, INF)
        best_d = np.full(width, c.SENTINEL_DEGREE, dtype=np.int64)
        best_pred = budgets.copy()
        a = float(A[l])
        for j, d in enumerate(degrees):
            t = cost[l][j]
            if t > n_budget:
                continue
            if d == c.SENTINEL_DEGREE:
                # E(-1) is infinite whatever A is
                cand = np.full(width, INF)
            else:
                cand = np.full(width, INF)
                cand[t:] = previous[:width - t] + a * mse[l][j]
            better = cand < best
            best = np.where(better, cand, best)
            best_d = np.where(better, d, best_d)
            best_pred = np.where(better, budgets - t, best_pred)
        values[l] = best
        last[l] = best_d
        pred[l] = best_pred
        previous = best
        logging.debug("DP row %d done, V(%d, N_K) = %s", l + 1, l + 1, best[-1])

    return DPTable(space, tau, values, last, pred, A, E)


def brute_force(A, E, tau, n_budget, space, limit=c.BRUTE_FORCE_LIMIT):
    """ Exhaustive minimum of V over every feasible degree vector.

    Among minimizers the one whose reversed degree vector is
    lexicographically smallest wins: smallest last degree, then smallest
    second to last and so on. This is the order the DP backtracking
    follows, and it is the plain lexicographic order whenever the
    minimizer is unique.
    """

    _check_inputs(A, E, tau, n_budget)
    n_layers = len(A)
    if len(space) ** n_layers > limit:
        raise InstanceTooLargeError("{0}^{1} degree vectors is more than {2}".format(
            len(space), n_layers, limit))

    best, best_key = None, None
    for d in itertools.product(space.degrees, repeat=n_layers):
        cost = total_cost(tau, d)
        if cost > n_budget:
            continue
        key = (loss_variance(A, E, d), tuple(reversed(d)))
        if best_key is None or key < best_key:
            best, best_key = d, key
    if best is None:
        return Solution((c.SENTINEL_DEGREE,) * n_layers, INF, 0, n_budget)
    return Solution(best, best_key[0], total_cost(tau, best), n_budget)


def greedy_allocation(A, E, tau, n_budget, space):
    """ Layer by layer, the largest degree that still leaves room for the rest.

    Not optimal; kept as a baseline to compare the DP against.
    """

    _check_inputs(A, E, tau, n_budget)
    n_layers = len(A)
    cheapest = [min(tau.cost(i, d) for d in space) for i in range(n_layers)]
    spent = 0
    degrees = []
    for i in range(n_layers):
        room = n_budget - spent - sum(cheapest[i + 1:])
        affordable = [d for d in space if tau.cost(i, d) <= room]
        if not affordable:
            return Solution((c.SENTINEL_DEGREE,) * n_layers, INF, 0, n_budget)
        degrees.append(affordable[-1])
        spent += tau.cost(i, affordable[-1])
    return Solution(degrees, loss_variance(A, E, degrees), spent, n_budget)


class BudgetSearch:
    """ Result of search_budget.

    Attributes:
     - solution -- The Solution adopted
     - accuracy -- Its accuracy
     - threshold -- baseline - acc_drop
     - points -- List of (k, degrees, accuracy, passed), one per distinct
                 degree vector, in evaluation order
     - anomaly -- True if a budget passed while a larger one failed
     - sentinel -- True if the solution skips a layer

    """

    def __init__(self, solution, accuracy, threshold, points, anomaly):
        self.solution = solution
        self.accuracy = accuracy
        self.threshold = threshold
        self.points = points
        self.anomaly = anomaly

    @property
    def sentinel(self):
        return self.solution.has_sentinel

    def points_to_json(self):
        return [{"budget": k, "degrees": list(d), "accuracy": a, "passed": p}
                for k, d, a, p in self.points]


def search_budget(table, evaluate, baseline_acc, acc_drop_pct=c.DEFAULT_ACC_DROP_PCT,
                  check_monotone=True):
    """ Smallest budget k whose DP solution keeps the accuracy.

    Inputs:
     - table -- Filled DPTable, D(N_L, k) is read for every k <= N_K
     - evaluate -- Callback evaluate(degrees) -> train accuracy
     - baseline_acc -- Accuracy of the clean model
     - acc_drop_pct -- Allowed drop in percentage points
     - check_monotone -- After the binary search, evaluate the degree
                         vector of every budget in [k_min, N_K]

    Binary search over [k_min, N_K], evaluations cached per degree vector.
    A binary search alone is only right when the accuracy is monotone in
    k, so by default every budget is checked afterwards. The result is
    then the smallest passing budget, and the search is flagged as
    anomalous when some budget fails above it.
    """

    threshold = baseline_acc - acc_drop_pct / 100.0
    cache = {}
    points = []

    def check(k):
        d = table.degrees(table.n_layers, k)
        if d not in cache:
            cache[d] = float(evaluate(d))
            points.append((k, d, cache[d], cache[d] >= threshold))
            logging.info("Budget %d, degrees %s: accuracy %.4f", k, list(d), cache[d])
        return cache[d] >= threshold

    n_budget = table.n_budget
    k_min = table.k_min
    if k_min is None:
        raise BoundUnreachableError(table.solution(n_budget), None, threshold)

    found = None
    if check(n_budget):
        lo, hi = k_min, n_budget
        while lo < hi:
            mid = (lo + hi) // 2
            if check(mid):
                hi = mid
            else:
                lo = mid + 1
        found = hi

    anomaly = False
    if check_monotone:
        passed = [check(k) for k in range(k_min, n_budget + 1)]
        smallest = passed.index(True) + k_min if True in passed else None
        if smallest is not None:
            anomaly = not all(passed[smallest - k_min:])
            if anomaly:
                logging.warning("Accuracy is not monotone in the budget, budget %d passes "
                                "but a larger one fails", smallest)
            if smallest != found:
                logging.warning("The binary search gave budget %s, the smallest passing "
                                "budget is %d", found, smallest)
        found = smallest

    if found is None:
        top = table.degrees(table.n_layers, n_budget)
        raise BoundUnreachableError(table.solution(n_budget), cache[top], threshold)

    solution = table.solution(found)
    return BudgetSearch(solution, cache[solution.degrees], threshold, points, anomaly)


def scan_r(r_grid, fit_and_evaluate):
    """ [(r, accuracy)] for every r of the grid, in grid order. """

    r_grid = list(r_grid)
    if not r_grid:
        raise ValueError("The r grid is empty")
    if any(b <= a for a, b in zip(r_grid[:-1], r_grid[1:])):
        raise ValueError("The r grid must be sorted: {0}".format(r_grid))
    if r_grid[0] < 1:
        raise ValueError("Scale ratios must be >= 1: {0}".format(r_grid))
    return [(r, float(fit_and_evaluate(r))) for r in r_grid]


def best_r(curve):
    """ r with the highest accuracy, the smaller r on ties. """

    best = curve[0]
    for point in curve[1:]:
        if point[1] > best[1]:
            best = point
    return best[0]


def tune_r(r_grid, fit_and_evaluate):
    """ The scale ratio maximizing the accuracy, shared by every layer. """

    return best_r(scan_r(r_grid, fit_and_evaluate))
