"""Exact solver for the balanced transportation problem.

This is the inner step of the word-mover distance. Both marginals are
small probability vectors (one weight per distinct word in a phrase), so
an exact primal method is cheap and keeps the distances fed into
clustering free of approximation error.

The solver is the classical transportation simplex: a northwest-corner
initial basis, dual potentials from the basis tree, and cycle pivots until
no reduced cost is negative. Entering cells follow Dantzig's rule with a
lowest-index tie-break; if the pivot count ever exceeds a generous bound
the rule switches to Bland's to rule out cycling on degenerate bases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from screenquest.checks import check_matrix, check_weights

# Reduced costs above -REDUCED_COST_TOL are treated as optimal. The value is
# far below the 1e-7 guarantee on plan and objective but well above float
# noise for cost entries of order one.
REDUCED_COST_TOL = 1e-11


@dataclass(frozen=True)
class TransportProblem:
    """A balanced transportation instance.

    source_weights and sink_weights are probability vectors; costs[i, j] is
    the unit cost of moving mass from source i to sink j.
    """

    source_weights: np.ndarray
    sink_weights: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        a = check_weights(self.source_weights, "source_weights")
        b = check_weights(self.sink_weights, "sink_weights")
        c = check_matrix(self.costs, "costs")
        if c.shape != (len(a), len(b)):
            raise ValueError(
                f"costs shape {c.shape} does not match weights ({len(a)}, {len(b)})"
            )
        if c.size and c.min() < 0:
            raise ValueError("costs must be non-negative")
        object.__setattr__(self, "source_weights", a)
        object.__setattr__(self, "sink_weights", b)
        object.__setattr__(self, "costs", c)


@dataclass(frozen=True)
class TransportResult:
    cost: float
    plan: np.ndarray


def solve_transport(problem: TransportProblem) -> TransportResult:
    """Solve to optimality and return the objective and a full plan matrix."""
    a = problem.source_weights.astype(float).copy()
    b = problem.sink_weights.astype(float).copy()
    costs = problem.costs
    m, n = costs.shape
    # the weight checks allow 1e-9 slack per side; rebalance exactly so the
    # northwest-corner pass consumes both margins completely
    b *= a.sum() / b.sum()

    flow, basis = _northwest_corner(a, b)

    max_pivots = 200 * (m + n) + 2000
    bland_after = max_pivots // 2
    for pivot in range(max_pivots):
        u, v = _potentials(costs, basis)
        reduced = costs - u[:, None] - v[None, :]
        entering = _entering_cell(reduced, basis, bland=pivot >= bland_after)
        if entering is None:
            break
        cycle = _pivot_cycle(basis, entering)
        minus = cycle[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min(c for c in minus if flow[c] == theta)
        for c in cycle[0::2]:
            flow[c] += theta
        for c in cycle[1::2]:
            flow[c] -= theta
        flow[leaving] = 0.0
        basis[leaving] = False
        basis[entering] = True
    else:
        raise RuntimeError(f"transport solve did not converge in {max_pivots} pivots")

    plan = np.where(basis, flow, 0.0)
    return TransportResult(cost=float((plan * costs).sum()), plan=plan)


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    """Initial basic feasible solution with exactly m + n - 1 basis cells.

    Each step advances one index, so the staircase of visited cells is a
    spanning tree of the bipartite row/column graph even when a step leaves
    zero flow behind (degenerate cells stay in the basis).
    """
    m, n = len(a), len(b)
    flow = np.zeros((m, n))
    basis = np.zeros((m, n), dtype=bool)
    rem_a = a.copy()
    rem_b = b.copy()
    i = j = 0
    while True:
        q = min(rem_a[i], rem_b[j])
        flow[i, j] = q
        basis[i, j] = True
        rem_a[i] -= q
        rem_b[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (rem_a[i] <= rem_b[j] and i < m - 1):
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(costs: np.ndarray, basis: np.ndarray):
    """Dual variables: u[i] + v[j] == costs[i, j] on every basis cell.

    The basis cells form a spanning tree, so fixing u[0] = 0 and walking the
    tree determines every potential.
    """
    m, n = costs.shape
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    rows_of_col = [list(np.nonzero(basis[:, j])[0]) for j in range(n)]
    cols_of_row = [list(np.nonzero(basis[i, :])[0]) for i in range(m)]
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in cols_of_row[idx]:
                if np.isnan(v[j]):
                    v[j] = costs[idx, j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in rows_of_col[idx]:
                if np.isnan(u[i]):
                    u[i] = costs[i, idx] - v[idx]
                    stack.append(("r", i))
    if np.isnan(u).any() or np.isnan(v).any():
        raise RuntimeError("basis does not span the problem graph")
    return u, v


def _entering_cell(reduced: np.ndarray, basis: np.ndarray, bland: bool):
    """Most negative reduced cost (Dantzig) or first negative (Bland).

    Ties break toward the lowest (i, j) so pivots are deterministic.
    Returns None at optimality.
    """
    candidates = np.where(basis, 0.0, reduced)
    if bland:
        neg = np.argwhere(candidates < -REDUCED_COST_TOL)
        if len(neg) == 0:
            return None
        return tuple(int(x) for x in neg[0])
    flat = int(np.argmin(candidates))
    cell = np.unravel_index(flat, reduced.shape)
    if candidates[cell] >= -REDUCED_COST_TOL:
        return None
    return (int(cell[0]), int(cell[1]))


def _pivot_cycle(basis: np.ndarray, entering: tuple[int, int]):
    """Alternating cycle closed by the entering cell.

    The basis is a spanning tree, so there is a unique path from the
    entering cell's row node to its column node; appending the entering
    cell closes the unique cycle. Cells are returned starting at the
    entering cell and alternating +, -, +, - around the cycle.
    """
    ei, ej = entering
    m, n = basis.shape
    parent: dict[tuple[str, int], tuple[str, int]] = {}
    start = ("r", ei)
    goal = ("c", ej)
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        if node == goal:
            break
        kind, idx = node
        if kind == "r":
            neighbors = [("c", int(j)) for j in np.nonzero(basis[idx, :])[0]]
        else:
            neighbors = [("r", int(i)) for i in np.nonzero(basis[:, idx])[0]]
        for nxt in neighbors:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = node
                stack.append(nxt)
    else:
        raise RuntimeError("entering cell is not connected to the basis tree")

    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    # path runs column-of-entering -> ... -> row-of-entering; each adjacent
    # node pair is a basis cell, and walking them from the entering cell
    # alternates shared-column / shared-row as required
    cells = [entering]
    for a, b in zip(path, path[1:]):
        (ka, ia), (kb, ib) = a, b
        cells.append((ia, ib) if ka == "r" else (ib, ia))
    return cells
