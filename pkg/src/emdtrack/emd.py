"""Exact solver for the balanced transportation problem behind the EMD.

The LP is solved with the transportation simplex over spanning-tree bases,
seeded by Russell's approximation. Because the optimal basis is known, the
optimum can also be expressed as a linear form in the histogram weights,
which is what makes the distance differentiable for tracking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CycleLimitExceeded,
    DimensionMismatch,
    InfeasibleBalance,
    SingularBasis,
)

BALANCE_TOL = 1e-9
REDUCED_COST_TOL = 1e-9
# Residual supplies/demands below this are treated as exhausted.
_RESIDUAL_TOL = 1e-12


@dataclass
class TransportProblem:
    """Balanced transportation instance with unit total mass on both sides.

    ``supplies`` are the source-bin weights, ``demands`` the sink-bin
    weights, and ``costs[u, v]`` the ground cost from source ``u`` to sink
    ``v``. Inputs are validated, never normalized: rebalancing is the
    caller's job.
    """

    supplies: np.ndarray
    demands: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        self.supplies = np.asarray(self.supplies, dtype=float)
        self.demands = np.asarray(self.demands, dtype=float)
        self.costs = np.asarray(self.costs, dtype=float)
        if self.supplies.ndim != 1 or self.supplies.size < 1:
            raise DimensionMismatch("supplies must be a non-empty vector")
        if self.demands.ndim != 1 or self.demands.size < 1:
            raise DimensionMismatch("demands must be a non-empty vector")
        if self.costs.shape != (self.supplies.size, self.demands.size):
            raise DimensionMismatch(
                f"costs must be {self.supplies.size}x{self.demands.size}, "
                f"got {self.costs.shape}"
            )
        if (self.supplies < 0).any() or (self.demands < 0).any():
            raise ValueError("supplies and demands must be nonnegative")
        if (self.costs < 0).any():
            raise ValueError("costs must be nonnegative")
        total_s = float(self.supplies.sum())
        total_d = float(self.demands.sum())
        if abs(total_s - total_d) > BALANCE_TOL:
            raise InfeasibleBalance(
                f"total supply {total_s!r} != total demand {total_d!r}"
            )
        if abs(total_s - 1.0) > BALANCE_TOL:
            raise InfeasibleBalance(f"total mass must be 1, got {total_s!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.costs.shape


@dataclass
class FlowSolution:
    """A basic solution of a transportation problem.

    ``basis`` lists exactly ``n_sources + n_sinks - 1`` cells forming a
    spanning tree of the bipartite supply/demand graph; every nonzero flow
    lies on a basis cell (zero-flow basis cells mark degeneracy).
    """

    flows: np.ndarray
    basis: list[tuple[int, int]]
    objective: float


@dataclass
class WeightLinearForm:
    """The optimum expressed as a linear function of the weight vector.

    The reduced weight vector is laid out as the ``n_demands`` sink weights
    followed by the first ``n_supplies - 1`` source weights; the final
    source weight corresponds to the dropped redundant constraint.
    The form is valid while the optimal basis stays optimal.
    """

    m_vector: np.ndarray
    n_demands: int
    n_supplies: int

    def evaluate(self, demands: np.ndarray, supplies_truncated: np.ndarray) -> float:
        """Apply the form to a reduced weight vector."""
        demands = np.asarray(demands, dtype=float)
        supplies_truncated = np.asarray(supplies_truncated, dtype=float)
        if demands.shape != (self.n_demands,):
            raise DimensionMismatch(
                f"expected {self.n_demands} demand weights, got {demands.shape}"
            )
        if supplies_truncated.shape != (self.n_supplies - 1,):
            raise DimensionMismatch(
                f"expected {self.n_supplies - 1} truncated supply weights, "
                f"got {supplies_truncated.shape}"
            )
        return float(
            self.m_vector[: self.n_demands] @ demands
            + self.m_vector[self.n_demands :] @ supplies_truncated
        )

    def evaluate_problem(self, problem: TransportProblem) -> float:
        return self.evaluate(problem.demands, problem.supplies[:-1])

    @property
    def demand_part(self) -> np.ndarray:
        """Coefficients multiplying the sink weights (the ones that move)."""
        return self.m_vector[: self.n_demands]


def russell_initial_solution(problem: TransportProblem) -> FlowSolution:
    """Basic feasible starting flow via Russell's approximation.

    Each step allocates to the cell whose cost is most below the sum of its
    row and column maxima, which tends to reduce later pivot counts. Ties
    go to the lexicographically smallest cell.
    """
    costs = problem.costs
    n_t, n_c = costs.shape
    remaining_s = problem.supplies.copy()
    remaining_d = problem.demands.copy()
    row_active = np.ones(n_t, dtype=bool)
    col_active = np.ones(n_c, dtype=bool)
    flows = np.zeros((n_t, n_c))
    basis: list[tuple[int, int]] = []

    while row_active.any() and col_active.any():
        u_bar = np.where(row_active, np.max(np.where(col_active, costs, -np.inf), axis=1), 0.0)
        v_bar = np.where(col_active, np.max(np.where(row_active[:, None], costs, -np.inf), axis=0), 0.0)
        delta = costs - u_bar[:, None] - v_bar[None, :]
        delta[~row_active, :] = np.inf
        delta[:, ~col_active] = np.inf
        i, j = np.unravel_index(int(np.argmin(delta)), delta.shape)

        amount = min(remaining_s[i], remaining_d[j])
        flows[i, j] = amount
        basis.append((int(i), int(j)))
        remaining_s[i] -= amount
        remaining_d[j] -= amount

        row_done = remaining_s[i] <= _RESIDUAL_TOL
        col_done = remaining_d[j] <= _RESIDUAL_TOL
        last = row_active.sum() == 1 and col_active.sum() == 1
        if last:
            row_active[i] = False
            col_active[j] = False
        elif row_done and col_done:
            # Degenerate split: retire the row only, so a later zero
            # allocation in this column keeps the basis at full size.
            row_active[i] = False
            remaining_d[j] = 0.0
        elif row_done:
            row_active[i] = False
        else:
            col_active[j] = False

    _complete_basis(basis, n_t, n_c)
    objective = float((flows * costs).sum())
    return FlowSolution(flows=flows, basis=sorted(basis), objective=objective)


def _complete_basis(basis: list[tuple[int, int]], n_t: int, n_c: int) -> None:
    """Pad ``basis`` in place with acyclic zero-flow cells up to full size."""
    target = n_t + n_c - 1
    if len(basis) >= target:
        return
    parent = list(range(n_t + n_c))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (i, j) in basis:
        parent[find(i)] = find(n_t + j)
    for i in range(n_t):
        if len(basis) == target:
            return
        for j in range(n_c):
            ri, rj = find(i), find(n_t + j)
            if ri != rj:
                parent[ri] = rj
                basis.append((i, j))
                if len(basis) == target:
                    return


def _basis_potentials(
    costs: np.ndarray, basis, n_t: int, n_c: int
) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``cost[u, v] = pot_s[u] + pot_d[v]`` over the basis tree.

    The last supply potential is pinned to zero, matching the dropped
    redundant constraint. Raises SingularBasis if the basis does not
    connect every node (corrupted basis).
    """
    row_adj: list[list[int]] = [[] for _ in range(n_t)]
    col_adj: list[list[int]] = [[] for _ in range(n_c)]
    for (i, j) in basis:
        row_adj[i].append(j)
        col_adj[j].append(i)

    pot_s = np.full(n_t, np.nan)
    pot_d = np.full(n_c, np.nan)
    pot_s[n_t - 1] = 0.0
    stack: list[tuple[bool, int]] = [(True, n_t - 1)]
    while stack:
        is_row, k = stack.pop()
        if is_row:
            for j in row_adj[k]:
                if np.isnan(pot_d[j]):
                    pot_d[j] = costs[k, j] - pot_s[k]
                    stack.append((False, j))
        else:
            for i in col_adj[k]:
                if np.isnan(pot_s[i]):
                    pot_s[i] = costs[i, k] - pot_d[k]
                    stack.append((True, i))
    if np.isnan(pot_s).any() or np.isnan(pot_d).any():
        raise SingularBasis("basis cells do not span all supply/demand nodes")
    return pot_s, pot_d


def _pivot_cycle(
    basis: set[tuple[int, int]], entering: tuple[int, int], n_t: int, n_c: int
) -> list[tuple[int, int]]:
    """Cells of the unique cycle closed by the entering cell.

    The list starts with the entering cell and alternates +/- positions
    around the cycle.
    """
    row_adj: list[list[tuple[int, int]]] = [[] for _ in range(n_t)]
    col_adj: list[list[tuple[int, int]]] = [[] for _ in range(n_c)]
    for cell in basis:
        row_adj[cell[0]].append(cell)
        col_adj[cell[1]].append(cell)

    i0, j0 = entering
    # BFS over the tree from the entering row node to its column node.
    start = (True, i0)
    goal = (False, j0)
    parents: dict[tuple[bool, int], tuple[tuple[bool, int], tuple[int, int]]] = {}
    seen = {start}
    frontier = [start]
    while frontier and goal not in parents:
        nxt: list[tuple[bool, int]] = []
        for node in frontier:
            is_row, k = node
            for cell in row_adj[k] if is_row else col_adj[k]:
                other = (False, cell[1]) if is_row else (True, cell[0])
                if other in seen:
                    continue
                seen.add(other)
                parents[other] = (node, cell)
                nxt.append(other)
        frontier = nxt
    if goal not in parents:
        raise SingularBasis("entering cell closes no cycle; basis is not a tree")

    cycle = [entering]
    node = goal
    while node != start:
        node, cell = parents[node]
        cycle.append(cell)
    return cycle


def transportation_simplex(
    problem: TransportProblem,
    initial: FlowSolution,
    max_pivots: int | None = None,
) -> FlowSolution:
    """Optimize a basic feasible flow to the LP minimum.

    Entering cells are picked by most-negative reduced cost with smallest
    lexicographic index on ties; after half the pivot budget the rule
    switches to Bland's smallest-index rule, which is immune to cycling.
    Zero-flow cells stay in the basis so every pivot keeps full tree size.
    """
    costs = problem.costs
    n_t, n_c = costs.shape
    expected = n_t + n_c - 1
    if len(set(initial.basis)) != expected:
        raise SingularBasis(
            f"initial basis must have {expected} distinct cells, got {len(initial.basis)}"
        )
    flows = initial.flows.copy()
    basis = set(initial.basis)
    cap = max_pivots if max_pivots is not None else 10 * n_t * n_c
    bland_after = cap // 2

    basis_mask = np.zeros((n_t, n_c), dtype=bool)
    for cell in basis:
        basis_mask[cell] = True

    for pivot in range(cap + 1):
        pot_s, pot_d = _basis_potentials(costs, basis, n_t, n_c)
        reduced = costs - pot_s[:, None] - pot_d[None, :]
        reduced[basis_mask] = np.inf
        if pivot >= bland_after:
            negatives = np.argwhere(reduced < -REDUCED_COST_TOL)
            if negatives.size == 0:
                break
            entering = (int(negatives[0][0]), int(negatives[0][1]))
        else:
            flat = int(np.argmin(reduced))
            entering = (flat // n_c, flat % n_c)
            if reduced[entering] >= -REDUCED_COST_TOL:
                break

        cycle = _pivot_cycle(basis, entering, n_t, n_c)
        minus_cells = cycle[1::2]
        theta = min(flows[c] for c in minus_cells)
        leaving = min(c for c in minus_cells if flows[c] <= theta)
        for idx, cell in enumerate(cycle):
            flows[cell] += theta if idx % 2 == 0 else -theta
        flows[leaving] = 0.0
        basis.remove(leaving)
        basis.add(entering)
        basis_mask[leaving] = False
        basis_mask[entering] = True

        if __debug__:
            assert np.allclose(flows.sum(axis=1), problem.supplies, atol=1e-9)
            assert np.allclose(flows.sum(axis=0), problem.demands, atol=1e-9)
            assert flows.min() >= -1e-12
    else:
        raise CycleLimitExceeded(f"no optimum within {cap} pivots")

    np.maximum(flows, 0.0, out=flows)
    objective = float((flows * costs).sum())
    return FlowSolution(flows=flows, basis=sorted(basis), objective=objective)


def solve_emd(problem: TransportProblem, max_pivots: int | None = None) -> FlowSolution:
    """Exact EMD: Russell start followed by the transportation simplex."""
    return transportation_simplex(problem, russell_initial_solution(problem), max_pivots)


def weight_linear_form(
    problem: TransportProblem, optimal: FlowSolution
) -> WeightLinearForm:
    """Express the solved optimum as a linear form in the weights.

    The coefficients are the dual potentials of the optimal basis with the
    last supply potential pinned at zero, ordered as sink potentials
    followed by the first ``n_supplies - 1`` source potentials. Exploits
    the spanning-tree structure, so no matrix inversion is needed.
    """
    n_t, n_c = problem.shape
    if len(set(optimal.basis)) != n_t + n_c - 1:
        raise SingularBasis(
            f"basis must have {n_t + n_c - 1} distinct cells, got {len(optimal.basis)}"
        )
    pot_s, pot_d = _basis_potentials(problem.costs, optimal.basis, n_t, n_c)
    m_vector = np.concatenate([pot_d, pot_s[:-1]])
    return WeightLinearForm(m_vector=m_vector, n_demands=n_c, n_supplies=n_t)


def evaluate_form(
    form: WeightLinearForm, demands: np.ndarray, supplies_truncated: np.ndarray
) -> float:
    """Function-style alias for :meth:`WeightLinearForm.evaluate`."""
    return form.evaluate(demands, supplies_truncated)


# --- text interchange, used by the CLI and for oracle cross-checks ---

def read_problem_text(path) -> TransportProblem:
    """Parse a whitespace-separated problem file.

    Token stream: ``n_sources n_sinks``, then the supplies, the demands,
    and the cost matrix row-major. ``#`` starts a comment.
    """
    tokens: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if len(tokens) < 2:
        raise DimensionMismatch("problem file needs at least the two size tokens")
    n_t, n_c = int(tokens[0]), int(tokens[1])
    need = 2 + n_t + n_c + n_t * n_c
    if len(tokens) != need:
        raise DimensionMismatch(f"expected {need} tokens, got {len(tokens)}")
    values = np.asarray([float(t) for t in tokens[2:]])
    return TransportProblem(
        supplies=values[:n_t],
        demands=values[n_t : n_t + n_c],
        costs=values[n_t + n_c :].reshape(n_t, n_c),
    )


def write_flow_text(path, solution: FlowSolution) -> None:
    """Dump nonzero flow cells, one ``u v f_uv`` line each (0-based)."""
    with open(path, "w", encoding="utf-8") as fh:
        for (i, j) in sorted(zip(*np.nonzero(solution.flows > 0))):
            fh.write(f"{i} {j} {solution.flows[i, j]:.12g}\n")
