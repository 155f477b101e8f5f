"""Walk through the exact EMD solver and its weight sensitivities.

Builds a small transportation problem, solves it with Russell's start plus
the transportation simplex, and shows how the optimum becomes a linear
function of the histogram weights while the optimal basis holds.
"""

import numpy as np

from emdtrack import (
    TransportProblem,
    russell_initial_solution,
    solve_emd,
    weight_linear_form,
)

problem = TransportProblem(
    supplies=np.asarray([0.6, 0.4]),
    demands=np.asarray([0.5, 0.5]),
    costs=np.asarray([[0.0, 1.0], [1.0, 0.0]]),
)
print("supplies:", problem.supplies)
print("demands: ", problem.demands)
print("costs:\n", problem.costs)

initial = russell_initial_solution(problem)
print("\nRussell start objective:", initial.objective)
print("start flows:\n", initial.flows)

solution = solve_emd(problem)
print("\noptimal objective (EMD):", solution.objective)
print("optimal flows:\n", solution.flows)
print("basis cells:", solution.basis)

form = weight_linear_form(problem, solution)
print("\nsensitivity vector M:", form.m_vector)
print("M . [w_sinks, w_sources[:-1]] =", form.evaluate_problem(problem))

# While the basis stays optimal the form predicts re-solved optima exactly.
rng = np.random.default_rng(0)
print("\nperturbation checks (prediction vs re-solve):")
for _ in range(3):
    delta_s = rng.normal(0, 1e-4, 2)
    delta_s -= delta_s.mean()
    delta_d = rng.normal(0, 1e-4, 2)
    delta_d -= delta_d.mean()
    nudged = TransportProblem(
        supplies=problem.supplies + delta_s,
        demands=problem.demands + delta_d,
        costs=problem.costs,
    )
    predicted = form.evaluate(nudged.demands, nudged.supplies[:-1])
    resolved = solve_emd(nudged).objective
    print(f"  predicted {predicted:.10f}   resolved {resolved:.10f}   "
          f"diff {abs(predicted - resolved):.2e}")

# Larger random instance: sanity-check feasibility and optimality behavior.
rng = np.random.default_rng(1)
supplies = rng.random(5) + 0.1
supplies /= supplies.sum()
demands = rng.random(4) + 0.1
demands /= demands.sum()
costs = rng.uniform(0, 10, (5, 4))
big = TransportProblem(supplies=supplies, demands=demands, costs=costs)
big_sol = solve_emd(big)
print(f"\n5x4 random instance: EMD = {big_sol.objective:.6f}, "
      f"{len(big_sol.basis)} basis cells, "
      f"row-sum error {abs(big_sol.flows.sum(axis=1) - supplies).max():.1e}")
