import numpy as np
import pytest

from emdtrack.emd import (
    FlowSolution,
    TransportProblem,
    evaluate_form,
    read_problem_text,
    russell_initial_solution,
    solve_emd,
    transportation_simplex,
    weight_linear_form,
    write_flow_text,
)
from emdtrack.errors import (
    CycleLimitExceeded,
    DimensionMismatch,
    InfeasibleBalance,
    SingularBasis,
)

from oracles import (
    enumerate_transport_optimum,
    linprog_transport_optimum,
    random_transport_problem,
)


def _problem(supplies, demands, costs):
    return TransportProblem(
        supplies=np.asarray(supplies, float),
        demands=np.asarray(demands, float),
        costs=np.asarray(costs, float),
    )


def _basis_is_spanning_tree(basis, n_t, n_c):
    if len(set(basis)) != n_t + n_c - 1:
        return False
    parent = list(range(n_t + n_c))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (i, j) in basis:
        ri, rj = find(i), find(n_t + j)
        if ri == rj:
            return False  # cycle
        parent[ri] = rj
    roots = {find(k) for k in range(n_t + n_c)}
    return len(roots) == 1


def _assert_basic_feasible(sol, problem):
    n_t, n_c = problem.shape
    np.testing.assert_allclose(sol.flows.sum(axis=1), problem.supplies, atol=1e-9)
    np.testing.assert_allclose(sol.flows.sum(axis=0), problem.demands, atol=1e-9)
    assert sol.flows.min() >= 0.0
    assert _basis_is_spanning_tree(sol.basis, n_t, n_c)
    basis_set = set(sol.basis)
    for cell in zip(*np.nonzero(sol.flows > 1e-12)):
        assert (int(cell[0]), int(cell[1])) in basis_set
    assert sol.objective == pytest.approx((sol.flows * problem.costs).sum(), abs=1e-9)


# --- problem validation ---

def test_unbalanced_rejected():
    with pytest.raises(InfeasibleBalance):
        _problem([0.6, 0.5], [0.5, 0.5], [[0, 1], [1, 0]])


def test_non_unit_mass_rejected():
    with pytest.raises(InfeasibleBalance):
        _problem([1.0, 1.0], [1.0, 1.0], [[0, 1], [1, 0]])


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        _problem([1.2, -0.2], [0.5, 0.5], [[0, 1], [1, 0]])


def test_shape_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        _problem([0.5, 0.5], [0.5, 0.5], [[0, 1]])


# --- Russell initial solution ---

def test_russell_single_cell():
    sol = russell_initial_solution(_problem([1.0], [1.0], [[5.0]]))
    np.testing.assert_allclose(sol.flows, [[1.0]])
    assert sol.objective == pytest.approx(5.0)


def test_russell_marginals_2x2():
    problem = _problem([0.6, 0.4], [0.5, 0.5], [[0, 1], [1, 0]])
    sol = russell_initial_solution(problem)
    np.testing.assert_allclose(sol.flows.sum(axis=1), [0.6, 0.4])
    np.testing.assert_allclose(sol.flows.sum(axis=0), [0.5, 0.5])
    _assert_basic_feasible(sol, problem)


def test_russell_random_instances_basic_feasible():
    rng = np.random.default_rng(7)
    for _ in range(100):
        supplies, demands, costs = random_transport_problem(rng, max_bins=6)
        problem = _problem(supplies, demands, costs)
        _assert_basic_feasible(russell_initial_solution(problem), problem)


# --- transportation simplex ---

def test_simplex_zero_cost_diagonal():
    weights = np.asarray([0.3, 0.45, 0.25])
    costs = 1.0 - np.eye(3)
    sol = solve_emd(_problem(weights, weights, costs))
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


def test_simplex_2x2_matches_enumeration():
    problem = _problem([0.6, 0.4], [0.5, 0.5], [[0, 1], [1, 0]])
    sol = solve_emd(problem)
    assert sol.objective == pytest.approx(0.1, abs=1e-12)
    expected = enumerate_transport_optimum(problem.supplies, problem.demands, problem.costs)
    assert sol.objective == pytest.approx(expected, abs=1e-12)
    np.testing.assert_allclose(sol.flows, [[0.5, 0.1], [0.0, 0.4]], atol=1e-12)


def test_simplex_small_random_matches_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(40):
        supplies, demands, costs = random_transport_problem(rng, max_bins=3)
        problem = _problem(supplies, demands, costs)
        sol = solve_emd(problem)
        expected = enumerate_transport_optimum(supplies, demands, costs)
        assert sol.objective == pytest.approx(expected, abs=1e-9)
        _assert_basic_feasible(sol, problem)


def test_simplex_random_matches_linprog():
    rng = np.random.default_rng(13)
    for _ in range(60):
        supplies, demands, costs = random_transport_problem(rng, max_bins=6)
        problem = _problem(supplies, demands, costs)
        sol = solve_emd(problem)
        assert sol.objective == pytest.approx(
            linprog_transport_optimum(supplies, demands, costs), abs=1e-9
        )
        _assert_basic_feasible(sol, problem)


def test_simplex_reduced_costs_nonnegative_at_optimum():
    rng = np.random.default_rng(17)
    supplies, demands, costs = random_transport_problem(rng, max_bins=6)
    problem = _problem(supplies, demands, costs)
    sol = solve_emd(problem)
    form = weight_linear_form(problem, sol)
    pot_d = form.m_vector[: problem.shape[1]]
    pot_s = np.append(form.m_vector[problem.shape[1] :], 0.0)
    reduced = problem.costs - pot_s[:, None] - pot_d[None, :]
    assert reduced.min() >= -1e-9


def test_simplex_pivot_cap():
    rng = np.random.default_rng(19)
    for _ in range(20):
        supplies, demands, costs = random_transport_problem(rng, max_bins=5)
        problem = _problem(supplies, demands, costs)
        initial = russell_initial_solution(problem)
        try:
            transportation_simplex(problem, initial, max_pivots=0)
        except CycleLimitExceeded:
            continue  # legitimately needed pivots
        sol = transportation_simplex(problem, initial, max_pivots=0)
        assert sol.objective == pytest.approx(initial.objective, abs=1e-12)


def test_simplex_degenerate_instances_match_oracle():
    # small integer costs and weights force heavy ties and zero-flow basics,
    # exercising the anti-cycling tie-breaks
    rng = np.random.default_rng(37)
    for _ in range(60):
        n_t = int(rng.integers(2, 7))
        n_c = int(rng.integers(2, 7))
        costs = rng.integers(0, 3, size=(n_t, n_c)).astype(float)
        supplies = rng.integers(0, 4, size=n_t).astype(float)
        supplies[0] += 1.0
        supplies /= supplies.sum()
        demands = rng.integers(0, 4, size=n_c).astype(float)
        demands[0] += 1.0
        demands /= demands.sum()
        problem = _problem(supplies, demands, costs)
        sol = solve_emd(problem)
        assert sol.objective == pytest.approx(
            linprog_transport_optimum(supplies, demands, costs), abs=1e-9
        )
        _assert_basic_feasible(sol, problem)
        form = weight_linear_form(problem, sol)
        assert form.evaluate_problem(problem) == pytest.approx(sol.objective, abs=1e-8)


def test_symmetry_via_transpose():
    rng = np.random.default_rng(23)
    for _ in range(25):
        supplies, demands, costs = random_transport_problem(rng, max_bins=5)
        fwd = solve_emd(_problem(supplies, demands, costs))
        rev = solve_emd(_problem(demands, supplies, costs.T))
        assert fwd.objective == pytest.approx(rev.objective, abs=1e-9)


def test_solve_emd_forced_split():
    sol = solve_emd(_problem([1.0], [0.5, 0.5], [[2.0, 4.0]]))
    assert sol.objective == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(sol.flows, [[0.5, 0.5]])


# --- weight linear form ---

def test_form_single_cell():
    problem = _problem([1.0], [1.0], [[5.0]])
    form = weight_linear_form(problem, solve_emd(problem))
    assert form.m_vector.shape == (1,)
    assert form.evaluate([1.0], []) == pytest.approx(5.0)


def test_form_2x2_example():
    problem = _problem([0.6, 0.4], [0.5, 0.5], [[0, 1], [1, 0]])
    form = weight_linear_form(problem, solve_emd(problem))
    assert form.evaluate([0.5, 0.5], [0.6]) == pytest.approx(0.1, abs=1e-12)


def test_form_reproduces_objective_on_random_problems():
    rng = np.random.default_rng(29)
    for _ in range(50):
        supplies, demands, costs = random_transport_problem(rng, max_bins=6)
        problem = _problem(supplies, demands, costs)
        sol = solve_emd(problem)
        form = weight_linear_form(problem, sol)
        assert form.evaluate_problem(problem) == pytest.approx(sol.objective, abs=1e-8)


def test_form_predicts_perturbed_optimum():
    # Local linearity: while the basis stays optimal, re-solving at nudged
    # weights must agree with the linear form exactly.
    rng = np.random.default_rng(31)
    checked = 0
    while checked < 20:
        supplies, demands, costs = random_transport_problem(rng, max_bins=5)
        if len(supplies) < 2 or len(demands) < 2:
            continue
        problem = _problem(supplies, demands, costs)
        sol = solve_emd(problem)
        form = weight_linear_form(problem, sol)
        delta_s = rng.normal(0, 1e-6, len(supplies))
        delta_s -= delta_s.mean()
        delta_d = rng.normal(0, 1e-6, len(demands))
        delta_d -= delta_d.mean()
        new_s, new_d = supplies + delta_s, demands + delta_d
        if new_s.min() <= 0 or new_d.min() <= 0:
            continue
        perturbed = _problem(new_s, new_d, costs)
        resolved = solve_emd(perturbed)
        predicted = form.evaluate(new_d, new_s[:-1])
        assert predicted == pytest.approx(resolved.objective, abs=1e-8)
        checked += 1


def test_form_rejects_corrupted_basis():
    problem = _problem([0.6, 0.4], [0.5, 0.5], [[0, 1], [1, 0]])
    sol = solve_emd(problem)
    truncated = FlowSolution(sol.flows, sol.basis[:-1], sol.objective)
    with pytest.raises(SingularBasis):
        weight_linear_form(problem, truncated)
    disconnected = FlowSolution(
        sol.flows, [(0, 0), (0, 1), (0, 1)], sol.objective
    )
    with pytest.raises(SingularBasis):
        weight_linear_form(problem, disconnected)


# --- evaluate_form ---

def test_evaluate_form_linearity():
    problem = _problem([0.6, 0.4], [0.5, 0.5], [[0, 1], [1, 0]])
    form = weight_linear_form(problem, solve_emd(problem))
    assert evaluate_form(form, [0.0, 0.0], [0.0]) == 0.0
    base = evaluate_form(form, [0.5, 0.5], [0.6])
    assert evaluate_form(form, [1.0, 1.0], [1.2]) == pytest.approx(2 * base)


def test_evaluate_form_dimension_mismatch():
    problem = _problem([0.6, 0.4], [0.5, 0.5], [[0, 1], [1, 0]])
    form = weight_linear_form(problem, solve_emd(problem))
    with pytest.raises(DimensionMismatch):
        form.evaluate([0.5, 0.5, 0.5], [0.6])
    with pytest.raises(DimensionMismatch):
        form.evaluate([0.5, 0.5], [0.6, 0.4])


# --- text interchange ---

def test_problem_file_round_trip(tmp_path):
    path = tmp_path / "problem.txt"
    path.write_text(
        "# 2x2 instance\n"
        "2 2\n"
        "0.6 0.4\n"
        "0.5 0.5\n"
        "0 1\n"
        "1 0\n"
    )
    problem = read_problem_text(path)
    sol = solve_emd(problem)
    assert sol.objective == pytest.approx(0.1)
    dump = tmp_path / "flows.txt"
    write_flow_text(dump, sol)
    lines = dump.read_text().strip().splitlines()
    parsed = {(int(a), int(b)): float(f) for a, b, f in (ln.split() for ln in lines)}
    assert parsed == {(0, 0): pytest.approx(0.5), (0, 1): pytest.approx(0.1),
                      (1, 1): pytest.approx(0.4)}
