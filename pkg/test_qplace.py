#!/usr/bin/env python3
"""
Tests for the SA-Q-learning engine: action selection, updates, annealing,
sessions and Q-table persistence
"""
import math

import numpy as np
import pytest

from skyfair.core.errors import ConfigurationError, QTableIncompatibleError, QTableParseError, StateError
from skyfair.models import Action, Lattice, LearnParams, NetworkState
from skyfair.services.objective import PlacementObjective
from skyfair.services.qplace import (
    QTable,
    apply_action,
    dumps_qtable,
    climb_fairness,
    extract_placement,
    greedy_rollout,
    initial_cell,
    inspect_qtable,
    load_qtable,
    loads_qtable,
    metropolis_accept,
    psi_schedule,
    q_update,
    rollout_path,
    run_session,
    save_qtable,
    select_action_epsilon,
    select_action_metropolis,
)

GRID = Lattice(x_min=0.0, y_min=0.0, h_min=10.0, upsilon=10.0, nx=5, ny=5, nz=2)
CHAIN = Lattice(x_min=0.0, y_min=0.0, h_min=10.0, upsilon=1.0, nx=4, ny=1, nz=1)


def _frozen_state(scenario) -> NetworkState:
    users = np.asarray(scenario.user_positions, dtype=float)
    n = users.shape[0]
    return NetworkState(
        positions=users,
        destinations=users.copy(),
        speeds=np.ones(n),
        arrived=np.zeros(n, dtype=bool),
        destination_kind=np.full(n, -1),
    )


def test_metropolis_accepts_half_at_psi_ln2():
    rng = np.random.default_rng(0)
    psi = 10.0
    hits = sum(metropolis_accept(-psi * math.log(2.0), psi, rng) for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(0.5, abs=0.01)


def test_metropolis_always_accepts_equal_q():
    rng = np.random.default_rng(1)
    assert all(metropolis_accept(0.0, 10.0, rng) for _ in range(10_000))
    assert all(metropolis_accept(5.0, 1e-6, rng) for _ in range(100))


def test_metropolis_frozen_rejects_worse():
    rng = np.random.default_rng(2)
    hits = sum(metropolis_accept(-1.0, 1e-6, rng) for _ in range(100_000))
    assert hits / 100_000 < 1e-4


def test_select_metropolis_with_equal_values_is_uniform():
    q = QTable(GRID)
    rng = np.random.default_rng(3)
    picks = np.bincount([select_action_metropolis(q, (2, 2, 0), 10.0, rng) for _ in range(60_000)], minlength=6)
    np.testing.assert_allclose(picks / 60_000, np.full(6, 1 / 6), atol=0.01)


def test_select_metropolis_cold_is_greedy():
    q = QTable(GRID)
    q.set((2, 2, 0), Action.MINUS_Y, 3.0)
    rng = np.random.default_rng(4)
    picks = {select_action_metropolis(q, (2, 2, 0), 1e-9, rng) for _ in range(500)}
    assert picks == {Action.MINUS_Y}


def test_epsilon_greedy_extremes():
    q = QTable(GRID)
    q.set((1, 1, 1), Action.PLUS_Z, 1.0)
    rng = np.random.default_rng(5)
    assert all(select_action_epsilon(q, (1, 1, 1), 0.0, rng) == Action.PLUS_Z for _ in range(1000))
    picks = np.bincount([select_action_epsilon(q, (1, 1, 1), 1.0, rng) for _ in range(60_000)], minlength=6)
    np.testing.assert_allclose(picks / 60_000, np.full(6, 1 / 6), atol=0.01)
    greedy = sum(select_action_epsilon(q, (1, 1, 1), 0.1, rng) == Action.PLUS_Z for _ in range(60_000))
    assert greedy / 60_000 == pytest.approx(0.9 + 0.1 / 6, abs=0.01)


def test_ties_break_to_lowest_action():
    q = QTable(GRID)
    q.set((0, 0, 0), Action.MINUS_X, 2.0)
    q.set((0, 0, 0), Action.PLUS_Z, 2.0)
    assert q.best_action((0, 0, 0)) == Action.MINUS_X


def test_apply_action_moves_and_clamps():
    assert apply_action(GRID, (2, 2, 0), Action.PLUS_X) == (3, 2, 0)
    assert apply_action(GRID, (4, 2, 0), Action.PLUS_X) == (4, 2, 0)
    assert apply_action(GRID, (2, 2, 0), Action.MINUS_Z) == (2, 2, 0)
    neighbours = {apply_action(GRID, (2, 2, 1), a) for a in Action}
    assert len(neighbours) == 6  # +z clamps back onto the start cell
    assert (2, 2, 1) in neighbours
    interior = Lattice(x_min=0, y_min=0, h_min=10, upsilon=10, nx=3, ny=3, nz=3)
    assert len({apply_action(interior, (1, 1, 1), a) for a in Action}) == 6


def test_q_update_arithmetic():
    q = QTable(GRID)
    q_update(q, (0, 0, 0), Action.PLUS_X, 5.0, (1, 0, 0), alpha=0.5, eta=0.9)
    assert q.get((0, 0, 0), Action.PLUS_X) == pytest.approx(2.5)
    assert q.visits((0, 0, 0), Action.PLUS_X) == 1

    q = QTable(GRID)
    q.set((0, 0, 0), Action.PLUS_X, 2.0)
    q.set((1, 0, 0), Action.PLUS_Y, 2.0)
    q_update(q, (0, 0, 0), Action.PLUS_X, 0.0, (1, 0, 0), alpha=0.5, eta=0.9)
    assert q.get((0, 0, 0), Action.PLUS_X) == pytest.approx(1.9)


def test_printed_update_form_matches_on_empty_table():
    a, b = QTable(GRID), QTable(GRID)
    q_update(a, (0, 0, 0), Action.PLUS_X, 5.0, (1, 0, 0), 0.5, 0.9, form="standard")
    q_update(b, (0, 0, 0), Action.PLUS_X, 5.0, (1, 0, 0), 0.5, 0.9, form="printed")
    assert a == b


def test_q_update_rejects_non_finite_reward():
    with pytest.raises(StateError):
        q_update(QTable(GRID), (0, 0, 0), Action.PLUS_X, float("nan"), (1, 0, 0), 0.5, 0.9)


def test_q_values_stay_bounded():
    rng = np.random.default_rng(6)
    q = QTable(GRID)
    params = LearnParams()
    eta, r_max = params.eta, 3.0
    s = (0, 0, 0)
    for _ in range(5000):
        a = Action(int(rng.integers(6)))
        nxt = apply_action(GRID, s, a)
        q_update(q, s, a, float(rng.uniform(-r_max, r_max)), nxt, params.learning_rate(q.visits(s, a)), eta)
        s = nxt
    assert max(abs(v) for _, _, v, _ in q.rows()) <= r_max / (1 - eta) + 1e-9


def test_psi_decays_geometrically():
    psi = psi_schedule(10.0, 0.99, 10_001)
    assert psi[:3] == pytest.approx([10.0, 9.9, 9.801])
    n = np.arange(10_001)
    np.testing.assert_allclose(psi, 10.0 * 0.99**n, rtol=1e-12)


def test_session_temperature_and_trace(tiny_scenario):
    params = LearnParams(episodes=3, steps_per_episode=7)
    q = QTable(Lattice.from_config(tiny_scenario.config))
    out = run_session(q, tiny_scenario, _frozen_state(tiny_scenario), params, np.random.default_rng(0))
    assert len(out.trace) == 21
    assert out.psi_final == pytest.approx(params.psi0 * params.lambda_**21, rel=1e-12)
    assert q.lattice.contains(out.best_cell)
    assert sum(v for _, _, _, v in q.rows()) == 21


def test_session_requires_work(tiny_scenario):
    q = QTable(Lattice.from_config(tiny_scenario.config))
    with pytest.raises(ConfigurationError):
        run_session(q, tiny_scenario, _frozen_state(tiny_scenario), LearnParams(episodes=0), np.random.default_rng(0))


def test_session_finds_peak_above_single_user(tiny_scenario):
    # exhaustive scoring of the 9 cells puts the peak at (2, 2, 0)
    params = LearnParams(episodes=200, steps_per_episode=10)
    state = _frozen_state(tiny_scenario)
    objective = PlacementObjective(tiny_scenario, state.positions)
    hits = 0
    for seed in range(20):
        q = QTable(objective.lattice)
        out = run_session(q, tiny_scenario, state, params, np.random.default_rng(seed), objective=objective)
        hits += out.best_cell == (2, 2, 0)
    assert hits >= 18


def test_flat_field_returns_a_valid_cell(tiny_scenario):
    class Flat(PlacementObjective):
        def evaluate(self, aerial_pos=None, cache=True):
            score = super().evaluate(aerial_pos, cache)
            score.terms = score.terms.model_copy(update={"theta": 1.0, "omega": 0.0, "beta": 0.0})
            return score

    state = _frozen_state(tiny_scenario)
    objective = Flat(tiny_scenario, state.positions)
    q = QTable(objective.lattice)
    params = LearnParams(episodes=5, steps_per_episode=5)
    out = run_session(q, tiny_scenario, state, params, np.random.default_rng(1), objective=objective)
    assert objective.lattice.contains(out.best_cell)
    assert all(t.r == 0.0 for t in out.trace)


def test_initial_cell_sits_above_anchor(desk_scenario):
    lattice = Lattice.from_config(desk_scenario.config)
    cell = initial_cell(desk_scenario, lattice)
    assert cell[2] == 0
    center = lattice.center(cell)
    x, y = desk_scenario.anchor.position
    assert abs(center[0] - x) <= lattice.upsilon / 2 + 1e-9
    assert abs(center[1] - y) <= lattice.upsilon / 2 + 1e-9


def test_greedy_rollout_stops_at_fixed_point(tiny_scenario):
    state = _frozen_state(tiny_scenario)
    objective = PlacementObjective(tiny_scenario, state.positions)
    q = QTable(objective.lattice)
    q.set((0, 0, 0), Action.PLUS_X, 1.0)
    q.set((1, 0, 0), Action.PLUS_Y, 1.0)
    q.set((1, 1, 0), Action.PLUS_X, 1.0)
    q.set((2, 1, 0), Action.PLUS_Y, 1.0)
    # from (2, 2, 0) the greedy +x clamps in place
    cell, score = greedy_rollout(q, objective, (0, 0, 0))
    assert cell == (2, 2, 0)
    assert score is objective.evaluate_cell((2, 2, 0))


class _Lured(PlacementObjective):
    """Puts a huge SINR sum on one cell so the shaped reward points away from the fairness peak"""
    lure = (0, 0, 0)

    def evaluate(self, aerial_pos=None, cache=True):
        score = super().evaluate(aerial_pos, cache)
        if aerial_pos is not None and self.lattice.cell_of(aerial_pos) == self.lure:
            score.terms = score.terms.model_copy(update={"omega": 1e12})
        return score


def test_rollout_ranks_by_fairness_not_potential(tiny_scenario):
    state = _frozen_state(tiny_scenario)
    objective = _Lured(tiny_scenario, state.positions)
    q = QTable(objective.lattice)
    q.set((0, 0, 0), Action.PLUS_X, 1.0)
    q.set((1, 0, 0), Action.PLUS_Y, 1.0)
    q.set((1, 1, 0), Action.PLUS_X, 1.0)
    q.set((2, 1, 0), Action.PLUS_Y, 1.0)
    assert rollout_path(q, (0, 0, 0)) == [(0, 0, 0), (1, 0, 0), (1, 1, 0), (2, 1, 0), (2, 2, 0)]
    delta1 = tiny_scenario.config.delta1
    assert objective.evaluate_cell((0, 0, 0)).potential(delta1) > objective.evaluate_cell((2, 2, 0)).potential(delta1)
    cell, _ = greedy_rollout(q, objective, (0, 0, 0))
    assert cell == (2, 2, 0)


def test_session_placement_ignores_sinr_lure(tiny_scenario):
    state = _frozen_state(tiny_scenario)
    objective = _Lured(tiny_scenario, state.positions)
    params = LearnParams(episodes=50, steps_per_episode=10)
    for seed in range(5):
        q = QTable(objective.lattice)
        out = run_session(q, tiny_scenario, state, params, np.random.default_rng(seed), objective=objective)
        assert out.best_cell == (2, 2, 0)


def test_climb_reaches_the_peak(tiny_scenario):
    objective = PlacementObjective(tiny_scenario, _frozen_state(tiny_scenario).positions)
    cell, score = climb_fairness(objective, (0, 0, 0))
    assert cell == (2, 2, 0)
    assert score is objective.evaluate_cell((2, 2, 0))
    assert climb_fairness(objective, (2, 2, 0))[0] == (2, 2, 0)


def test_extracted_placement_never_ranks_below_its_starts(desk_scenario, desk_users):
    objective = PlacementObjective(desk_scenario, desk_users)
    q = QTable(objective.lattice)
    start = initial_cell(desk_scenario, objective.lattice)
    incumbent = (19, 0, 9)
    cell, score = extract_placement(q, objective, start, np.random.default_rng(0), restarts=3, incumbent=incumbent)
    assert objective.rank(cell) <= objective.rank(incumbent)
    assert objective.rank(cell) <= objective.rank(greedy_rollout(q, objective, start)[0])
    assert score is objective.evaluate_cell(cell)


def test_extraction_without_restarts_draws_nothing(tiny_scenario):
    objective = PlacementObjective(tiny_scenario, _frozen_state(tiny_scenario).positions)
    rng = np.random.default_rng(9)
    before = rng.bit_generator.state
    extract_placement(QTable(objective.lattice), objective, (0, 0, 0), rng)
    assert rng.bit_generator.state == before


def test_session_records_each_episode(tiny_scenario):
    params = LearnParams(episodes=4, steps_per_episode=5)
    q = QTable(Lattice.from_config(tiny_scenario.config))
    out = run_session(q, tiny_scenario, _frozen_state(tiny_scenario), params, np.random.default_rng(2))
    assert len(out.episode_rewards) == 4
    assert sum(out.episode_rewards) == pytest.approx(out.session_reward)
    assert out.episode_cells == sorted(out.episode_cells)
    assert out.episode_cells[-1] == out.cells_visited


def _chain_reward(s, s_next):
    return 1.0 if (s[0], s_next[0]) == (2, 3) else 0.0


def _chain_optimum(eta):
    q_star = np.zeros((4, 6))
    for _ in range(2000):
        v = q_star.max(axis=1)
        for ix in range(4):
            for a in Action:
                nxt = apply_action(CHAIN, (ix, 0, 0), a)
                q_star[ix, a] = _chain_reward((ix, 0, 0), nxt) + eta * v[nxt[0]]
    return q_star


def _chain_learn(policy, seed, updates=100_000):
    params = LearnParams(alpha_exponent=0.3, psi0=10.0, lambda_=0.99999, epsilon=0.5)
    rng = np.random.default_rng(seed)
    q = QTable(CHAIN)
    psi = params.psi0
    s = (0, 0, 0)
    for t in range(updates):
        if t % 10 == 0:
            s = (int(rng.integers(4)), 0, 0)
        if policy == "metropolis":
            a = select_action_metropolis(q, s, psi, rng)
        else:
            a = select_action_epsilon(q, s, params.epsilon, rng)
        nxt = apply_action(CHAIN, s, a)
        q_update(q, s, a, _chain_reward(s, nxt), nxt, params.learning_rate(q.visits(s, a)), params.eta)
        psi *= params.lambda_
        s = nxt
    return np.array([q.values((ix, 0, 0)) for ix in range(4)])


@pytest.mark.parametrize("policy", ["metropolis", "epsilon_greedy"])
def test_chain_convergence_single_seed(policy):
    q_star = _chain_optimum(0.9)
    assert np.abs(_chain_learn(policy, seed=0) - q_star).max() < 0.01


@pytest.mark.slow
@pytest.mark.parametrize("policy", ["metropolis", "epsilon_greedy"])
def test_chain_convergence_all_seeds(policy):
    q_star = _chain_optimum(0.9)
    for seed in range(20):
        assert np.abs(_chain_learn(policy, seed) - q_star).max() < 0.01


# --- persistence ---------------------------------------------------------


def _sample_table():
    q = QTable(GRID)
    q.set((0, 0, 0), Action.PLUS_X, 0.1 + 0.2, visits=3)
    q.set((4, 4, 1), Action.MINUS_Z, -1e-300, visits=1)
    q.set((2, 3, 0), Action.PLUS_Y, 123456.789, visits=7)
    return q


def test_qtable_round_trip_is_exact(tmp_path):
    q = _sample_table()
    path = save_qtable(q, tmp_path / "saq.qtable")
    loaded = load_qtable(path, GRID)
    assert loaded == q
    assert loaded.get((0, 0, 0), Action.PLUS_X) == 0.1 + 0.2
    assert path.read_text() == dumps_qtable(loaded)


def test_qtable_file_layout():
    lines = dumps_qtable(_sample_table()).splitlines()
    assert lines[0] == "QTABLE v1"
    assert lines[1] == "lattice 0.0 0.0 10.0 10.0 5 5 2"
    assert lines[2] == "0,0,0,+x,0.30000000000000004,3"
    assert lines[-1] == "4,4,1,-z,-1e-300,1"


def test_empty_table_round_trip(tmp_path):
    path = save_qtable(QTable(GRID), tmp_path / "empty.qtable")
    assert len(load_qtable(path, GRID)) == 0
    summary = inspect_qtable(path)
    assert summary.header == "QTABLE v1" and summary.rows == 0


def test_mismatched_lattice_is_refused(tmp_path):
    path = save_qtable(_sample_table(), tmp_path / "saq.qtable")
    coarse = GRID.model_copy(update={"upsilon": 20.0})
    with pytest.raises(QTableIncompatibleError):
        load_qtable(path, coarse)


def test_unknown_schema_version_is_refused():
    with pytest.raises(QTableIncompatibleError):
        loads_qtable("QTABLE v2\nlattice 0.0 0.0 10.0 10.0 5 5 2\n")


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("", 1),
        ("hello\n", 1),
        ("QTABLE v1\nlattice 0 0\n", 2),
        ("QTABLE v1\nlattice 0.0 0.0 10.0 10.0 5 5 2\n0,0,0,+x,1.0\n", 3),
        ("QTABLE v1\nlattice 0.0 0.0 10.0 10.0 5 5 2\n0,0,0,+x,1.0,1\n9,0,0,+x,1.0,1\n", 4),
        ("QTABLE v1\nlattice 0.0 0.0 10.0 10.0 5 5 2\n0,0,0,up,1.0,1\n", 3),
        ("QTABLE v1\nlattice 0.0 0.0 10.0 10.0 5 5 2\n0,0,0,+x,inf,1\n", 3),
        ("QTABLE v1\nlattice 0.0 0.0 10.0 10.0 5 5 2\n0,0,0,+x,1.0,1\n0,0,0,+x,2.0,1\n", 4),
    ],
)
def test_corrupt_files_report_line(text, line_no):
    with pytest.raises(QTableParseError) as exc:
        loads_qtable(text)
    assert exc.value.line_no == line_no
