import numpy as np
import pytest

from cubesolver import cube, mcts
from cubesolver import network as nn
from cubesolver.cube import Move


@pytest.fixture(scope="module")
def params():
    return nn.init_params(nn.DESK_NETWORK, 0)


def capped(n, **kw):
    return mcts.SearchConfig(time_limit=None, max_simulations=n, **kw)


def tree_graph(tree):
    states = {}
    pairs = []
    for p, _, c in tree.edges():
        pairs.append((states.setdefault(p, len(states)), states.setdefault(c, len(states))))
    return states, pairs


def all_pairs_distance(states, pairs):
    """Floyd-Warshall over the merged undirected state graph of a tree."""
    n = len(states)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0)
    for i, j in pairs:
        dist[i, j] = dist[j, i] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def test_select_action_formula():
    node = mcts.SearchNode(cube.SOLVED, [1 / 12] * 12, 0.0)
    node.N = [0] * 12
    node.W = [0.0] * 12
    node.L = [0.0] * 12
    cfg = mcts.SearchConfig()
    assert mcts.select_action(node, cfg) == Move(0)  # all tied
    node.W[5] = 0.3
    assert mcts.select_action(node, cfg) == Move(5)
    node.L[5] = 1.0
    assert mcts.select_action(node, cfg) != Move(5)
    node = mcts.SearchNode(cube.SOLVED, [0.0] * 11 + [1.0], 0.0)
    node.N = [1] * 12
    node.W = [0.0] * 12
    node.L = [0.0] * 12
    assert mcts.select_action(node, cfg) == Move(11)
    # U(a) = c * P(a) * sqrt(sum N) / (1 + N(a))
    node.W = [0.0] * 11 + [-4 * np.sqrt(12) / 2 + 1e-9]
    assert mcts.select_action(node, cfg) == Move(11)
    node.W[11] -= 2e-9
    assert mcts.select_action(node, cfg) == Move(0)


def test_config_validation():
    with pytest.raises(ValueError):
        mcts.SearchConfig(exploration_c=0).validate()
    with pytest.raises(ValueError):
        mcts.SearchConfig(time_limit=None).validate()
    with pytest.raises(ValueError):
        mcts.SearchConfig(worker_count=0).validate()


def test_solved_start_returns_empty(params):
    r = mcts.solve(cube.SOLVED, params, capped(10))
    assert r.solved and r.solution == [] and r.simulations == 0


def test_adjacent_start_solves_in_one_move(params):
    for m in cube.MOVES:
        s = cube.apply_move(cube.SOLVED, m)
        r = mcts.solve(s, params, capped(500))
        assert r.solved
        assert r.solution == [m.inverse]


def test_goal_child_check_finishes_early(params):
    s = cube.apply_moves(cube.SOLVED, cube.parse_moves("R U"))
    plain = mcts.solve(s, params, capped(5000))
    early = mcts.solve(s, params, capped(5000, check_children_for_goal=True))
    assert plain.solved and early.solved
    assert early.simulations <= plain.simulations
    assert early.solution == cube.parse_moves("U' R'")


def test_unsolved_search_respects_budget(params):
    s, _ = cube.scramble(20, 0)
    r = mcts.solve(s, params, capped(200))
    assert not r.solved
    assert r.solution == [] and r.naive_path == []
    assert r.simulations == 200
    r = mcts.solve(s, params, mcts.SearchConfig(time_limit=0.2))
    assert not r.solved
    assert r.wall_time < 1.0


def test_record_fields(params):
    s = cube.apply_move(cube.SOLVED, Move.U)
    rec = mcts.solve(s, params, capped(100)).to_record()
    assert rec["solution"] == "U'"
    assert rec["solution_length"] == 1
    assert rec["meta_exploration_c"] == 4.0


def test_tree_children_are_lazy(params):
    s, _ = cube.scramble(10, 3)
    tree = mcts.SearchTree(s, params, capped(50))
    for _ in range(30):
        tree.simulate()
    nodes = list(tree.iter_nodes())
    assert tree.nodes_expanded == sum(n.expanded for n in nodes)
    assert len(nodes) <= 1 + 30
    for n in nodes:
        if n.expanded:
            assert len(n.child_states) == 12
            assert sum(c is not None for c in n.children) <= 12
            for a, c in enumerate(n.children):
                if c is not None:
                    assert c.state == cube.apply_move(n.state, a)


def test_backup_is_max_and_counts_match(params):
    s, _ = cube.scramble(8, 4)
    tree = mcts.SearchTree(s, params, capped(100))
    leaf_values = []
    for _ in range(40):
        out = tree.simulate()
        leaf_values.append((out.path[0][1], out.value))
    root = tree.root
    for a in range(12):
        seen = [v for b, v in leaf_values if b == a]
        assert root.N[a] == len(seen)
        assert root.W[a] == (max([0.0] + seen))
    assert sum(root.N) == tree.simulations == 40


def test_extracted_path_is_shortest_in_tree(params):
    checked = 0
    rng = np.random.default_rng(0)
    while checked < 15:
        s, _ = cube.scramble(int(rng.integers(2, 5)), rng)
        if cube.is_solved(s):
            continue
        search = mcts.Search(s, params, capped(400))
        r = search.run()
        if not r.solved:
            continue
        states, pairs = tree_graph(search.tree)
        if len(states) > 500:
            continue
        dist = all_pairs_distance(states, pairs)
        assert len(r.solution) == dist[states[s], states[cube.SOLVED]]
        assert len(r.solution) <= len(r.naive_path)
        assert cube.is_solved(cube.apply_moves(s, r.solution))
        assert cube.is_solved(cube.apply_moves(s, r.naive_path))
        checked += 1


def test_extract_on_tree_without_goal_raises(params):
    s, _ = cube.scramble(15, 2)
    tree = mcts.SearchTree(s, params, capped(10))
    for _ in range(5):
        tree.simulate()
    with pytest.raises(mcts.InconsistentTreeError):
        mcts.extract_shortest_path(tree)


def check_virtual_loss(search):
    tree = search.tree
    for node in tree.iter_nodes():
        if node.expanded:
            assert all(L == 0.0 for L in node.L)
    assert sum(tree.root.N) == tree.simulations


@pytest.mark.parametrize("workers", [1, 4, 16])
def test_virtual_loss_conservation(params, workers):
    for seed in range(3):
        s, _ = cube.scramble(12, seed)
        search = mcts.Search(s, params, capped(300, worker_count=workers))
        r = search.run()
        assert r.simulations == 300
        check_virtual_loss(search)


def test_parallel_solve_replays(params):
    s = cube.apply_moves(cube.SOLVED, cube.parse_moves("F R"))
    r = mcts.solve(s, params, capped(5000, worker_count=4))
    assert r.solved
    assert cube.is_solved(cube.apply_moves(s, r.solution))
    assert len(r.solution) == 2


def test_single_worker_is_deterministic(params):
    s, _ = cube.scramble(3, 9)
    a = mcts.solve(s, params, capped(3000))
    b = mcts.solve(s, params, capped(3000))
    assert a.solution == b.solution and a.naive_path == b.naive_path
    assert a.simulations == b.simulations


# --- greedy ---------------------------------------------------------------------

def test_lookahead_depth_one_matches_targets(params):
    from cubesolver import adi
    s, _ = cube.scramble(6, 1)
    scores = mcts.lookahead_scores(params, s, 1)
    yv, yp = adi.make_targets(params, s.to_array()[None, :])
    assert np.isclose(scores.max(), yv[0]) and scores.argmax() == yp[0]


def test_lookahead_depth_two_by_enumeration(params):
    s, _ = cube.scramble(6, 1)
    scores = mcts.lookahead_scores(params, s, 2)
    for a in range(12):
        child = cube.apply_move(s, a)
        inner = mcts.lookahead_scores(params, child, 1).max()
        assert np.isclose(scores[a], -1.0 + inner)
    with pytest.raises(ValueError):
        mcts.lookahead_scores(params, s, 0)


def test_greedy_solves_adjacent_states(params):
    for m in cube.MOVES:
        r = mcts.greedy_solve(cube.apply_move(cube.SOLVED, m), params)
        assert r.solved and r.solution == [m.inverse]


def test_greedy_move_limit(params):
    s, _ = cube.scramble(20, 5)
    r = mcts.greedy_solve(s, params, move_limit=4)
    assert len(r.naive_path) <= 4
    if not r.solved:
        assert r.solution == []


def test_select_prefers_unvisited_action():
    node = mcts.SearchNode(cube.SOLVED, [1 / 12] * 12, 0.0)
    node.N = [1] + [0] * 11
    node.W = [0.0] * 12
    node.L = [0.0] * 12
    assert mcts.select_action(node, mcts.SearchConfig(exploration_c=1.0)) != Move(0)


def test_first_simulation_expands_root(params):
    tree = mcts.SearchTree(cube.scramble(9, 1)[0], params, capped(10))
    out = tree.simulate()
    root = tree.root
    assert root.expanded and len(root.child_states) == 12
    assert np.isclose(sum(root.child_priors[0]), 1.0)
    a = out.path[0][1]
    assert root.N[a] == 1 and sum(root.N) == 1
    assert all(L == 0 for L in root.L)
