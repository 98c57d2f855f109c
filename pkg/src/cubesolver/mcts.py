"""Network-guided Monte Carlo tree search with virtual loss and max backup.

Each expanded node keeps, per action, a visit count N, the best leaf value
seen through that action W, the virtual loss L currently charged to it, and
the prior P from the policy head.  Actions are chosen by argmax of

    U(a) + Q(a),   U(a) = c P(a) sqrt(sum N) / (1 + N(a)),   Q(a) = W(a) - L(a)

A search stops once a simulation's leaf is the solved cube; the reported
solution is then the shortest path through everything the tree touched, with
equal states merged, rather than the (usually longer) winning simulation path.
"""

from __future__ import annotations

import math
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import adi
from . import cube
from . import network as nn
from .cube import CubeState, Move


@dataclass
class SearchConfig:
    exploration_c: float = 4.0
    virtual_loss_nu: float = 1.0
    time_limit: float | None = 60.0
    max_simulations: int | None = None
    worker_count: int = 1
    # Finish as soon as an expansion materializes the solved child.
    check_children_for_goal: bool = False

    def validate(self) -> None:
        if self.exploration_c <= 0:
            raise ValueError("exploration_c must be > 0")
        if self.virtual_loss_nu < 0:
            raise ValueError("virtual_loss_nu must be >= 0")
        if self.time_limit is None and self.max_simulations is None:
            raise ValueError("need a time limit or a simulation cap")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")


class SearchNode:
    """One state in the tree.

    Children are known (state, prior, value) as soon as the node is expanded,
    but the child node objects are only built when a simulation first walks
    into them.
    """

    __slots__ = (
        "state", "prior", "value",
        "N", "W", "L",
        "children", "child_states", "child_priors", "child_values",
        "expanded", "claimed",
    )

    def __init__(self, state: CubeState, prior, value: float):
        self.state = state
        self.prior = prior
        self.value = value
        self.N = self.W = self.L = None
        self.children = None
        self.child_states = None
        self.child_priors = None
        self.child_values = None
        self.expanded = False
        self.claimed = False

    def child(self, a: int) -> "SearchNode":
        node = self.children[a]
        if node is None:
            node = SearchNode(self.child_states[a], self.child_priors[a], self.child_values[a])
            self.children[a] = node
        return node


def select_action(node: SearchNode, config: SearchConfig) -> Move:
    """argmax of U + Q over the 12 actions; ties go to the lowest index."""
    N, W, L, P = node.N, node.W, node.L, node.prior
    scale = config.exploration_c * math.sqrt(sum(N))
    best_a, best = 0, -math.inf
    for a in range(cube.NUM_MOVES):
        score = scale * P[a] / (1 + N[a]) + W[a] - L[a]
        if score > best:
            best, best_a = score, a
    return Move(best_a)


@dataclass
class SimulationOutcome:
    path: list[tuple[SearchNode, int]]
    leaf: SearchNode
    value: float
    solved: bool
    expanded: bool


@dataclass
class SolveResult:
    solved: bool
    solution: list[Move]
    naive_path: list[Move]
    nodes_expanded: int
    simulations: int
    wall_time: float
    metadata: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "solved": self.solved,
            "solution": cube.format_moves(self.solution),
            "naive_path": cube.format_moves(self.naive_path),
            "solution_length": len(self.solution) if self.solved else None,
            "naive_length": len(self.naive_path) if self.solved else None,
            "nodes_expanded": self.nodes_expanded,
            "simulations": self.simulations,
            "wall_time": self.wall_time,
            **{f"meta_{k}": v for k, v in self.metadata.items()},
        }


class SearchTree:
    """Shared tree plus the bookkeeping that concurrent workers update."""

    def __init__(self, start: CubeState, params: nn.NetworkParams, config: SearchConfig):
        config.validate()
        self.params = params
        self.config = config
        self.lock = threading.Lock()
        pred = nn.forward_states(params, start.to_array())
        self.root = SearchNode(start, pred.policy[0].tolist(), float(pred.value[0]))
        self.nodes_expanded = 0
        self.simulations = 0

    # -- expansion -------------------------------------------------------

    def _evaluate_children(self, node: SearchNode):
        kids = [cube.apply_move(node.state, m) for m in cube.MOVES]
        pred = nn.forward_states(self.params, cube.as_array(kids))
        return kids, pred.policy.tolist(), pred.value.tolist()

    def _publish(self, node: SearchNode, kids, priors, values) -> None:
        node.child_states = kids
        node.child_priors = priors
        node.child_values = values
        node.children = [None] * cube.NUM_MOVES
        node.N = [0] * cube.NUM_MOVES
        node.W = [0.0] * cube.NUM_MOVES
        node.L = [0.0] * cube.NUM_MOVES
        node.expanded = True
        self.nodes_expanded += 1

    def ensure_root_expanded(self) -> None:
        root = self.root
        with self.lock:
            if root.expanded or root.claimed:
                wait = not root.expanded
            else:
                root.claimed = True
                wait = None
        if wait is None:
            data = self._evaluate_children(root)
            with self.lock:
                self._publish(root, *data)
        elif wait:
            while not root.expanded:
                time.sleep(0)

    # -- one simulation --------------------------------------------------

    def simulate(self) -> SimulationOutcome:
        """Walk to a leaf, expand it, and back its value up the path."""
        cfg = self.config
        nu = cfg.virtual_loss_nu
        self.ensure_root_expanded()
        path: list[tuple[SearchNode, int]] = []
        with self.lock:
            node = self.root
            while node.expanded and not cube.is_solved(node.state):
                a = int(select_action(node, cfg))
                node.L[a] += nu
                path.append((node, a))
                node = node.child(a)
            leaf = node
            solved = cube.is_solved(leaf.state)
            claim = not solved and not leaf.claimed
            if claim:
                leaf.claimed = True

        expanded = False
        if claim:
            data = self._evaluate_children(leaf)
            with self.lock:
                self._publish(leaf, *data)
            expanded = True

        value = leaf.value
        with self.lock:
            for node, a in path:
                if value > node.W[a]:
                    node.W[a] = value
                node.N[a] += 1
                node.L[a] -= nu
            self.simulations += 1
        return SimulationOutcome(path, leaf, value, solved, expanded)

    # -- inspection ------------------------------------------------------

    def iter_nodes(self) -> Iterator[SearchNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if node.children:
                stack.extend(c for c in node.children if c is not None)

    def edges(self) -> Iterator[tuple[CubeState, int, CubeState]]:
        """(parent state, action, child state) for every child in the tree."""
        for node in self.iter_nodes():
            if node.expanded:
                for a, kid in enumerate(node.child_states):
                    yield node.state, a, kid

    def contains_goal(self) -> bool:
        return any(cube.is_solved(s) for _, _, s in self.edges()) or cube.is_solved(self.root.state)


class InconsistentTreeError(RuntimeError):
    pass


def extract_shortest_path(tree: SearchTree, start: CubeState | None = None,
                          goal: CubeState = cube.SOLVED) -> list[Move]:
    """Breadth-first search over the tree viewed as an undirected graph.

    Equal states anywhere in the tree collapse to one vertex, which is what
    removes the detours and cycles of the winning simulation.
    """
    start = tree.root.state if start is None else start
    adjacency: dict[CubeState, list[tuple[CubeState, int]]] = {}
    for parent, a, kid in tree.edges():
        adjacency.setdefault(parent, []).append((kid, a))
        adjacency.setdefault(kid, []).append((parent, a ^ 1))
    if start == goal:
        return []
    prev: dict[CubeState, tuple[CubeState, int]] = {start: (start, -1)}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t, a in adjacency.get(s, ()):
            if t in prev:
                continue
            prev[t] = (s, a)
            if t == goal:
                moves = []
                while t != start:
                    t, a = prev[t]
                    moves.append(Move(a))
                return moves[::-1]
            queue.append(t)
    raise InconsistentTreeError("goal state is not connected to the start in the search tree")


class Search:
    """Runs simulations on a SearchTree until solved or out of budget."""

    def __init__(self, start: CubeState, params: nn.NetworkParams, config: SearchConfig):
        self.start = start
        self.config = config
        self.tree = SearchTree(start, params, config)
        self._stop = threading.Event()
        self._winner: list[Move] | None = None
        self._started = 0
        self._deadline = math.inf

    def _reserve(self) -> bool:
        cfg = self.config
        if self._stop.is_set() or time.perf_counter() >= self._deadline:
            return False
        with self.tree.lock:
            if cfg.max_simulations is not None and self._started >= cfg.max_simulations:
                return False
            self._started += 1
        return True

    def _finish(self, moves: list[Move]) -> None:
        with self.tree.lock:
            if self._winner is None:
                self._winner = moves
        self._stop.set()

    def _work(self) -> None:
        goal_scan = self.config.check_children_for_goal
        while self._reserve():
            out = self.tree.simulate()
            actions = [Move(a) for _, a in out.path]
            if out.solved:
                self._finish(actions)
                return
            if goal_scan and out.expanded:
                for a, kid in enumerate(out.leaf.child_states):
                    if cube.is_solved(kid):
                        self._finish(actions + [Move(a)])
                        return

    def run(self) -> SolveResult:
        cfg = self.config
        t0 = time.perf_counter()
        meta = {
            "exploration_c": cfg.exploration_c,
            "virtual_loss_nu": cfg.virtual_loss_nu,
            "worker_count": cfg.worker_count,
            "time_limit": cfg.time_limit,
            "max_simulations": cfg.max_simulations,
        }
        if cube.is_solved(self.start):
            return SolveResult(True, [], [], 0, 0, time.perf_counter() - t0, meta)
        if cfg.time_limit is not None:
            self._deadline = t0 + cfg.time_limit
        if cfg.worker_count == 1:
            self._work()
        else:
            self.tree.ensure_root_expanded()
            threads = [threading.Thread(target=self._work, daemon=True) for _ in range(cfg.worker_count)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        naive = self._winner
        solution: list[Move] = []
        if naive is not None:
            solution = extract_shortest_path(self.tree, self.start)
        return SolveResult(
            solved=naive is not None,
            solution=solution,
            naive_path=naive or [],
            nodes_expanded=self.tree.nodes_expanded,
            simulations=self.tree.simulations,
            wall_time=time.perf_counter() - t0,
            metadata=meta,
        )


def solve(start: CubeState, params: nn.NetworkParams, config: SearchConfig | None = None) -> SolveResult:
    return Search(start, params, config or SearchConfig()).run()


# ---------------------------------------------------------------------------
# greedy baseline
# ---------------------------------------------------------------------------

def lookahead_scores(params: nn.NetworkParams, state: CubeState, depth: int = 1) -> np.ndarray:
    """Score of each of the 12 moves from ``state``.

    depth 1 is the training target rule (1 for the solved child, else
    -1 + v(child)); deeper lookahead replaces v(child) by the child's best
    score one level down.
    """
    if depth < 1:
        raise ValueError("lookahead depth must be >= 1")
    return _scores(params, state.to_array()[None, :], depth)[0]


def _scores(params, states: np.ndarray, depth: int) -> np.ndarray:
    if depth == 1:
        return adi.child_scores(params, states)
    kids = cube.children_batch(states)
    flat = kids.reshape(-1, cube.NUM_CUBIES)
    below = _scores(params, flat, depth - 1).max(axis=1).reshape(len(states), cube.NUM_MOVES)
    return np.where(cube.solved_mask(kids), 1.0, -1.0 + below)


def greedy_solve(start: CubeState, params: nn.NetworkParams, depth_limit: int = 1,
                 move_limit: int = 30) -> SolveResult:
    """Step to the best-scoring child until solved or ``move_limit`` moves."""
    t0 = time.perf_counter()
    state = start
    moves: list[Move] = []
    expansions = 0
    while not cube.is_solved(state) and len(moves) < move_limit:
        a = Move(int(np.argmax(lookahead_scores(params, state, depth_limit))))
        expansions += sum(12 ** i for i in range(depth_limit))
        state = cube.apply_move(state, a)
        moves.append(a)
    solved = cube.is_solved(state)
    return SolveResult(
        solved=solved,
        solution=moves if solved else [],
        naive_path=moves,
        nodes_expanded=expansions,
        simulations=0,
        wall_time=time.perf_counter() - t0,
        metadata={"depth_limit": depth_limit, "move_limit": move_limit},
    )
