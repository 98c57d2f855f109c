"""Self-taught 3x3x3 cube solver: cube group environment, value/policy
network trained by autodidactic iteration, and network-guided tree search."""

from .cube import CubeState, Move, apply_move, encode, decode, is_solved, reward, scramble, solved_state
from .mcts import SearchConfig, SolveResult, greedy_solve, solve
from .network import NetworkConfig, NetworkParams, forward, init_params

__all__ = [
    "CubeState", "Move", "apply_move", "encode", "decode", "is_solved", "reward", "scramble",
    "solved_state", "SearchConfig", "SolveResult", "greedy_solve", "solve", "NetworkConfig",
    "NetworkParams", "forward", "init_params",
]
__version__ = "0.1.0"
