"""3x3x3 cube group environment.

A state is stored as 20 small integers, one per cubelet slot. Slots 0-7 are
the corner slots and slots 8-19 the edge slots, numbered as follows::

    corners: 0 URF  1 UFL  2 ULB  3 UBR  4 DFR  5 DLF  6 DBL  7 DRB
    edges:   0 UR   1 UF   2 UL   3 UB   4 DR   5 DF   6 DL   7 DB
             8 FR   9 FL  10 BL  11 BR

A corner slot holds ``piece * 3 + twist`` and an edge slot holds
``piece * 2 + flip``, so the four classic arrays (corner permutation and
orientation, edge permutation and orientation) are just a view of that byte
string.  ``docs/cube_layout.md`` pins the numbering and the orientation rules.

Moves are quarter turns in Singmaster notation.  Action indices follow
``F F' B B' L L' R R' U U' D D'`` so ``inverse(m) == m ^ 1``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NUM_CORNERS = 8
NUM_EDGES = 12
NUM_CUBIES = NUM_CORNERS + NUM_EDGES
NUM_MOVES = 12
ENCODING_SHAPE = (20, 24)
ENCODING_SIZE = 480
# Bump whenever slot numbering or encoding column layout changes.
ENCODING_LAYOUT_VERSION = 1


class Move(enum.IntEnum):
    F = 0
    F_PRIME = 1
    B = 2
    B_PRIME = 3
    L = 4
    L_PRIME = 5
    R = 6
    R_PRIME = 7
    U = 8
    U_PRIME = 9
    D = 10
    D_PRIME = 11

    @property
    def face(self) -> str:
        return "FBLRUD"[self.value // 2]

    @property
    def clockwise(self) -> bool:
        return self.value % 2 == 0

    @property
    def inverse(self) -> "Move":
        return Move(self.value ^ 1)

    def __str__(self) -> str:
        return self.face + ("" if self.clockwise else "'")


MOVES = tuple(Move)


def inverse(move: Move) -> Move:
    return move.inverse


# Clockwise face turns in "replaced by" form: after the turn, slot i holds
# what was in slot perm[i], twisted/flipped by delta[i].
_CW_CORNERS = {
    "U": ([3, 0, 1, 2, 4, 5, 6, 7], [0, 0, 0, 0, 0, 0, 0, 0]),
    "R": ([4, 1, 2, 0, 7, 5, 6, 3], [2, 0, 0, 1, 1, 0, 0, 2]),
    "F": ([1, 5, 2, 3, 0, 4, 6, 7], [1, 2, 0, 0, 2, 1, 0, 0]),
    "D": ([0, 1, 2, 3, 5, 6, 7, 4], [0, 0, 0, 0, 0, 0, 0, 0]),
    "L": ([0, 2, 6, 3, 4, 1, 5, 7], [0, 1, 2, 0, 0, 2, 1, 0]),
    "B": ([0, 1, 3, 7, 4, 5, 2, 6], [0, 0, 1, 2, 0, 0, 2, 1]),
}
_CW_EDGES = {
    "U": ([3, 0, 1, 2, 4, 5, 6, 7, 8, 9, 10, 11], [0] * 12),
    "R": ([8, 1, 2, 3, 11, 5, 6, 7, 4, 9, 10, 0], [0] * 12),
    "F": ([0, 9, 2, 3, 4, 8, 6, 7, 1, 5, 10, 11], [0, 1, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0]),
    "D": ([0, 1, 2, 3, 5, 6, 7, 4, 8, 9, 10, 11], [0] * 12),
    "L": ([0, 1, 10, 3, 4, 5, 9, 7, 8, 2, 6, 11], [0] * 12),
    "B": ([0, 1, 2, 11, 4, 5, 6, 10, 8, 9, 3, 7], [0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 1]),
}


def _compose(first, second, modulus):
    """Apply ``first`` then ``second``; both in replaced-by form."""
    p1, d1 = first
    p2, d2 = second
    perm = [p1[j] for j in p2]
    delta = [(d1[j] + d2[i]) % modulus for i, j in enumerate(p2)]
    return perm, delta


def _build_tables():
    perms = np.zeros((NUM_MOVES, NUM_CUBIES), dtype=np.intp)
    luts = np.zeros((NUM_MOVES, NUM_CUBIES, 24), dtype=np.uint8)
    for move in MOVES:
        corner = _CW_CORNERS[move.face]
        edge = _CW_EDGES[move.face]
        if not move.clockwise:
            corner = _compose(_compose(corner, corner, 3), corner, 3)
            edge = _compose(_compose(edge, edge, 2), edge, 2)
        for i in range(NUM_CORNERS):
            perms[move, i] = corner[0][i]
            for v in range(24):
                luts[move, i, v] = (v // 3) * 3 + (v % 3 + corner[1][i]) % 3
        for i in range(NUM_EDGES):
            perms[move, 8 + i] = 8 + edge[0][i]
            for v in range(24):
                luts[move, 8 + i, v] = (v // 2) * 2 + (v % 2 + edge[1][i]) % 2
    perms.flags.writeable = False
    luts.flags.writeable = False
    return perms, luts


MOVE_PERMS, MOVE_LUTS = _build_tables()
_SLOTS = np.arange(NUM_CUBIES)
_SOLVED_BYTES = bytes([3 * i for i in range(NUM_CORNERS)] + [2 * i for i in range(NUM_EDGES)])
SOLVED_ARRAY = np.frombuffer(_SOLVED_BYTES, dtype=np.uint8).copy()
SOLVED_ARRAY.flags.writeable = False


class InvalidStateError(ValueError):
    pass


class CubeState:
    """Immutable cube configuration; equality is structural."""

    __slots__ = ("_cubies", "_hash")

    def __init__(self, cubies: bytes = _SOLVED_BYTES):
        if len(cubies) != NUM_CUBIES:
            raise InvalidStateError(f"expected {NUM_CUBIES} cubie values, got {len(cubies)}")
        self._cubies = bytes(cubies)
        self._hash = hash(self._cubies)

    @classmethod
    def from_arrays(cls, corner_perm, corner_orient, edge_perm, edge_orient) -> "CubeState":
        values = [int(p) * 3 + int(o) for p, o in zip(corner_perm, corner_orient)]
        values += [int(p) * 2 + int(o) for p, o in zip(edge_perm, edge_orient)]
        state = cls(bytes(values))
        check_invariants(state)
        return state

    @classmethod
    def from_array(cls, arr) -> "CubeState":
        return cls(np.asarray(arr, dtype=np.uint8).tobytes())

    @property
    def cubies(self) -> bytes:
        return self._cubies

    @property
    def corner_perm(self) -> tuple[int, ...]:
        return tuple(v // 3 for v in self._cubies[:8])

    @property
    def corner_orient(self) -> tuple[int, ...]:
        return tuple(v % 3 for v in self._cubies[:8])

    @property
    def edge_perm(self) -> tuple[int, ...]:
        return tuple(v // 2 for v in self._cubies[8:])

    @property
    def edge_orient(self) -> tuple[int, ...]:
        return tuple(v % 2 for v in self._cubies[8:])

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self._cubies, dtype=np.uint8).copy()

    def __eq__(self, other):
        if not isinstance(other, CubeState):
            return NotImplemented
        return self._cubies == other._cubies

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return (
            f"CubeState(cp={list(self.corner_perm)}, co={list(self.corner_orient)}, "
            f"ep={list(self.edge_perm)}, eo={list(self.edge_orient)})"
        )


SOLVED = CubeState()


def solved_state() -> CubeState:
    return SOLVED


def apply_move(state: CubeState, move: Move | int) -> CubeState:
    lut = _PY_LUTS[move]
    src = state.cubies
    return CubeState(bytes([lut[i][src[p]] for i, p in enumerate(_PY_PERMS[move])]))


# Plain-list copies: per-state moves in pure Python beat numpy dispatch for 20 bytes.
_PY_PERMS = MOVE_PERMS.tolist()
_PY_LUTS = MOVE_LUTS.tolist()


def apply_moves(state: CubeState, moves: Iterable[Move | int]) -> CubeState:
    for m in moves:
        state = apply_move(state, m)
    return state


def children(state: CubeState) -> list[CubeState]:
    return [apply_move(state, m) for m in MOVES]


def reward(state: CubeState) -> int:
    return 1 if state == SOLVED else -1


def is_solved(state: CubeState) -> bool:
    return state.cubies == _SOLVED_BYTES


def _parity(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    parity = 0
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        parity ^= (length - 1) & 1
    return parity


def check_invariants(state: CubeState) -> None:
    """Raise InvalidStateError unless the state is reachable from solved."""
    if any(v >= 24 for v in state.cubies):
        raise InvalidStateError("cubie value out of range")
    cp, ep = state.corner_perm, state.edge_perm
    if sorted(cp) != list(range(8)):
        raise InvalidStateError(f"corner_perm is not a permutation: {cp}")
    if sorted(ep) != list(range(12)):
        raise InvalidStateError(f"edge_perm is not a permutation: {ep}")
    if sum(state.corner_orient) % 3:
        raise InvalidStateError("corner twist sum is not 0 mod 3")
    if sum(state.edge_orient) % 2:
        raise InvalidStateError("edge flip sum is not 0 mod 2")
    if _parity(cp) != _parity(ep):
        raise InvalidStateError("corner and edge permutation parities differ")


def inverse_state(state: CubeState) -> CubeState:
    """Group inverse: composing ``state`` with it yields solved."""
    out = [0] * NUM_CUBIES
    for slot, v in enumerate(state.cubies[:8]):
        piece, twist = divmod(v, 3)
        out[piece] = slot * 3 + (-twist) % 3
    for slot, v in enumerate(state.cubies[8:]):
        piece, flip = divmod(v, 2)
        out[8 + piece] = slot * 2 + flip
    return CubeState(bytes(out))


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

# Row r of the grid is cubelet r (corners then edges); the column says where
# it sits: slot * orientations + orientation.
def _column_table() -> np.ndarray:
    col = np.zeros((NUM_CUBIES, 24), dtype=np.intp)
    row = np.zeros((NUM_CUBIES, 24), dtype=np.intp)
    for slot in range(NUM_CORNERS):
        for v in range(24):
            row[slot, v] = v // 3
            col[slot, v] = slot * 3 + v % 3
    for slot in range(NUM_EDGES):
        for v in range(24):
            row[8 + slot, v] = 8 + v // 2
            col[8 + slot, v] = slot * 2 + v % 2
    return row * 24 + col


_FLAT_INDEX = _column_table()


def encode(state: CubeState) -> np.ndarray:
    """One-hot 20x24 uint8 grid for the network input."""
    grid = np.zeros(ENCODING_SIZE, dtype=np.uint8)
    grid[_FLAT_INDEX[_SLOTS, np.frombuffer(state.cubies, dtype=np.uint8)]] = 1
    return grid.reshape(ENCODING_SHAPE)


def encode_batch(states: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Flattened encodings, shape (n, 480), for an (n, 20) uint8 state array."""
    states = np.asarray(states)
    out = np.zeros((states.shape[0], ENCODING_SIZE), dtype=dtype)
    idx = _FLAT_INDEX[_SLOTS, states]
    np.put_along_axis(out, idx, 1, axis=1)
    return out


def decode(grid: np.ndarray) -> CubeState:
    grid = np.asarray(grid).reshape(ENCODING_SHAPE)
    if not np.all(grid.sum(axis=1) == 1):
        raise InvalidStateError("every encoding row must contain exactly one 1")
    cols = grid.argmax(axis=1)
    out = [0] * NUM_CUBIES
    for piece in range(NUM_CORNERS):
        slot, twist = divmod(int(cols[piece]), 3)
        out[slot] = piece * 3 + twist
    for piece in range(NUM_EDGES):
        slot, flip = divmod(int(cols[8 + piece]), 2)
        if slot >= NUM_EDGES:
            raise InvalidStateError(f"edge column {cols[8 + piece]} out of range")
        out[8 + slot] = piece * 2 + flip
    state = CubeState(bytes(out))
    check_invariants(state)
    return state


# ---------------------------------------------------------------------------
# batched moves (BFS, training data)
# ---------------------------------------------------------------------------

def as_array(states: Iterable[CubeState]) -> np.ndarray:
    buf = b"".join(s.cubies for s in states)
    return np.frombuffer(buf, dtype=np.uint8).reshape(-1, NUM_CUBIES).copy()


def apply_move_batch(states: np.ndarray, move: Move | int) -> np.ndarray:
    return MOVE_LUTS[move][_SLOTS, states[:, MOVE_PERMS[move]]]


def apply_moves_batch(states: np.ndarray, moves: np.ndarray) -> np.ndarray:
    """Apply moves[i] to states[i]."""
    perms = MOVE_PERMS[moves]
    gathered = np.take_along_axis(states, perms, axis=1)
    return MOVE_LUTS[moves[:, None], _SLOTS[None, :], gathered]


def children_batch(states: np.ndarray) -> np.ndarray:
    """All 12 children: shape (n, 12, 20)."""
    return np.stack([apply_move_batch(states, m) for m in MOVES], axis=1)


def solved_mask(states: np.ndarray) -> np.ndarray:
    return np.all(states == SOLVED_ARRAY, axis=-1)


# ---------------------------------------------------------------------------
# scrambles and notation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScrambleSequence:
    moves: tuple[Move, ...]
    seed: int | None = None

    def __len__(self):
        return len(self.moves)

    def __str__(self):
        return format_moves(self.moves)


def _as_rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), int(rng)


def scramble(depth: int, rng) -> tuple[CubeState, ScrambleSequence]:
    """Apply ``depth`` i.i.d. uniform quarter turns to the solved cube."""
    if depth < 1:
        raise ValueError(f"scramble depth must be >= 1, got {depth}")
    gen, seed = _as_rng(rng)
    moves = tuple(Move(int(m)) for m in gen.integers(0, NUM_MOVES, size=depth))
    return apply_moves(SOLVED, moves), ScrambleSequence(moves, seed)


class ParseError(ValueError):
    def __init__(self, token: str, position: int, line: int | None = None):
        where = f"line {line}, " if line is not None else ""
        super().__init__(f"unknown move token {token!r} at {where}position {position}")
        self.token = token
        self.position = position
        self.line = line


_TOKEN = re.compile(r"\S+")
_BY_NAME = {str(m): m for m in MOVES}


def parse_moves(text: str) -> list[Move]:
    moves = []
    for match in _TOKEN.finditer(text):
        tok = match.group()
        if tok not in _BY_NAME:
            raise ParseError(tok, match.start())
        moves.append(_BY_NAME[tok])
    return moves


def format_moves(moves: Iterable[Move | int]) -> str:
    return " ".join(str(Move(m)) for m in moves)


def read_scramble_file(path) -> list[list[Move]]:
    """One scramble per line; ``#`` starts a comment. Blank lines are skipped."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            out.append(parse_moves(body))
        except ParseError as exc:
            raise ParseError(exc.token, exc.position, lineno) from None
    return out


def write_scramble_file(path, scrambles: Iterable[Sequence[Move]], header: str | None = None) -> None:
    lines = []
    if header:
        lines += ["# " + h for h in header.splitlines()]
    lines += [format_moves(s) for s in scrambles]
    Path(path).write_text("\n".join(lines) + "\n")


def random_scrambles(count: int, depth: int, seed: int) -> list[list[Move]]:
    gen = np.random.default_rng(seed)
    return [list(scramble(depth, gen)[1].moves) for _ in range(count)]
