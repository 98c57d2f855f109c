"""Exact quarter-turn distances for shallow states.

``build_distance_table`` runs a layer-by-layer breadth-first search from the
solved cube over all 12 moves.  ``optimal_solve`` is iterative-deepening DFS
using that table as its heuristic, so it returns provably shortest solutions
for anything within a few moves of the table horizon.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cube
from .cube import CubeState, Move

MAX_TABLE_DEPTH = 7
# Rough growth factor of the quarter-turn sphere sizes; only used for the
# guardrail's memory estimate.
_BRANCHING = 9.4
_BYTES_PER_STATE = 16 + 1 + 20 * 12  # packed key, distance, expansion scratch

KEY_DTYPE = np.dtype([("hi", "<u8"), ("lo", "<u8")])
_SHIFTS = (np.arange(10, dtype=np.uint64) * np.uint64(5))


def pack_keys(states: np.ndarray) -> np.ndarray:
    """(n, 20) uint8 states -> (n,) structured uint64 pairs, 5 bits per slot."""
    s = np.asarray(states, dtype=np.uint64)
    keys = np.empty(len(s), dtype=KEY_DTYPE)
    keys["hi"] = np.bitwise_or.reduce(s[:, :10] << _SHIFTS, axis=1)
    keys["lo"] = np.bitwise_or.reduce(s[:, 10:] << _SHIFTS, axis=1)
    return keys


def unpack_keys(keys: np.ndarray) -> np.ndarray:
    out = np.empty((len(keys), cube.NUM_CUBIES), dtype=np.uint8)
    mask = np.uint64(31)
    out[:, :10] = (keys["hi"][:, None] >> _SHIFTS) & mask
    out[:, 10:] = (keys["lo"][:, None] >> _SHIFTS) & mask
    return out


class DepthGuardError(ValueError):
    pass


def estimated_states(max_depth: int) -> int:
    return int(1 + sum(12 * _BRANCHING ** (d - 1) for d in range(1, max_depth + 1)))


@dataclass
class DistanceTable:
    keys: np.ndarray       # sorted KEY_DTYPE
    distances: np.ndarray  # uint8, aligned with keys
    max_depth: int
    counts: list[int]

    def __post_init__(self):
        self._lookup: dict[bytes, int] | None = None

    def __len__(self):
        return len(self.keys)

    def lookup_many(self, states: np.ndarray) -> np.ndarray:
        """Distances for an (n, 20) array; -1 where the state is beyond max_depth."""
        q = pack_keys(states)
        pos = np.searchsorted(self.keys, q)
        pos = np.minimum(pos, len(self.keys) - 1)
        hit = self.keys[pos] == q
        return np.where(hit, self.distances[pos].astype(np.int64), -1)

    def _dict(self) -> dict[bytes, int]:
        if self._lookup is None:
            states = unpack_keys(self.keys)
            self._lookup = dict(zip((bytes(r) for r in states), self.distances.tolist()))
        return self._lookup

    def distance(self, state: CubeState) -> int | None:
        return self._dict().get(state.cubies)

    def __contains__(self, state: CubeState) -> bool:
        return state.cubies in self._dict()

    def states_at(self, depth: int) -> np.ndarray:
        return unpack_keys(self.keys[self.distances == depth])


def build_distance_table(max_depth: int) -> DistanceTable:
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if max_depth > MAX_TABLE_DEPTH:
        n = estimated_states(max_depth)
        raise DepthGuardError(
            f"depth {max_depth} exceeds the guardrail of {MAX_TABLE_DEPTH}: about {n:.3g} states, "
            f"~{n * _BYTES_PER_STATE / 2**30:.1f} GiB"
        )
    layers = [pack_keys(cube.SOLVED_ARRAY[None, :])]
    frontier = cube.SOLVED_ARRAY[None, :].copy()
    for _ in range(max_depth):
        kids = cube.children_batch(frontier).reshape(-1, cube.NUM_CUBIES)
        keys, first = np.unique(pack_keys(kids), return_index=True)
        fresh = np.ones(len(keys), dtype=bool)
        for old in layers[-2:]:
            fresh &= ~np.isin(keys, old)
        layers.append(keys[fresh])
        frontier = kids[first[fresh]]
    keys = np.concatenate(layers)
    dist = np.concatenate([np.full(len(k), d, dtype=np.uint8) for d, k in enumerate(layers)])
    order = np.argsort(keys)
    return DistanceTable(keys[order], dist[order], max_depth, [len(k) for k in layers])


# ---------------------------------------------------------------------------
# table files
# ---------------------------------------------------------------------------

TABLE_MAGIC = b"CUBEDIST"
TABLE_VERSION = 1
_TABLE_HEADER = struct.Struct("<8sIII")


class TableFormatError(ValueError):
    pass


def save_table(table: DistanceTable, path) -> None:
    parts = [
        _TABLE_HEADER.pack(TABLE_MAGIC, TABLE_VERSION, cube.ENCODING_LAYOUT_VERSION, table.max_depth),
        np.asarray(table.counts, dtype="<u8").tobytes(),
        np.ascontiguousarray(table.keys).tobytes(),
        table.distances.tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def load_table(path) -> DistanceTable:
    data = Path(path).read_bytes()
    if len(data) < _TABLE_HEADER.size:
        raise TableFormatError("table file truncated")
    magic, version, layout, depth = _TABLE_HEADER.unpack_from(data)
    if magic != TABLE_MAGIC:
        raise TableFormatError("not a distance table")
    if version != TABLE_VERSION or layout != cube.ENCODING_LAYOUT_VERSION:
        raise TableFormatError(f"table version {version}/layout {layout} not supported")
    off = _TABLE_HEADER.size
    counts = np.frombuffer(data, dtype="<u8", count=depth + 1, offset=off).tolist()
    off += 8 * (depth + 1)
    n = int(sum(counts))
    if len(data) != off + n * (KEY_DTYPE.itemsize + 1):
        raise TableFormatError("table body size does not match its header counts")
    keys = np.frombuffer(data, dtype=KEY_DTYPE, count=n, offset=off).copy()
    off += n * KEY_DTYPE.itemsize
    dist = np.frombuffer(data, dtype=np.uint8, count=n, offset=off).copy()
    return DistanceTable(keys, dist, depth, [int(c) for c in counts])


# ---------------------------------------------------------------------------
# optimal solver
# ---------------------------------------------------------------------------

MAX_SOLVE_CAP = 12


def optimal_solve(start: CubeState, depth_cap: int, table: DistanceTable | None = None) -> list[Move] | None:
    """Shortest solution of length <= depth_cap, or None if there is none.

    The heuristic is the exact table distance when the state is tabulated and
    ``max_depth + 1`` otherwise (an untabulated state is strictly farther than
    the horizon), so it stays admissible.
    """
    if depth_cap > MAX_SOLVE_CAP:
        raise ValueError(f"depth_cap above {MAX_SOLVE_CAP} is not supported")
    if cube.is_solved(start):
        return []
    lookup = table._dict() if table is not None else {}
    beyond = table.max_depth + 1 if table is not None else 0
    perms, luts = cube._PY_PERMS, cube._PY_LUTS

    def h(cubies: bytes) -> int:
        return lookup.get(cubies, beyond)

    path: list[int] = []

    def dfs(cubies: bytes, g: int, bound: int, last: int) -> int:
        f = g + h(cubies)
        if f > bound:
            return f
        if cubies == cube._SOLVED_BYTES:
            return -1
        best = 1 << 30
        for a in range(cube.NUM_MOVES):
            if a == last ^ 1:
                continue
            lut, perm = luts[a], perms[a]
            nxt = bytes([lut[i][cubies[p]] for i, p in enumerate(perm)])
            path.append(a)
            t = dfs(nxt, g + 1, bound, a)
            if t < 0:
                return t
            path.pop()
            best = min(best, t)
        return best

    bound = h(start.cubies)
    while bound <= depth_cap:
        t = dfs(start.cubies, 0, bound, -2)
        if t < 0:
            return [Move(a) for a in path]
        bound = t
    return None
