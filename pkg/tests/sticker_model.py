"""Independent 54-sticker cube built from 3D rotations.

Used only by the tests to check the cubie move tables.  Nothing here is shared
with the package: stickers are (position, normal, colour) triples and a face
turn is an integer rotation of every sticker on that layer.
"""

import numpy as np

AXES = {
    "U": (0, 1, 0), "D": (0, -1, 0),
    "R": (1, 0, 0), "L": (-1, 0, 0),
    "F": (0, 0, 1), "B": (0, 0, -1),
}
FACE_OF_NORMAL = {v: k for k, v in AXES.items()}

CORNER_SLOTS = ["URF", "UFL", "ULB", "UBR", "DFR", "DLF", "DBL", "DRB"]
EDGE_SLOTS = ["UR", "UF", "UL", "UB", "DR", "DF", "DL", "DB", "FR", "FL", "BL", "BR"]


def _slot_position(name):
    return tuple(int(v) for v in np.sum([AXES[f] for f in name], axis=0))


class StickerCube:
    def __init__(self):
        # position -> {normal: colour}; colour is the face letter it started on
        self.stickers = {}
        for x in (-1, 0, 1):
            for y in (-1, 0, 1):
                for z in (-1, 0, 1):
                    pos = (x, y, z)
                    for face, n in AXES.items():
                        if np.dot(pos, n) == 1:
                            self.stickers[(pos, n)] = face

    def turn(self, face, clockwise=True):
        n = np.array(AXES[face])
        new = {}
        for (pos, normal), colour in self.stickers.items():
            if np.dot(pos, n) == 1:
                pos, normal = _rotate(pos, n, clockwise), _rotate(normal, n, clockwise)
            new[(pos, normal)] = colour
        self.stickers = new

    def apply(self, token):
        self.turn(token[0], clockwise=not token.endswith("'"))

    def cubie_arrays(self):
        """Read off corner/edge permutation and orientation from the stickers."""
        cp, co, ep, eo = [], [], [], []
        corner_sets = [frozenset(s) for s in CORNER_SLOTS]
        edge_sets = [frozenset(s) for s in EDGE_SLOTS]
        for name in CORNER_SLOTS:
            pos = _slot_position(name)
            colours = [self.stickers[(pos, AXES[f])] for f in name]
            cp.append(corner_sets.index(frozenset(colours)))
            co.append(next(k for k, c in enumerate(colours) if c in "UD"))
        for name in EDGE_SLOTS:
            pos = _slot_position(name)
            colours = [self.stickers[(pos, AXES[f])] for f in name]
            piece = edge_sets.index(frozenset(colours))
            ep.append(piece)
            eo.append(colours.index(EDGE_SLOTS[piece][0]))
        return cp, co, ep, eo


def _rotate(v, axis, clockwise):
    # clockwise seen from outside the face = -90 degrees about the outward normal
    v = np.asarray(v)
    cross = np.cross(axis, v)
    along = axis * np.dot(axis, v)
    out = along - cross if clockwise else along + cross
    return tuple(int(c) for c in out)
