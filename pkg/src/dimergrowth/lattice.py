"""Coordinates, adjacency, columns and height arithmetic for Z^2 and the honeycomb lattice.

Conventions
-----------
Honeycomb: the black and white endpoints of a north-west edge share (x1, x2).
Black (x1, x2) has white neighbours, in direction order,
    0: (x1, x2)        north-west edge, density rho1
    1: (x1, x2 + 1)    north-east edge, density rho2 - rho1
    2: (x1 - 1, x2 + 1) horizontal edge, density 1 - rho2

Z^2: a white vertex shares (x1, x2) with the black vertex to its left.
Black (x1, x2) has white neighbours
    0: (x1, x2)         east
    1: (x1, x2 + 1)     north
    2: (x1 - 1, x2 + 1) west
    3: (x1 - 1, x2)     south
In the plane, black (x1, x2) sits at (x1 - x2, x1 + x2) and white at that point plus (1, 0).

Columns and particles
---------------------
Honeycomb column c holds the horizontal edges h(c, n) = (black(c+1, n), white(c, n+1)).
Position n indexes them bottom to top; face F(c, n) lies between positions n and n+1.

Z^2 column l holds the east (position 2n) and north (position 2n+1) edges of the
blacks black(l, n). Consecutive positions share a vertex, so the transversal edges form
a zig-zag path. Face (l, k) is the unit square between positions k and k+1; it is
stored as Face(l, k // 2, k % 2).

Every particle has a key on the line to its left and one on the line to its right.
A configuration is a perfect matching exactly when, on every line, the keys from the two
adjacent columns strictly alternate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence


class LatticeKind(str, enum.Enum):
    SQUARE = "z2"
    HONEYCOMB = "hex"

    @classmethod
    def parse(cls, value: "str | LatticeKind") -> "LatticeKind":
        if isinstance(value, LatticeKind):
            return value
        v = str(value).strip().lower()
        aliases = {"z2": cls.SQUARE, "square": cls.SQUARE, "squarez2": cls.SQUARE,
                   "hex": cls.HONEYCOMB, "honeycomb": cls.HONEYCOMB, "h": cls.HONEYCOMB}
        if v not in aliases:
            raise ValueError(f"unknown lattice kind {value!r}")
        return aliases[v]


class Color(str, enum.Enum):
    WHITE = "w"
    BLACK = "b"


@dataclass(frozen=True, order=True)
class Vertex:
    color: Color
    x1: int
    x2: int

    def shift(self, d1: int, d2: int) -> "Vertex":
        return Vertex(self.color, self.x1 + d1, self.x2 + d2)

    def __repr__(self) -> str:
        sym = "o" if self.color is Color.WHITE else "*"
        return f"{sym}({self.x1},{self.x2})"


def white(x1: int, x2: int) -> Vertex:
    return Vertex(Color.WHITE, int(x1), int(x2))


def black(x1: int, x2: int) -> Vertex:
    return Vertex(Color.BLACK, int(x1), int(x2))


# offsets (dx1, dx2) from a black vertex to its white neighbours, in direction order
_OFFSETS = {
    LatticeKind.HONEYCOMB: ((0, 0), (0, 1), (-1, 1)),
    LatticeKind.SQUARE: ((0, 0), (0, 1), (-1, 1), (-1, 0)),
}


def degree(kind: LatticeKind) -> int:
    return len(_OFFSETS[LatticeKind.parse(kind)])


@dataclass(frozen=True, order=True)
class Edge:
    black: Vertex
    direction: int

    @property
    def white(self) -> Vertex:
        # valid for both lattices since honeycomb directions are a prefix of Z^2's
        d1, d2 = _OFFSETS[LatticeKind.SQUARE][self.direction]
        return white(self.black.x1 + d1, self.black.x2 + d2)

    def shift(self, d1: int, d2: int) -> "Edge":
        return Edge(self.black.shift(d1, d2), self.direction)

    def __repr__(self) -> str:
        return f"({self.black!r},{self.white!r})"


@dataclass(frozen=True, order=True)
class Face:
    x1: int
    x2: int
    parity: int = 0


@dataclass(frozen=True)
class Slope:
    rho1: float
    rho2: float

    def as_tuple(self) -> tuple[float, float]:
        return (float(self.rho1), float(self.rho2))


def in_polygon(kind: LatticeKind, rho: Slope, margin: float = 0.0) -> bool:
    """Strict membership in the open Newton polygon (shrunk by `margin`)."""
    kind = LatticeKind.parse(kind)
    r1, r2 = rho.rho1, rho.rho2
    if not (math.isfinite(r1) and math.isfinite(r2)):
        return False
    if kind is LatticeKind.HONEYCOMB:
        return r1 > margin and r2 - r1 > margin and 1.0 - r2 > margin
    return abs(r1) < 0.5 - margin and abs(r2) < 0.5 - margin


def check_slope(kind: LatticeKind, rho: Slope) -> Slope:
    if not in_polygon(kind, rho):
        raise ValueError(f"slope {rho.as_tuple()} is not inside the open polygon of {LatticeKind.parse(kind).value}")
    return rho


def black_neighbors(kind: LatticeKind, b: Vertex) -> list[Vertex]:
    kind = LatticeKind.parse(kind)
    if b.color is not Color.BLACK:
        raise ValueError(f"black_neighbors expects a black vertex, got {b!r}")
    return [white(b.x1 + d1, b.x2 + d2) for d1, d2 in _OFFSETS[kind]]


def white_neighbors(kind: LatticeKind, w: Vertex) -> list[Vertex]:
    """Black neighbours of a white vertex; entry d is the black seeing w in direction d."""
    kind = LatticeKind.parse(kind)
    if w.color is not Color.WHITE:
        raise ValueError(f"white_neighbors expects a white vertex, got {w!r}")
    return [black(w.x1 - d1, w.x2 - d2) for d1, d2 in _OFFSETS[kind]]


def edge_between(kind: LatticeKind, b: Vertex, w: Vertex) -> Edge:
    for d, cand in enumerate(black_neighbors(kind, b)):
        if cand == w:
            return Edge(b, d)
    raise ValueError(f"{b!r} and {w!r} are not nearest neighbours")


def edge_from_pair(kind: LatticeKind, u: Vertex, v: Vertex) -> Edge:
    if u.color is Color.BLACK:
        return edge_between(kind, u, v)
    return edge_between(kind, v, u)


# ---------------------------------------------------------------- columns

def is_transversal(kind: LatticeKind, e: Edge) -> bool:
    kind = LatticeKind.parse(kind)
    if not 0 <= e.direction < degree(kind):
        raise ValueError(f"invalid direction {e.direction} for {kind.value}")
    if kind is LatticeKind.HONEYCOMB:
        return e.direction == 2
    return e.direction in (0, 1)


def positions_per_column(kind: LatticeKind, L: int) -> int:
    """Number of transversal positions in one period of a column of the L x L torus."""
    return L if LatticeKind.parse(kind) is LatticeKind.HONEYCOMB else 2 * L


def column_position(kind: LatticeKind, e: Edge) -> tuple[int, int]:
    """(column, position) of a transversal edge."""
    kind = LatticeKind.parse(kind)
    if not is_transversal(kind, e):
        raise ValueError(f"{e!r} is not transversal")
    b = e.black
    if kind is LatticeKind.HONEYCOMB:
        return b.x1 - 1, b.x2
    return b.x1, 2 * b.x2 + e.direction


def transversal_edge(kind: LatticeKind, column: int, position: int) -> Edge:
    kind = LatticeKind.parse(kind)
    if kind is LatticeKind.HONEYCOMB:
        return Edge(black(column + 1, position), 2)
    return Edge(black(column, position // 2), position % 2)


def face_column_index(kind: LatticeKind, f: Face) -> tuple[int, int]:
    """(column, index) where the face sits between positions index and index + 1."""
    kind = LatticeKind.parse(kind)
    if kind is LatticeKind.HONEYCOMB:
        return f.x1, f.x2
    return f.x1, 2 * f.x2 + f.parity


def face_from_column(kind: LatticeKind, column: int, index: int) -> Face:
    kind = LatticeKind.parse(kind)
    if kind is LatticeKind.HONEYCOMB:
        return Face(column, index, 0)
    return Face(column, index // 2, index % 2)


# origin face x0: chosen adjacent to black(0, 0)
ORIGIN_FACE = {
    LatticeKind.HONEYCOMB: Face(0, -1, 0),
    LatticeKind.SQUARE: Face(0, 0, 0),
}


def origin_face(kind: LatticeKind) -> Face:
    return ORIGIN_FACE[LatticeKind.parse(kind)]


# key functions of the particle representation; see module docstring
def left_key(kind: LatticeKind, k: int) -> int:
    if LatticeKind.parse(kind) is LatticeKind.HONEYCOMB:
        return 2 * k + 2
    return 2 * (k // 2) + 1


def right_key(kind: LatticeKind, k: int) -> int:
    if LatticeKind.parse(kind) is LatticeKind.HONEYCOMB:
        return 2 * k + 1
    return 2 * ((k + 1) // 2)


# ---------------------------------------------------------------- faces and heights

def face_vertices(kind: LatticeKind, f: Face) -> list[Vertex]:
    """Vertices of a face in cyclic order."""
    kind = LatticeKind.parse(kind)
    if kind is LatticeKind.HONEYCOMB:
        c, n = f.x1, f.x2
        return [white(c, n + 1), black(c + 1, n), white(c + 1, n + 1),
                black(c + 1, n + 1), white(c, n + 2), black(c, n + 1)]
    col, k = face_column_index(kind, f)
    e0 = transversal_edge(kind, col, k)
    e1 = transversal_edge(kind, col, k + 1)
    shared = ({e0.black, e0.white} & {e1.black, e1.white}).pop()
    a = e0.white if shared == e0.black else e0.black
    c = e1.white if shared == e1.black else e1.black
    # the fourth corner is the common neighbour of a and c other than `shared`
    na = set(_neighbors(kind, a))
    nc = set(_neighbors(kind, c))
    (d,) = (na & nc) - {shared}
    return [a, shared, c, d]


def _neighbors(kind: LatticeKind, v: Vertex) -> list[Vertex]:
    if v.color is Color.BLACK:
        return black_neighbors(kind, v)
    return white_neighbors(kind, v)


def face_neighbors(kind: LatticeKind, f: Face) -> list[tuple[Face, Edge, int]]:
    """Adjacent faces with the shared edge and the sign sigma for crossing from f.

    sigma = +1 when the white endpoint is on the right of the crossing direction.
    """
    kind = LatticeKind.parse(kind)
    if kind is LatticeKind.HONEYCOMB:
        c, n = f.x1, f.x2
        return [
            (Face(c, n + 1), Edge(black(c + 1, n + 1), 2), -1),
            (Face(c, n - 1), Edge(black(c + 1, n), 2), +1),
            (Face(c + 1, n), Edge(black(c + 1, n + 1), 0), +1),
            (Face(c + 1, n - 1), Edge(black(c + 1, n), 1), -1),
            (Face(c - 1, n), Edge(black(c, n + 1), 0), -1),
            (Face(c - 1, n + 1), Edge(black(c, n + 1), 1), +1),
        ]
    col, k = face_column_index(kind, f)
    out = [
        (face_from_column(kind, col, k + 1), transversal_edge(kind, col, k + 1), +1),
        (face_from_column(kind, col, k - 1), transversal_edge(kind, col, k), -1),
    ]
    if k % 2 == 0:
        n = k // 2
        out.append((face_from_column(kind, col + 1, k + 1), Edge(black(col + 1, n), 2), -1))
        out.append((face_from_column(kind, col + 1, k - 1), Edge(black(col + 1, n), 3), +1))
    else:
        out.append((face_from_column(kind, col - 1, k - 1), Edge(black(col, (k - 1) // 2), 2), +1))
        out.append((face_from_column(kind, col - 1, k + 1), Edge(black(col, (k + 1) // 2), 3), -1))
    return out


def edge_offset(kind: LatticeKind, e: Edge) -> float:
    """The reference function c(e): 1/4 on Z^2, 1 on horizontal honeycomb edges, else 0."""
    kind = LatticeKind.parse(kind)
    if kind is LatticeKind.SQUARE:
        return 0.25
    return 1.0 if e.direction == 2 else 0.0


def crossing(kind: LatticeKind, f: Face, g: Face) -> tuple[Edge, int]:
    for h, e, s in face_neighbors(kind, f):
        if h == g:
            return e, s
    raise ValueError(f"faces {f} and {g} are not adjacent")


def height_increment(kind: LatticeKind, path: Sequence[Face],
                     occupancy: "Callable[[Edge], bool] | Iterable[Edge]") -> float:
    """h(path[-1]) - h(path[0]) along a nearest-neighbour face path."""
    kind = LatticeKind.parse(kind)
    if callable(occupancy):
        occ = occupancy
    else:
        occ_set = set(occupancy)
        occ = occ_set.__contains__
    total = 0.0
    for f, g in zip(path[:-1], path[1:]):
        e, s = crossing(kind, f, g)
        total += s * ((1.0 if occ(e) else 0.0) - edge_offset(kind, e))
    return total


# ---------------------------------------------------------------- periodisation

def reduce_vertex(v: Vertex, L: int) -> Vertex:
    return Vertex(v.color, v.x1 % L, v.x2 % L)


def reduce_edge(e: Edge, L: int) -> Edge:
    return Edge(reduce_vertex(e.black, L), e.direction)


def plane_position(kind: LatticeKind, v: Vertex) -> tuple[float, float]:
    """Euclidean embedding, used for drawing and geometric sanity checks."""
    kind = LatticeKind.parse(kind)
    if kind is LatticeKind.HONEYCOMB:
        x = 1.5 * v.x1
        y = math.sqrt(3) * (0.5 * v.x1 + v.x2)
        if v.color is Color.WHITE:
            x, y = x + 0.5, y - math.sqrt(3) / 2
        return x, y
    x, y = float(v.x1 - v.x2), float(v.x1 + v.x2)
    if v.color is Color.WHITE:
        x += 1.0
    return x, y
