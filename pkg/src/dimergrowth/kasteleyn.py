"""Finite bipartite planar graphs: Kasteleyn signs, partition functions, local statistics
and the finite-volume identities behind the speed and covariance formulas."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lattice import (Color, Edge, LatticeKind, Vertex, black, black_neighbors, edge_between,
                      plane_position, white)

BRUTE_FORCE_CAP = 24


class KasteleynError(RuntimeError):
    """Face condition violated or a required structure is missing."""


class DimensionMismatch(ValueError):
    """Different numbers of black and white vertices: no perfect matching can exist."""


# ---------------------------------------------------------------- graphs

@dataclass(frozen=True)
class FiniteGraph:
    """Bipartite graph with positive edge weights, embedded in the plane.

    Edges are triples (black index, white index, weight). When `kind` is set, vertices are
    lattice vertices and the embedding comes from `lattice.plane_position`; otherwise
    `positions` must supply one.
    """

    whites: tuple[Vertex, ...]
    blacks: tuple[Vertex, ...]
    edges: tuple[tuple[int, int, float], ...]
    kind: LatticeKind | None = None
    positions: Mapping[Vertex, tuple[float, float]] | None = None
    boundary: str = "planar"
    preset_signs: tuple[complex, ...] | None = None
    name: str = ""

    def __post_init__(self):
        nb, nw = len(self.blacks), len(self.whites)
        for b, w, wt in self.edges:
            if not (0 <= b < nb and 0 <= w < nw):
                raise ValueError("edge endpoint out of range")
            if not wt > 0:
                raise ValueError("edge weights must be positive")
        if self.preset_signs is not None and len(self.preset_signs) != len(self.edges):
            raise ValueError("preset signs must have one entry per edge")
        if self.boundary not in ("planar", "toroidal"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    # lookups are cached on first use; the dataclass itself stays immutable
    @property
    def white_index(self) -> dict[Vertex, int]:
        return _cached(self, "_wi", lambda: {v: i for i, v in enumerate(self.whites)})

    @property
    def black_index(self) -> dict[Vertex, int]:
        return _cached(self, "_bi", lambda: {v: i for i, v in enumerate(self.blacks)})

    @property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return _cached(self, "_ei", lambda: {(b, w): k for k, (b, w, _) in enumerate(self.edges)})

    def has(self, v: Vertex) -> bool:
        idx = self.white_index if v.color is Color.WHITE else self.black_index
        return v in idx

    def lattice_edge_id(self, e: Edge) -> int:
        b = self.black_index.get(e.black)
        w = self.white_index.get(e.white)
        if b is None or w is None or (b, w) not in self.edge_index:
            raise KeyError(f"edge {e!r} not in graph")
        return self.edge_index[(b, w)]

    def position(self, v: Vertex) -> tuple[float, float]:
        if self.positions is not None:
            return self.positions[v]
        if self.kind is None:
            raise ValueError("graph has no embedding")
        return plane_position(self.kind, v)

    def faces(self) -> list[list[int]]:
        """Bounded faces as closed walks of edge ids (interior faces only)."""
        return _cached(self, "_faces", lambda: _trace_faces(self)[0])

    def outer_faces(self) -> list[list[int]]:
        return _cached(self, "_outer", lambda: _trace_faces(self)[1])


def _cached(obj, key, make):
    d = obj.__dict__
    if key not in d:
        object.__setattr__(obj, key, make())
    return d[key]


def lattice_graph(kind: LatticeKind, whites: Iterable[Vertex], blacks: Iterable[Vertex],
                  weight=None, name: str = "") -> FiniteGraph:
    """Induced subgraph of the infinite lattice on the given vertex sets."""
    kind = LatticeKind.parse(kind)
    ws = tuple(sorted(set(whites)))
    bs = tuple(sorted(set(blacks)))
    wi = {v: i for i, v in enumerate(ws)}
    edges = []
    for bi, b in enumerate(bs):
        for d, w in enumerate(black_neighbors(kind, b)):
            if w in wi:
                wt = 1.0 if weight is None else float(weight(Edge(b, d)))
                edges.append((bi, wi[w], wt))
    return FiniteGraph(ws, bs, tuple(edges), kind=kind, name=name)


def build_aztec(L: int, offset: tuple[int, int] = (0, 0), standard_signs: bool = True) -> FiniteGraph:
    """Aztec diamond A_L, optionally translated; signs 1 on vertical and i on horizontal edges."""
    if L < 1:
        raise ValueError("L must be >= 1")
    o1, o2 = offset
    ws = [white(x + o1, y + o2) for x in range(L) for y in range(L + 1)]
    bs = [black(x + o1, y + o2) for x in range(L + 1) for y in range(L)]
    g = lattice_graph(LatticeKind.SQUARE, ws, bs, name=f"A_{L}")
    if not standard_signs:
        return g
    signs = []
    for b, w, _ in g.edges:
        d = edge_between(LatticeKind.SQUARE, g.blacks[b], g.whites[w]).direction
        signs.append(1j if d in (0, 2) else 1.0 + 0j)   # east/west edges are horizontal
    return FiniteGraph(g.whites, g.blacks, g.edges, kind=g.kind, preset_signs=tuple(signs), name=g.name)


def centered_aztec(L: int) -> FiniteGraph:
    """A_L translated so that the vertices near black(0,0) are well inside."""
    return build_aztec(L, offset=(-(L // 2), -((L - 1) // 2)))


def build_hexagon(L: int, center: tuple[int, int] = (0, 0)) -> FiniteGraph:
    """L x L x L hexagon of the honeycomb lattice.

    Faces F(c, n) form a triangular lattice; black(X, Y) is the triangle with corners
    (X-1, Y), (X-1, Y-1), (X, Y-1) and white(X, Y) the triangle (X, Y-1), (X-1, Y-1), (X, Y-2).
    The region keeps the triangles inside the hexagon of radius L around `center`.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    c0, n0 = center

    def inside(pts):
        return all(max(abs(c - c0), abs(n - n0), abs(c - c0 + n - n0)) <= L for c, n in pts)

    R = 2 * L + 3
    ws, bs = [], []
    for X in range(c0 - R, c0 + R + 1):
        for Y in range(n0 - R, n0 + R + 1):
            if inside([(X - 1, Y), (X - 1, Y - 1), (X, Y - 1)]):
                bs.append(black(X, Y))
            if inside([(X, Y - 1), (X - 1, Y - 1), (X, Y - 2)]):
                ws.append(white(X, Y))
    return lattice_graph(LatticeKind.HONEYCOMB, ws, bs, name=f"H_{L}")


def single_edge_graph(weight: float = 1.0) -> FiniteGraph:
    b, w = black(0, 0), white(0, 0)
    return FiniteGraph((w,), (b,), ((0, 0, float(weight)),), kind=LatticeKind.HONEYCOMB, name="edge")


# ---------------------------------------------------------------- faces

def _trace_faces(g: FiniteGraph) -> tuple[list[list[int]], list[list[int]]]:
    """Trace faces from the rotation system induced by the embedding.

    Vertices are numbered blacks first, then whites. A half-edge u->v is followed by
    v->w with w the counter-clockwise predecessor of u around v; bounded faces then come
    out counter-clockwise (positive area) and each component has one negative outer walk.
    """
    nb = len(g.blacks)
    verts = list(g.blacks) + list(g.whites)
    pos = [g.position(v) for v in verts]
    adj: list[list[tuple[int, int]]] = [[] for _ in verts]
    for k, (b, w, _) in enumerate(g.edges):
        adj[b].append((nb + w, k))
        adj[nb + w].append((b, k))
    order = {}
    for v, nbrs in enumerate(adj):
        x0, y0 = pos[v]
        nbrs.sort(key=lambda t: math.atan2(pos[t[0]][1] - y0, pos[t[0]][0] - x0))
        for i, (u, _) in enumerate(nbrs):
            order[(v, u)] = i
    seen = set()
    inner, outer = [], []
    for v in range(len(verts)):
        for u, _ in adj[v]:
            if (v, u) in seen:
                continue
            walk, area = [], 0.0
            a, b_ = v, u
            while (a, b_) not in seen:
                seen.add((a, b_))
                i = order[(b_, a)]
                w_, k = adj[b_][i - 1]
                walk.append(_edge_of(adj, a, b_))
                area += pos[a][0] * pos[b_][1] - pos[b_][0] * pos[a][1]
                a, b_ = b_, w_
            (inner if area > 1e-9 else outer).append(walk)
    return inner, outer


def _edge_of(adj, a, b):
    for u, k in adj[a]:
        if u == b:
            return k
    raise AssertionError


def face_phase(signs: Sequence[complex], face: Sequence[int]) -> complex:
    """Alternating product s1 s3 ... / (s2 s4 ...) around a face walk."""
    num, den = 1 + 0j, 1 + 0j
    for j, k in enumerate(face):
        if j % 2 == 0:
            num *= signs[k]
        else:
            den *= signs[k]
    return num / den


def face_defects(g: FiniteGraph, signs: Sequence[complex], tol: float = 1e-9) -> list[int]:
    """Indices of bounded faces violating the Kasteleyn condition."""
    bad = []
    for i, f in enumerate(g.faces()):
        n = len(f) // 2
        if abs(face_phase(signs, f) - (-1) ** (n + 1)) > tol:
            bad.append(i)
    return bad


# ---------------------------------------------------------------- Kasteleyn systems

@dataclass(frozen=True)
class KasteleynSystem:
    graph: FiniteGraph
    signs: tuple[complex, ...]
    matrix: np.ndarray  # rows: blacks, columns: whites

    def entry(self, b: Vertex, w: Vertex) -> complex:
        g = self.graph
        return complex(self.matrix[g.black_index[b], g.white_index[w]])

    @property
    def inverse(self) -> np.ndarray:
        """K^{-1}, rows indexed by whites and columns by blacks."""
        return _cached(self, "_inv", lambda: np.linalg.inv(self.matrix))

    def kinv(self, w: Vertex, b: Vertex) -> complex:
        g = self.graph
        return complex(self.inverse[g.white_index[w], g.black_index[b]])

    def logabsdet(self) -> float:
        def make():
            s, ld = np.linalg.slogdet(self.matrix)
            return -math.inf if s == 0 else float(ld)
        return _cached(self, "_ld", make)


def _spanning_signs(g: FiniteGraph) -> list[complex]:
    """Real +-1 signs: +1 on a spanning forest, the rest fixed leaf-first along the dual tree."""
    nb = len(g.blacks)
    n = nb + len(g.whites)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, (b, w, _) in enumerate(g.edges):
        adj[b].append((nb + w, k))
        adj[nb + w].append((b, k))
    tree = set()
    visited = [False] * n
    for s in range(n):
        if visited[s]:
            continue
        visited[s] = True
        dq = deque([s])
        while dq:
            v = dq.popleft()
            for u, k in adj[v]:
                if not visited[u]:
                    visited[u] = True
                    tree.add(k)
                    dq.append(u)
    faces = g.faces() + g.outer_faces()
    n_inner = len(g.faces())
    bits = [0] * len(g.edges)
    # dual adjacency through non-tree edges
    sides: dict[int, list[int]] = {}
    for fi, f in enumerate(faces):
        for k in f:
            if k not in tree:
                sides.setdefault(k, []).append(fi)
    dual: list[list[tuple[int, int]]] = [[] for _ in faces]
    for k, fs in sides.items():
        if len(fs) != 2 or fs[0] == fs[1]:
            raise KasteleynError(f"edge {k} does not separate two faces")
        dual[fs[0]].append((fs[1], k))
        dual[fs[1]].append((fs[0], k))
    parent_edge = [-1] * len(faces)
    order = []
    seen = [False] * len(faces)
    for root in range(n_inner, len(faces)):
        seen[root] = True
        dq = deque([root])
        while dq:
            f = dq.popleft()
            order.append(f)
            for h, k in dual[f]:
                if not seen[h]:
                    seen[h] = True
                    parent_edge[h] = k
                    dq.append(h)
    if not all(seen):
        raise KasteleynError("dual structure is not a forest rooted at outer faces")
    for f in reversed(order):
        if f >= n_inner:
            continue
        walk = faces[f]
        need = (len(walk) // 2 + 1) % 2
        k0 = parent_edge[f]
        have = sum(bits[k] for k in walk if k != k0) % 2
        bits[k0] = (need - have) % 2
    return [-1.0 + 0j if bt else 1.0 + 0j for bt in bits]


def orient(g: FiniteGraph, signs: Sequence[complex] | None = None) -> KasteleynSystem:
    """Kasteleyn system of a planar graph; preset signs are checked, else constructed."""
    if g.boundary != "planar":
        raise ValueError("orient handles planar graphs only")
    if signs is None:
        signs = g.preset_signs if g.preset_signs is not None else _spanning_signs(g)
    signs = tuple(complex(s) for s in signs)
    bad = face_defects(g, signs)
    if bad:
        raise KasteleynError(f"Kasteleyn condition fails on faces {bad[:10]}")
    M = np.zeros((len(g.blacks), len(g.whites)), dtype=complex)
    for (b, w, wt), s in zip(g.edges, signs):
        M[b, w] = s * wt
    return KasteleynSystem(g, signs, M)


def partition_function(ks: KasteleynSystem) -> float:
    nb, nw = ks.matrix.shape
    if nb != nw:
        raise DimensionMismatch(f"{nb} black vs {nw} white vertices")
    if nb == 0:
        return 1.0
    ld = ks.logabsdet()
    return 0.0 if ld == -math.inf else math.exp(ld)


def edge_probabilities(ks: KasteleynSystem, edges: Sequence[Edge]) -> float:
    """Probability that all the given edges are covered (local statistics formula)."""
    if not edges:
        return 1.0
    if partition_function(ks) == 0.0:
        raise np.linalg.LinAlgError("singular Kasteleyn matrix")
    g = ks.graph
    bi = [g.black_index[e.black] for e in edges]
    wi = [g.white_index[e.white] for e in edges]
    pref = np.prod([ks.matrix[b, w] for b, w in zip(bi, wi)])
    minor = ks.inverse[np.ix_(wi, bi)]
    val = pref * np.linalg.det(minor)
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise KasteleynError(f"non-real probability {val}")
    return float(val.real)


@dataclass(frozen=True)
class RemovalSpec:
    removed_edges: tuple[Edge, ...] = ()
    removed_vertices: tuple[Vertex, ...] = ()

    def vertices(self) -> set[Vertex]:
        out = set(self.removed_vertices)
        for e in self.removed_edges:
            out.add(e.black)
            out.add(e.white)
        return out


def remove(g: FiniteGraph, spec: RemovalSpec) -> FiniteGraph:
    """G minus the endpoints of the removed edges and the removed vertices."""
    gone = spec.vertices()
    if not gone:
        return g
    ws = [v for v in g.whites if v not in gone]
    bs = [v for v in g.blacks if v not in gone]
    wi = {v: i for i, v in enumerate(ws)}
    bi = {v: i for i, v in enumerate(bs)}
    edges = []
    for b, w, wt in g.edges:
        vb, vw = g.blacks[b], g.whites[w]
        if vb in bi and vw in wi:
            edges.append((bi[vb], wi[vw], wt))
    return FiniteGraph(tuple(ws), tuple(bs), tuple(edges), kind=g.kind, positions=g.positions,
                       boundary=g.boundary, name=g.name + "\\V")


def z_ratio(g: FiniteGraph, edges: Sequence[Edge] = (), vertices: Sequence[Vertex] = (),
            base: KasteleynSystem | None = None) -> float:
    """Z_G[E1, V1] / Z_G by orienting the reduced graph from scratch."""
    ks = base if base is not None else orient(g)
    for v in list(vertices) + [x for e in edges for x in (e.black, e.white)]:
        if not g.has(v):
            raise KeyError(f"{v!r} not in graph")
    sub = remove(g, RemovalSpec(tuple(edges), tuple(vertices)))
    if len(sub.blacks) != len(sub.whites):
        return 0.0
    if not sub.blacks:
        return math.exp(-ks.logabsdet())
    ld = orient(sub).logabsdet()
    if ld == -math.inf:
        return 0.0
    return math.exp(ld - ks.logabsdet())


# ---------------------------------------------------------------- brute force

def brute_force(g: FiniteGraph, cap: int = BRUTE_FORCE_CAP) -> list[tuple[int, ...]]:
    """All perfect matchings as sorted tuples of edge ids."""
    nb, nw = len(g.blacks), len(g.whites)
    if max(nb, nw) > cap:
        raise ValueError(f"brute force capped at {cap} vertices per colour")
    if nb != nw:
        return []
    inc: list[list[tuple[int, int]]] = [[] for _ in range(nb)]
    for k, (b, w, _) in enumerate(g.edges):
        inc[b].append((w, k))
    used = [False] * nw
    out: list[tuple[int, ...]] = []
    chosen: list[int] = []

    def rec(b):
        if b == nb:
            out.append(tuple(sorted(chosen)))
            return
        for w, k in inc[b]:
            if not used[w]:
                used[w] = True
                chosen.append(k)
                rec(b + 1)
                chosen.pop()
                used[w] = False

    rec(0)
    return out


def weighted_count(g: FiniteGraph, matchings: Iterable[Sequence[int]]) -> float:
    return float(sum(math.prod(g.edges[k][2] for k in m) for m in matchings))


def matching_phase(ks: KasteleynSystem, m: Sequence[int]) -> complex:
    """Phase of the determinant term of a matching (permutation sign times entries)."""
    g = ks.graph
    perm = [0] * len(g.blacks)
    val = 1 + 0j
    for k in m:
        b, w, _ = g.edges[k]
        perm[b] = w
        val *= ks.matrix[b, w]
    return _perm_sign(perm) * val / abs(val)


def _perm_sign(p: Sequence[int]) -> int:
    p = list(p)
    s = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def gauge(ks: KasteleynSystem, fb: Sequence[float], fw: Sequence[float]) -> KasteleynSystem:
    """Rescale rows and columns by positive vertex factors."""
    M = np.asarray(fb)[:, None] * ks.matrix * np.asarray(fw)[None, :]
    return KasteleynSystem(ks.graph, ks.signs, M)


# ---------------------------------------------------------------- text format

def dump_graph(g: FiniteGraph) -> str:
    lines = [f"graph {g.kind.value if g.kind else 'none'} {g.boundary} {g.name or '-'}"]
    for v in g.whites:
        lines.append(f"w {v.x1} {v.x2}")
    for v in g.blacks:
        lines.append(f"b {v.x1} {v.x2}")
    for k, (b, w, wt) in enumerate(g.edges):
        extra = ""
        if g.preset_signs is not None:
            s = g.preset_signs[k]
            extra = f" {s.real!r} {s.imag!r}"
        lines.append(f"e {b} {w} {wt!r}{extra}")
    return "\n".join(lines) + "\n"


def load_graph(text: str) -> FiniteGraph:
    ws, bs, edges, signs = [], [], [], []
    kind, boundary, name = None, "planar", ""
    for raw in text.splitlines():
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        if tag == "graph":
            kind = None if parts[1] == "none" else LatticeKind.parse(parts[1])
            boundary = parts[2]
            name = "" if parts[3] == "-" else parts[3]
        elif tag == "w":
            ws.append(white(int(parts[1]), int(parts[2])))
        elif tag == "b":
            bs.append(black(int(parts[1]), int(parts[2])))
        elif tag == "e":
            edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
            if len(parts) >= 6:
                signs.append(complex(float(parts[4]), float(parts[5])))
        else:
            raise ValueError(f"bad line {raw!r}")
    preset = tuple(signs) if signs and len(signs) == len(edges) else None
    return FiniteGraph(tuple(ws), tuple(bs), tuple(edges), kind=kind, boundary=boundary,
                       preset_signs=preset, name=name)


# ---------------------------------------------------------------- square-lattice ladder

SQ = LatticeKind.SQUARE
W_MONO = white(-1, 1)       # removed white
B_MONO = black(1, 0)        # removed black
B1 = black(0, 0)
W_TILDE = white(0, 1)


def ladder_edge(k: int) -> Edge:
    """e_k: e_{2m+1} = (black(1,m), white(0,m+1)), e_{2m} = (black(0,m), white(-1,m))."""
    if k < 1:
        raise ValueError("k >= 1")
    m, r = divmod(k, 2)
    return Edge(black(1, m), 2) if r else Edge(black(0, m), 3)


def ladder_edge_tilde(k: int) -> Edge:
    """e~_k: e~_0 = (black(0,0), white(-1,1)), e~_{2m+1} = (black(1,m+1), white(0,m+1)),
    e~_{2m} = (black(0,m), white(-1,m+1))."""
    if k < 0:
        raise ValueError("k >= 0")
    m, r = divmod(k, 2)
    return Edge(black(1, m + 1), 3) if r else Edge(black(0, m), 2)


def sigma(k: int) -> list[Edge]:
    return [ladder_edge(j) for j in range(1, k + 1)]


def sigma_tilde(k: int) -> list[Edge]:
    return [ladder_edge_tilde(j) for j in range(1, k + 1)]


@dataclass
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    gap: float
    ok: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "gap": self.gap,
                "ok": self.ok, "details": self.details}


def _require(g: FiniteGraph, verts: Iterable[Vertex]):
    missing = [v for v in verts if not g.has(v)]
    if missing:
        raise ValueError(f"graph too small: missing {missing[:4]}")


def _edges_vertices(edges):
    return [x for e in edges for x in (e.black, e.white)]


def verify_ladder_identity(g: FiniteGraph, l: int, tol: float = 1e-9) -> IdentityReport:
    """Z[{w,b}]/Z = P[e~0,e1] + sum_{k=2}^l P[Sigma_k] + R^l, plus 0 <= R^l <= P[e1..e_{l-1}].

    Left side and remainder come from re-oriented reduced graphs; probabilities come from
    minors of the inverse. The two routes share no computation.
    """
    if l < 2:
        raise ValueError("l >= 2")
    _require(g, [W_MONO, B_MONO] + _edges_vertices(sigma(l) + sigma_tilde(l) + [ladder_edge_tilde(0)]))
    ks = orient(g)
    lhs = z_ratio(g, vertices=[W_MONO, B_MONO], base=ks)
    p0 = edge_probabilities(ks, [ladder_edge_tilde(0), ladder_edge(1)])
    terms = [edge_probabilities(ks, sigma(k)) for k in range(2, l + 1)]
    rem = z_ratio(g, edges=sigma_tilde(l - 1), vertices=[W_MONO, B_MONO], base=ks)
    rhs = p0 + sum(terms) + rem
    bound = edge_probabilities(ks, sigma(l - 1))
    gap = abs(lhs - rhs)
    ok_bound = -tol <= rem <= bound + tol
    return IdentityReport("ladder", lhs, rhs, gap, gap <= tol and ok_bound,
                          {"l": l, "p_e0_e1": p0, "terms": terms, "remainder": rem,
                           "remainder_bound": bound, "bound_ok": ok_bound})


def monomer_ratio(g: FiniteGraph) -> dict:
    """Both evaluations of Z[{w,b}]/Z from the single-entry sign flip.

    `formula` uses one inverse entry and P[e~0,e1]; `flipped` is |det K~|/|det K| with K~
    the restriction of K with the sign of K(b1, w~) reversed. The identity is checked in
    absolute value.
    """
    _require(g, [W_MONO, B_MONO, B1, W_TILDE])
    ks = orient(g)
    K = ks.matrix
    ib, iw = g.black_index, g.white_index
    p0 = edge_probabilities(ks, [ladder_edge_tilde(0), ladder_edge(1)])
    coef = 2 * ks.entry(B1, W_TILDE) / (ks.entry(B1, W_MONO) * ks.entry(B_MONO, W_TILDE))
    formula = abs(ks.kinv(W_MONO, B_MONO) + coef * p0)
    rows = [i for i in range(len(g.blacks)) if i != ib[B_MONO]]
    cols = [j for j in range(len(g.whites)) if j != iw[W_MONO]]
    Kt = K[np.ix_(rows, cols)].copy()
    Kt[rows.index(ib[B1]), cols.index(iw[W_TILDE])] *= -1
    s, ld = np.linalg.slogdet(Kt)
    flipped = 0.0 if s == 0 else math.exp(ld - ks.logabsdet())
    reoriented = z_ratio(g, vertices=[W_MONO, B_MONO], base=ks)
    return {"formula": formula, "flipped": flipped, "reoriented": reoriented, "p_e0_e1": p0,
            "coef": coef}


def verify_corollary(g: FiniteGraph, l: int, tol: float = 1e-9) -> IdentityReport:
    """Monomer formula on the left, ladder expansion on the right."""
    lad = verify_ladder_identity(g, l, tol)
    mono = monomer_ratio(g)
    gap = abs(mono["formula"] - lad.rhs)
    return IdentityReport("corollary", mono["formula"], lad.rhs, gap,
                          gap <= tol and lad.details["bound_ok"], {"l": l, "ladder": lad.as_dict()})


# ---------------------------------------------------------------- honeycomb covariance identities

HEX = LatticeKind.HONEYCOMB


def sigma_check(m: int, x: int, n: int) -> list[Vertex]:
    out = []
    for i in range(m):
        out += [black(x, n - i), white(x, n - i), black(x + 1, n - i - 1), white(x + 1, n - i)]
    return out


def sigma_hex(m: int, x: int, n: int) -> list[Vertex]:
    return sigma_check(m, x, n) + [black(x, n - m), white(x + 1, n - m)]


def o_tilde(m: int, x: int, n: int) -> list[Edge]:
    """Edges of O~_{m,e} for e = (black(x+1,n), white(x,n+1))."""
    out = []
    for i in range(1, m + 1):
        out.append(Edge(black(x, n + 1 - i), 0))
        out.append(Edge(black(x + 1, n - i), 1))
    return out


def pair_determinant(ks: KasteleynSystem, x1: int, n1: int, x2: int, n2: int) -> complex:
    M = np.array([[ks.kinv(white(xi + 1, ni), black(xj, nj)) for xj, nj in ((x1, n1), (x2, n2))]
                  for xi, ni in ((x1, n1), (x2, n2))])
    return complex(np.linalg.det(M))


def verify_hex_identity(h: FiniteGraph, e1: Edge, e2: Edge, N1: int, N2: int,
                        tol: float = 1e-9) -> IdentityReport:
    """Finite-volume expansion of the 2x2 inverse-kernel determinant on a honeycomb patch.

    Edges must be horizontal, e_i = (black(x_i+1, n_i), white(x_i, n_i+1)). Handles
    |x1 - x2| > 1 and x1 == x2 (n1 != n2, relabelled so that n1 > n2).
    """
    for e in (e1, e2):
        if e.direction != 2:
            raise ValueError("edges must be horizontal")
    x1, n1 = e1.black.x1 - 1, e1.black.x2
    x2, n2 = e2.black.x1 - 1, e2.black.x2
    if x1 == x2 and n1 < n2:
        (x1, n1, N1), (x2, n2, N2) = (x2, n2, N2), (x1, n1, N1)
    if x1 == x2 and n1 == n2:
        raise ValueError("identical edges: the determinant vanishes trivially")
    if abs(x1 - x2) == 1:
        raise ValueError("neighbouring columns are not covered by the identity")
    D = n1 - n2
    if x1 != x2:
        _require(h, sigma_hex(N1, x1, n1) + sigma_hex(N2, x2, n2))
    else:
        _require(h, sigma_hex(D + N2, x1, n1))
    ks = orient(h, signs=[1.0] * len(h.edges))
    det = pair_determinant(ks, x1, n1, x2, n2)
    lhs_z = z_ratio(h, vertices=sigma_hex(0, x1, n1) + sigma_hex(0, x2, n2), base=ks)

    def Z(vs):
        return z_ratio(h, vertices=vs, base=ks)

    def P(edges):
        return edge_probabilities(ks, edges)

    details: dict = {"case": None}
    if x1 != x2:
        details["case"] = "separated"
        main = sum(P(o_tilde(a, x1, n1) + o_tilde(b, x2, n2))
                   for a in range(1, N1 + 1) for b in range(1, N2 + 1))
        rem = (Z(sigma_hex(N1, x1, n1) + sigma_hex(N2, x2, n2))
               + sum(Z(sigma_hex(N1, x1, n1) + sigma_check(b, x2, n2)) for b in range(1, N2 + 1))
               + sum(Z(sigma_check(a, x1, n1) + sigma_hex(N2, x2, n2)) for a in range(1, N1 + 1)))
        bound = (P(o_tilde(N1, x1, n1) + o_tilde(N2, x2, n2))
                 + sum(P(o_tilde(N1, x1, n1) + o_tilde(b, x2, n2)) for b in range(1, N2 + 1))
                 + sum(P(o_tilde(a, x1, n1) + o_tilde(N2, x2, n2)) for a in range(1, N1 + 1)))
    else:
        details["case"] = "same_column"
        main = (sum(P(o_tilde(a, x1, n1) + o_tilde(b, x2, n2))
                    for a in range(1, D) for b in range(1, N2 + 1))
                + sum(P(o_tilde(b + D, x1, n1)) for b in range(1, N2 + 1)))
        rem = (sum(Z(sigma_check(a, x1, n1) + sigma_hex(N2, x2, n2)) for a in range(1, D))
               + Z(sigma_hex(D + N2, x1, n1)))
        bound = (sum(P(o_tilde(a, x1, n1) + o_tilde(N2, x2, n2)) for a in range(1, D))
                 + P(o_tilde(D + N2, x1, n1)))
    rhs = main + rem
    gap = max(abs(det - rhs), abs(lhs_z - rhs))
    bound_ok = -tol <= rem <= bound + tol
    details.update({"determinant": det, "z_ratio": lhs_z, "main": main, "remainder": rem,
                    "remainder_bound": bound, "bound_ok": bound_ok, "N1": N1, "N2": N2})
    return IdentityReport("hex_pair", det.real, rhs, gap, gap <= tol and bound_ok, details)
