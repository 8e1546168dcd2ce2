"""Torus dimer configurations with fixed winding, and MCMC in a winding sector.

A configuration stores, for every black vertex of the L x L torus, the direction index
of its dimer. Local moves and sampling run on the equivalent particle representation
(see ``_core``); matching-level routines here serve as the reference implementation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _core
from .lattice import (Edge, Face, LatticeKind, Slope, black, check_slope, degree,
                      edge_offset, face_column_index, face_from_column, face_neighbors,
                      face_vertices, height_increment,
                      origin_face, positions_per_column, reduce_edge)


class InfeasibleWinding(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


def kind_code(kind: LatticeKind) -> int:
    return _core.HEX if LatticeKind.parse(kind) is LatticeKind.HONEYCOMB else _core.SQ


@dataclass
class TorusConfig:
    kind: LatticeKind
    L: int
    match: np.ndarray  # (L, L) int8, direction of the dimer at black (x1, x2)

    def __post_init__(self):
        self.kind = LatticeKind.parse(self.kind)
        self.match = np.asarray(self.match, dtype=np.int8)
        if self.match.shape != (self.L, self.L):
            raise InvalidConfig(f"match has shape {self.match.shape}, expected {(self.L, self.L)}")

    def copy(self) -> "TorusConfig":
        return TorusConfig(self.kind, self.L, self.match.copy())

    def occupied(self, e: Edge) -> bool:
        b = e.black
        return int(self.match[b.x1 % self.L, b.x2 % self.L]) == e.direction

    @property
    def winding(self) -> tuple[int, int]:
        return winding(self)

    def __eq__(self, other) -> bool:
        return (isinstance(other, TorusConfig) and self.kind is other.kind
                and self.L == other.L and np.array_equal(self.match, other.match))


def is_perfect_matching(c: TorusConfig) -> bool:
    L = c.L
    if c.match.min() < 0 or c.match.max() >= degree(c.kind):
        return False
    hits = np.zeros((L, L), dtype=np.int64)
    for x1 in range(L):
        for x2 in range(L):
            w = Edge(black(x1, x2), int(c.match[x1, x2])).white
            hits[w.x1 % L, w.x2 % L] += 1
    return bool((hits == 1).all())


def cycle_paths(kind: LatticeKind, L: int) -> tuple[list[Face], list[Face]]:
    """Face paths from the origin along the two fundamental cycles (first, second)."""
    kind = LatticeKind.parse(kind)
    x0 = origin_face(kind)
    if kind is LatticeKind.HONEYCOMB:
        first = [Face(x0.x1 + i, x0.x2) for i in range(L + 1)]
        second = [Face(x0.x1, x0.x2 + i) for i in range(L + 1)]
        return first, second
    first = [x0]
    for i in range(L):
        first.append(face_from_column(kind, i + 1, 1))
        first.append(face_from_column(kind, i + 1, 0))
    second = [face_from_column(kind, 0, k) for k in range(2 * L + 1)]
    return first, second


def winding(c: TorusConfig) -> tuple[int, int]:
    first, second = cycle_paths(c.kind, c.L)
    w = [height_increment(c.kind, p, c.occupied) for p in (first, second)]
    out = tuple(int(round(x)) for x in w)
    if any(abs(x - y) > 1e-9 for x, y in zip(w, out)):
        raise InvalidConfig(f"non-integer winding {w}")
    return out


def target_winding(kind: LatticeKind, L: int, rho: Slope) -> tuple[int, int]:
    return math.floor(L * rho.rho1), math.floor(L * rho.rho2)


def realized_slope(kind: LatticeKind, L: int, rho: Slope) -> Slope:
    w1, w2 = target_winding(kind, L, rho)
    return Slope(w1 / L, w2 / L)


# ---------------------------------------------------------------- particle bridge

def to_particles(c: TorusConfig) -> np.ndarray:
    """Sorted transversal positions per column, shape (L, N)."""
    L = c.L
    rows = []
    for col in range(L):
        if c.kind is LatticeKind.HONEYCOMB:
            ks = np.flatnonzero(c.match[(col + 1) % L] == 2)
        else:
            d = c.match[col]
            ks = np.sort(np.concatenate([2 * np.flatnonzero(d == 0), 2 * np.flatnonzero(d == 1) + 1]))
        rows.append(ks)
    sizes = {len(r) for r in rows}
    if len(sizes) != 1:
        raise InvalidConfig(f"columns carry different particle numbers {sorted(sizes)}")
    if sizes == {0}:
        raise InvalidConfig("configuration has empty columns")
    return np.array(rows, dtype=np.int64)


def from_particles(kind: LatticeKind, L: int, pos: np.ndarray) -> TorusConfig:
    """Rebuild the matching: transversal dimers plus the unique pairing on every line."""
    kind = LatticeKind.parse(kind)
    code = kind_code(kind)
    pos = np.asarray(pos, dtype=np.int64)
    M = positions_per_column(kind, L)
    if pos.shape[0] != L or pos.shape[1] == 0 or not _core.is_valid(code, pos, M):
        raise InvalidConfig("particle configuration violates interlacement")
    match = np.full((L, L), -1, dtype=np.int8)
    P = 2 * L
    hex_ = kind is LatticeKind.HONEYCOMB
    for col in range(L):
        for k in pos[col]:
            e_x1 = (col + 1) % L if hex_ else col
            e_x2 = (k % M) if hex_ else (k % M) // 2
            match[e_x1, e_x2] = 2 if hex_ else k % 2
    for line in range(L):
        removed = np.zeros(P, dtype=bool)
        removed[[_core.lkey(code, int(k)) % P for k in pos[line]]] = True
        removed[[_core.rkey(code, int(k)) % P for k in pos[(line - 1) % L]]] = True
        start = int(np.flatnonzero(removed)[0])
        u = start + 1
        while u < start + P:
            if removed[u % P]:
                u += 1
                continue
            v = u % P
            if v % 2 == 0:
                bkey, d = v + 1, (0 if hex_ else 3)
            else:
                bkey, d = v, (1 if hex_ else 2)
            match[line, ((bkey - 1) // 2) % L] = d
            u += 2
    out = TorusConfig(kind, L, match)
    if (match < 0).any():
        raise InvalidConfig("reconstruction left black vertices unmatched")
    return out


# ---------------------------------------------------------------- baseline

def _direction_densities(kind: LatticeKind, w1: int, w2: int, L: int) -> list[float]:
    """Per-direction dimer densities realizing the slope (w1/L, w2/L)."""
    r1, r2 = w1 / L, w2 / L
    if kind is LatticeKind.HONEYCOMB:
        return [r1, r2 - r1, 1.0 - r2]
    # Z^2: rho1 = 1/2 - pW - pN, rho2 = pE + pN - 1/2; pN is free within its range
    t = 0.5 * (max(0.0, r2 - r1) + min(0.5 - r1, 0.5 + r2))
    return [r2 + 0.5 - t, t, 0.5 - r1 - t, r1 - r2 + t]


def baseline_config(kind: LatticeKind, L: int, rho: Slope) -> TorusConfig:
    """Deterministic periodic configuration with winding (floor(L rho1), floor(L rho2)).

    The mean height of a density vector with the target slope is linear; rounding it
    down within each face's residue class gives a valid height function, because every
    mean increment lies in the range of allowed increments. Dimers are read off from it.
    """
    kind = LatticeKind.parse(kind)
    rho = check_slope(kind, rho)
    if L < 2:
        raise InfeasibleWinding("L must be at least 2")
    if kind is LatticeKind.SQUARE and L % 2:
        raise InfeasibleWinding("the square lattice torus needs even L")
    w1, w2 = target_winding(kind, L, rho)
    M = positions_per_column(kind, L)
    N = L - w2 if kind is LatticeKind.HONEYCOMB else L // 2 + w2
    if N < 1:
        raise InfeasibleWinding(f"winding {(w1, w2)} leaves no particles in a column")
    dens = _direction_densities(kind, w1, w2, L)
    # linear height and residue class on a patch covering the fundamental domain
    cols, ks = range(-2, L + 2), range(-3, M + 3)
    x0 = face_column_index(kind, origin_face(kind))
    lin = {x0: 0.0}
    res = {x0: 0.0}
    queue = deque([x0])
    while queue:
        fc = queue.popleft()
        f = face_from_column(kind, *fc)
        for g, e, s in face_neighbors(kind, f):
            gc = face_column_index(kind, g)
            if gc in lin or gc[0] not in cols or gc[1] not in ks:
                continue
            off = edge_offset(kind, e)
            lin[gc] = lin[fc] + s * (dens[e.direction] - off)
            res[gc] = (res[fc] - s * off) % 1.0
            queue.append(gc)

    def height(fc):
        r = res[fc]
        return r + math.floor(lin[fc] - r + 1e-9)

    match = np.full((L, L), -1, dtype=np.int8)
    for col in range(L):
        for k in range(M):
            fc = (col, k)
            for g, e, s in face_neighbors(kind, face_from_column(kind, col, k)):
                dh = height(face_column_index(kind, g)) - height(fc)
                if abs(dh - s * (1.0 - edge_offset(kind, e))) < 1e-6:
                    match[e.black.x1 % L, e.black.x2 % L] = e.direction
    c = TorusConfig(kind, L, match)
    if (match < 0).any() or not is_perfect_matching(c) or winding(c) != (w1, w2):
        raise InfeasibleWinding(f"no configuration with winding {(w1, w2)} at L={L}")
    return c


# ---------------------------------------------------------------- local moves

def torus_faces(kind: LatticeKind, L: int) -> list[Face]:
    M = positions_per_column(kind, L)
    return [face_from_column(kind, col, k) for col in range(L) for k in range(M)]


def _boundary(c: TorusConfig, f: Face) -> list[Edge]:
    return [reduce_edge(e, c.L) for _, e, _ in face_neighbors(c.kind, f)]


def is_flippable(c: TorusConfig, f: Face) -> bool:
    L = c.L
    verts = {(v.color, v.x1 % L, v.x2 % L) for v in face_vertices(c.kind, f)}
    covered = set()
    for e in _boundary(c, f):
        if c.occupied(e):
            for v in (e.black, e.white):
                covered.add((v.color, v.x1 % L, v.x2 % L))
    return covered == verts


def flippable_faces(c: TorusConfig) -> list[Face]:
    return [f for f in torus_faces(c.kind, c.L) if is_flippable(c, f)]


def rotate_face(c: TorusConfig, f: Face) -> TorusConfig:
    if not is_flippable(c, f):
        raise InvalidConfig(f"face {f} is not flippable")
    out = c.copy()
    for e in _boundary(c, f):
        if not c.occupied(e):
            out.match[e.black.x1 % c.L, e.black.x2 % c.L] = e.direction
    return out


# ---------------------------------------------------------------- MCMC

@dataclass
class MCMCStats:
    attempts: int = 0
    accepted: int = 0

    @property
    def acceptance(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0


@dataclass
class Chain:
    """Particle-level state of a sampler run; avoids re-deriving the matching every sweep."""
    kind: LatticeKind
    L: int
    pos: np.ndarray
    stats: MCMCStats = field(default_factory=MCMCStats)

    @classmethod
    def from_config(cls, c: TorusConfig) -> "Chain":
        return cls(c.kind, c.L, to_particles(c))

    @property
    def M(self) -> int:
        return positions_per_column(self.kind, self.L)

    @property
    def n_faces(self) -> int:
        return self.L * self.M

    def flips(self, attempts: int, seed: int) -> None:
        _core.seed_rng(seed)
        acc = _core.flip_sweeps(kind_code(self.kind), self.pos, self.M, int(attempts))
        self.stats.attempts += int(attempts)
        self.stats.accepted += int(acc)

    def heat_bath(self, updates: int, seed: int) -> None:
        _core.seed_rng(seed)
        moved = _core.heat_bath(kind_code(self.kind), self.pos, self.M, int(updates))
        self.stats.attempts += int(updates)
        self.stats.accepted += int(moved)

    def sweep(self, sweeps: int, seed: int, method: str = "heat-bath") -> None:
        if method == "flip":
            self.flips(sweeps * self.n_faces, seed)
        elif method == "heat-bath":
            self.heat_bath(sweeps * self.pos.size, seed)
        else:
            raise ValueError(f"unknown method {method!r}")

    def config(self) -> TorusConfig:
        return from_particles(self.kind, self.L, self.pos)


def default_sweeps(L: int) -> int:
    return int(math.ceil(L * L * math.log(L)))


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**62))


def mcmc_run(c: TorusConfig, sweeps: int, rng: np.random.Generator,
             method: str = "flip") -> tuple[TorusConfig, MCMCStats]:
    """Evolve c by `sweeps` sweeps of face rotations (or heat-bath particle updates).

    A flip sweep is one attempt per face. A heat-bath sweep is one update per particle.
    """
    chain = Chain.from_config(c)
    chain.sweep(sweeps, _seed(rng), method)
    return chain.config(), chain.stats


def sample_configs(kind: LatticeKind, L: int, rho: Slope, n: int, rng: np.random.Generator,
                   warmup: int | None = None, spacing: int = 10,
                   method: str = "heat-bath") -> list[TorusConfig]:
    """n configurations from one chain after warm-up, `spacing` sweeps apart."""
    chain = Chain.from_config(baseline_config(kind, L, rho))
    chain.sweep(default_sweeps(L) if warmup is None else warmup, _seed(rng), method)
    out = []
    for _ in range(n):
        chain.sweep(spacing, _seed(rng), method)
        out.append(chain.config())
    return out


# ---------------------------------------------------------------- observables and I/O

def empirical_densities(c: TorusConfig) -> np.ndarray:
    """Fraction of black vertices matched in each direction."""
    counts = np.bincount(c.match.ravel().astype(np.int64), minlength=degree(c.kind))
    return counts / c.match.size


def dump_config(c: TorusConfig, path: str | Path | None = None) -> str:
    w1, w2 = winding(c)
    lines = [f"kind {c.kind.value}", f"L {c.L}", f"winding {w1} {w2}"]
    lines += ["".join(str(int(d)) for d in row) for row in c.match]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_config(source: str | Path) -> TorusConfig:
    text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else str(source)
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    head = dict(ln.split(None, 1) for ln in lines[:3])
    L = int(head["L"])
    match = np.array([[int(ch) for ch in ln] for ln in lines[3:3 + L]], dtype=np.int8)
    c = TorusConfig(LatticeKind.parse(head["kind"]), L, match)
    if not is_perfect_matching(c):
        raise InvalidConfig("snapshot is not a perfect matching")
    if winding(c) != tuple(int(x) for x in head["winding"].split()):
        raise InvalidConfig("snapshot winding does not match its header")
    return c
