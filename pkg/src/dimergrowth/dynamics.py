"""Interlaced particle growth dynamics on the torus.

Every transversal edge carries a clock. When it rings upward, the highest particle
strictly below the edge jumps onto it if interlacement survives; downward rings move the
lowest particle above the edge down onto it under the mirrored check. J records, for
every face, the signed number of particles that jumped across it.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _core
from .lattice import (Edge, Face, LatticeKind, column_position, face_column_index,
                      is_transversal, origin_face, positions_per_column)
from .sampler import TorusConfig, from_particles, kind_code, to_particles


class EmptyColumn(ValueError):
    pass


@dataclass(frozen=True)
class JumpRates:
    p: float = 1.0
    q: float = 0.0

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q <= 0:
            raise ValueError(f"rates need p, q >= 0 and p + q > 0, got {(self.p, self.q)}")


@dataclass
class ParticleSystem:
    kind: LatticeKind
    L: int
    pos: np.ndarray            # (L, N) unrolled sorted positions
    time: float = 0.0
    J: np.ndarray | None = None  # (L, M) per-face signed crossing counts

    def __post_init__(self):
        self.kind = LatticeKind.parse(self.kind)
        self.pos = np.ascontiguousarray(self.pos, dtype=np.int64)
        if self.J is None:
            self.J = np.zeros((self.L, self.M), dtype=np.int64)

    @property
    def M(self) -> int:
        return positions_per_column(self.kind, self.L)

    @property
    def code(self) -> int:
        return kind_code(self.kind)

    @property
    def n_edges(self) -> int:
        return self.L * self.M

    @property
    def origin(self) -> Face:
        return origin_face(self.kind)

    def face_current(self, f: Face) -> int:
        col, k = face_column_index(self.kind, f)
        return int(self.J[col % self.L, k % self.M])

    @property
    def current(self) -> int:
        return self.face_current(self.origin)

    @property
    def columns(self) -> list[list[int]]:
        """Positions reduced to [0, M), in cyclic order starting from the lowest."""
        return [sorted(int(k) % self.M for k in row) for row in self.pos]

    def is_valid(self) -> bool:
        return bool(_core.is_valid(self.code, self.pos, self.M))

    def copy(self) -> "ParticleSystem":
        return ParticleSystem(self.kind, self.L, self.pos.copy(), self.time, self.J.copy())

    def to_config(self) -> TorusConfig:
        return from_particles(self.kind, self.L, self.pos)


def particles_from_matching(c: TorusConfig) -> ParticleSystem:
    try:
        pos = to_particles(c)
    except ValueError as exc:
        raise EmptyColumn(str(exc)) from exc
    return ParticleSystem(c.kind, c.L, pos)


def matching_from_particles(s: ParticleSystem) -> TorusConfig:
    return s.to_config()


# ---------------------------------------------------------------- single moves

@dataclass(frozen=True)
class ParticleRef:
    column: int
    index: int      # row index in ParticleSystem.pos
    position: int   # unrolled position


def _locate(s: ParticleSystem, e: Edge) -> tuple[int, int]:
    if not is_transversal(s.kind, e):
        raise ValueError(f"{e!r} is not transversal")
    col, k = column_position(s.kind, e)
    return col % s.L, k


def p_of_edge(s: ParticleSystem, e: Edge) -> ParticleRef:
    """Highest particle strictly below e within one period of its column."""
    col, k = _locate(s, e)
    row = s.pos[col]
    j, a, _ = _core.find_below(row, s.M, k)
    if j < 0:
        # e itself is occupied: the particle below it is the previous one in the column
        j = int(np.flatnonzero(row % s.M == k % s.M)[0]) - 1
        a = row[j] if j >= 0 else row[-1] - s.M
        j %= row.shape[0]
    return ParticleRef(col, int(j), int(a))


def can_reach(s: ParticleSystem, e: Edge) -> bool:
    col, k = _locate(s, e)
    j, _, b = _core.find_below(s.pos[col], s.M, k)
    return j >= 0 and bool(_core.can_move_up(s.code, s.pos, s.M, col, j, b))


def can_reach_down(s: ParticleSystem, e: Edge) -> bool:
    col, k = _locate(s, e)
    j, _, b = _core.find_above(s.pos[col], s.M, k)
    return j >= 0 and bool(_core.can_move_down(s.code, s.pos, s.M, col, j, b))


@dataclass(frozen=True)
class Event:
    time: float
    column: int
    source: int
    target: int

    @property
    def length(self) -> int:
        return abs(self.target - self.source)

    def crosses(self, k0: int, M: int) -> int:
        """Signed number of times the jump passes face index k0 (mod M)."""
        lo, hi = sorted((self.source, self.target))
        n = (hi - 1 - k0) // M - (lo - 1 - k0) // M
        return n if self.target > self.source else -n


def _apply(s: ParticleSystem, col: int, j: int, a: int, b: int) -> None:
    s.pos[col, j] = b
    if b > a:
        s.J[col, np.arange(a, b) % s.M] += 1
    else:
        s.J[col, np.arange(b, a) % s.M] -= 1


def step(s: ParticleSystem, rates: JumpRates, rng: np.random.Generator) -> Event | None:
    """One Gillespie event; returns the jump performed, or None if the ring was void."""
    total = (rates.p + rates.q) * s.n_edges
    s.time += rng.exponential(1.0 / total)
    col = int(rng.integers(s.L))
    k = int(rng.integers(s.M))
    row = s.pos[col]
    if rng.random() < rates.p / (rates.p + rates.q):
        j, a, b = _core.find_below(row, s.M, k)
        if j < 0 or not _core.can_move_up(s.code, s.pos, s.M, col, j, b):
            return None
    else:
        j, a, b = _core.find_above(row, s.M, k)
        if j < 0 or not _core.can_move_down(s.code, s.pos, s.M, col, j, b):
            return None
    _apply(s, col, int(j), int(a), int(b))
    return Event(s.time, col, int(a), int(b))


# ---------------------------------------------------------------- long runs

@dataclass
class EventLog:
    time: np.ndarray = field(default_factory=lambda: np.zeros(0))
    column: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    source: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    target: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    crossed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.time)

    @property
    def length(self) -> np.ndarray:
        return np.abs(self.target - self.source)

    def extend(self, other: "EventLog") -> None:
        for name in ("time", "column", "source", "target", "crossed"):
            setattr(self, name, np.concatenate([getattr(self, name), getattr(other, name)]))
        self.truncated |= other.truncated

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "column", "from", "to", "length", "crossed"])
        for row in zip(self.time, self.column, self.source, self.target, self.length, self.crossed):
            w.writerow([repr(float(row[0]))] + [int(x) for x in row[1:]])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


Observer = Callable[[ParticleSystem], None]


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**62))


def advance(s: ParticleSystem, rates: JumpRates, t_max: float, rng: np.random.Generator,
            log_capacity: int = 0) -> EventLog:
    """Compiled Gillespie loop up to time t_max (memoryless restart at s.time)."""
    cap = int(log_capacity)
    lt = np.zeros(cap)
    lc = np.zeros(cap, dtype=np.int64)
    lf = np.zeros(cap, dtype=np.int64)
    lto = np.zeros(cap, dtype=np.int64)
    if t_max <= s.time:
        return EventLog()
    _core.seed_rng(_seed(rng))
    t, _, n_jumps, n_log = _core.gillespie(s.code, s.pos, s.M, float(rates.p), float(rates.q),
                                           float(s.time), float(t_max), s.J, lt, lc, lf, lto)
    s.time = float(t)
    col0, k0 = face_column_index(s.kind, s.origin)
    log = EventLog(lt[:n_log], lc[:n_log], lf[:n_log], lto[:n_log], truncated=n_jumps > n_log)
    log.crossed = np.array([Event(0.0, int(c), int(a), int(b)).crosses(k0, s.M) if c == col0 % s.L else 0
                            for c, a, b in zip(log.column, log.source, log.target)], dtype=np.int64)
    return log


def run(s: ParticleSystem, rates: JumpRates, t_max: float, rng: np.random.Generator,
        observers: Sequence[Observer] = (), schedule: Iterable[float] = (),
        log_capacity: int = 0) -> tuple[EventLog, ParticleSystem]:
    """Evolve s in place until t_max, calling every observer at each scheduled time."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    log = EventLog()
    for t_obs in sorted(float(t) for t in schedule if t <= t_max):
        room = max(log_capacity - len(log), 0)
        log.extend(advance(s, rates, t_obs, rng, room))
        for obs in observers:
            obs(s)
    log.extend(advance(s, rates, t_max, rng, max(log_capacity - len(log), 0)))
    return log, s


# ---------------------------------------------------------------- V observables

@dataclass
class VFields:
    """Arrays indexed [x, n] for the horizontal edge h(x, n) of column x."""
    V: np.ndarray
    V_hat: np.ndarray
    V_tilde: np.ndarray

    def window_sum(self, size: int, which: str = "V") -> int:
        return int(getattr(self, which)[: size + 1, : size + 1].sum())


def o_tilde_indicators(c: TorusConfig, m_max: int | None = None) -> np.ndarray:
    """Boolean array I[m-1, x, n] = 1 when every edge of O~_{m, h(x, n)} is occupied."""
    if c.kind is not LatticeKind.HONEYCOMB:
        raise ValueError("O~ events are defined on the honeycomb lattice")
    L = c.L
    m_max = L if m_max is None else m_max
    nw = c.match == 0
    ne_right = np.roll(c.match == 1, -1, axis=0)   # [x, n] -> north-east edge at black(x+1, n)
    out = np.zeros((m_max, L, L), dtype=bool)
    alive = np.ones((L, L), dtype=bool)
    for i in range(1, m_max + 1):
        # pair i of O~_{m, h(x, n)}: north-west at black(x, n+1-i), north-east at black(x+1, n-i)
        alive = alive & np.roll(nw, i - 1, axis=1) & np.roll(ne_right, i, axis=1)
        if not alive.any():
            break
        out[i - 1] = alive
    return out


def v_tilde(c: TorusConfig) -> np.ndarray:
    """V~(e) = sum over m of the O~_{m,e} indicators."""
    return o_tilde_indicators(c).sum(axis=0).astype(np.int64)


def v_hat_from_o(c: TorusConfig) -> np.ndarray:
    """V^(e) = sum over m of 1{O_{m,e}}, using O_{m, h(x,n)} = O~_{m, h(x,n+m)}."""
    ind = o_tilde_indicators(c)
    out = np.zeros((c.L, c.L), dtype=np.int64)
    for m in range(1, ind.shape[0] + 1):
        out += np.roll(ind[m - 1], -m, axis=1)
    return out


def boundary_terms(c: TorusConfig, size: int, parity: int) -> dict[str, int]:
    """Window sums over the columns of one parity of Lambda_size: V^, V~, U and D.

    D collects O~_{m,e} reaching below the window, U collects O_{m,e} reaching above it,
    so that sum V^ = sum V~ + sum U - sum D.
    """
    ind = o_tilde_indicators(c)
    m = np.arange(1, ind.shape[0] + 1)[:, None]
    xs = [x for x in range(size + 1) if x % 2 == parity]
    n = np.arange(size + 1)[None, :]
    vt = vh = u = d = 0
    for x in xs:
        lo = ind[:, x, : size + 1]                                   # O~_{m, h(x, n)}
        up = np.stack([np.roll(ind[k, x], -(k + 1))[: size + 1] for k in range(ind.shape[0])])
        vt += int(lo.sum())
        vh += int(up.sum())
        d += int((lo & (n - m < 0)).sum())
        u += int((up & (n + m > size)).sum())
    return {"V_hat": vh, "V_tilde": vt, "U": u, "D": d}


def v_field(s: ParticleSystem) -> VFields:
    if s.kind is not LatticeKind.HONEYCOMB:
        raise ValueError("the V observable is defined on the honeycomb lattice")
    V, Vh = _core.reach_fields(s.code, s.pos, s.M)
    return VFields(V, Vh, v_tilde(s.to_config()))


def v_field_config(c: TorusConfig) -> VFields:
    return v_field(particles_from_matching(c))


__all__ = [
    "EmptyColumn", "JumpRates", "ParticleSystem", "ParticleRef", "Event", "EventLog", "VFields",
    "particles_from_matching", "matching_from_particles", "p_of_edge", "can_reach",
    "can_reach_down", "step", "advance", "run", "v_field", "v_field_config", "v_tilde",
    "o_tilde_indicators", "v_hat_from_o", "boundary_terms",
]
