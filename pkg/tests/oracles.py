"""Independent reference computations used as test oracles.

Nothing here calls the code under test except for plain data accessors.
"""

from __future__ import annotations

import itertools

import numpy as np

from dimergrowth.lattice import LatticeKind, black, black_neighbors


def permanent(A: np.ndarray) -> float:
    """Ryser's formula; the weighted number of perfect matchings of a biadjacency matrix."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 1.0
    total = 0.0
    for r in range(1, n + 1):
        for cols in itertools.combinations(range(n), r):
            total += (-1) ** r * np.prod(A[:, cols].sum(axis=1))
    return (-1) ** n * total


def biadjacency(g) -> np.ndarray:
    A = np.zeros((len(g.blacks), len(g.whites)))
    for b, w, wt in g.edges:
        A[b, w] = wt
    return A


def torus_matchings(kind: LatticeKind, L: int) -> list[np.ndarray]:
    """Every perfect matching of the L x L torus as a (L, L) direction array."""
    deg = 3 if kind is LatticeKind.HONEYCOMB else 4
    nbrs = {}
    for x in range(L):
        for n in range(L):
            nbrs[(x, n)] = [((w.x1 % L), (w.x2 % L)) for w in black_neighbors(kind, black(x, n))]
    cells = sorted(nbrs)
    out = []

    def rec(i, used, match):
        if i == len(cells):
            out.append(match.copy())
            return
        x, n = cells[i]
        for d in range(deg):
            w = nbrs[(x, n)][d]
            if w not in used:
                used.add(w)
                match[x, n] = d
                rec(i + 1, used, match)
                used.discard(w)

    rec(0, set(), np.zeros((L, L), dtype=np.int8))
    return out


def interlaced(kind: LatticeKind, pos: np.ndarray, M: int) -> bool:
    """Interlacement by brute force: for each pair of neighbouring columns, lay out the
    keys of one full period on the line and require strict alternation."""
    C, N = pos.shape
    P = 2 * M if kind is LatticeKind.HONEYCOMB else M
    if kind is LatticeKind.HONEYCOMB:
        lk = lambda k: 2 * k + 2
        rk = lambda k: 2 * k + 1
    else:
        lk = lambda k: 2 * (k // 2) + 1
        rk = lambda k: 2 * ((k + 1) // 2)
    for l in range(C):
        row = pos[l]
        if any(row[j + 1] <= row[j] for j in range(N - 1)) or row[-1] >= row[0] + M:
            return False
        left = pos[(l - 1) % C]
        marks = sorted([(rk(int(k)) % P, 0) for k in left] + [(lk(int(k)) % P, 1) for k in row])
        if len({m[0] for m in marks}) != len(marks):
            return False
        tags = [t for _, t in marks]
        if any(tags[i] == tags[(i + 1) % len(tags)] for i in range(len(tags))):
            return False
    return True
