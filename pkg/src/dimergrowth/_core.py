"""Compiled particle engine shared by the sampler and the growth dynamics.

A torus configuration is stored as an int64 array ``pos`` of shape (C, N): row l holds
the unrolled positions of the particles of column l, strictly increasing, with
``pos[l, N-1] < pos[l, 0] + M`` where M is the column period. Moves keep rows sorted, so
positions drift freely and are only reduced modulo M when needed.

kind code: 0 honeycomb, 1 Z^2. See ``lattice`` for the key conventions.
"""

from __future__ import annotations

import numpy as np
from numba import njit

HEX = 0
SQ = 1


@njit(cache=True)
def lkey(kind, k):
    if kind == HEX:
        return 2 * k + 2
    return 2 * (k // 2) + 1


@njit(cache=True)
def rkey(kind, k):
    if kind == HEX:
        return 2 * k + 1
    return 2 * ((k + 1) // 2)


@njit(cache=True)
def lkey_inv(kind, x):
    """Largest position whose left key is <= x."""
    if kind == HEX:
        return (x - 2) // 2
    return 2 * ((x - 1) // 2) + 1


@njit(cache=True)
def rkey_inv(kind, x):
    if kind == HEX:
        return (x - 1) // 2
    return 2 * (x // 2)


@njit(cache=True)
def count_le(row, M, x):
    """Number of unrolled (periodically repeated) positions of a row that are <= x."""
    N = row.shape[0]
    o = row[0]
    d = x - o
    wraps = d // M
    rep = o + d - wraps * M
    return N * wraps + np.searchsorted(row, rep, side="right")


@njit(cache=True)
def kth(row, M, c):
    """The c-th unrolled position (c = 1 is row[0])."""
    N = row.shape[0]
    q = (c - 1) // N
    return row[c - 1 - q * N] + q * M


@njit(cache=True)
def occupied(row, M, k):
    return count_le(row, M, k) - count_le(row, M, k - 1) == 1


@njit(cache=True)
def _next_pos(row, M, j):
    N = row.shape[0]
    return row[j + 1] if j < N - 1 else row[0] + M


@njit(cache=True)
def _prev_pos(row, M, j):
    N = row.shape[0]
    return row[j - 1] if j > 0 else row[N - 1] - M


@njit(cache=True)
def find_below(row, M, e):
    """(j, a, b): highest particle strictly below edge e, its position, and e unrolled above it.

    j = -1 when e is occupied.
    """
    N = row.shape[0]
    o = row[0]
    # representative of e in (o, o + M]
    b = e - ((e - o - 1) // M) * M
    if b == o + M:
        return -1, 0, 0
    j = np.searchsorted(row, b, side="left") - 1
    if j + 1 < N and row[j + 1] == b:
        return -1, 0, 0
    return j, row[j], b


@njit(cache=True)
def find_above(row, M, e):
    """(j, a, b): lowest particle strictly above e, its position, and e unrolled below it."""
    N = row.shape[0]
    o = row[0]
    r = e - ((e - o) // M) * M  # in [o, o + M)
    i = np.searchsorted(row, r, side="left")
    if i < N and row[i] == r:
        return -1, 0, 0
    if i < N:
        return i, row[i], r
    return 0, row[0], r - M


@njit(cache=True)
def can_move_up(kind, pos, M, l, j, b):
    C = pos.shape[0]
    row = pos[l]
    a = row[j]
    if b <= a:
        return False
    nxt = _next_pos(row, M, j)
    if b >= nxt or lkey(kind, b) >= lkey(kind, nxt) or rkey(kind, b) >= rkey(kind, nxt):
        return False
    left = pos[(l - 1) % C]
    right = pos[(l + 1) % C]
    la, lb = lkey(kind, a), lkey(kind, b)
    if count_le(left, M, rkey_inv(kind, lb)) != count_le(left, M, rkey_inv(kind, la)):
        return False
    ra, rb = rkey(kind, a), rkey(kind, b)
    if count_le(right, M, lkey_inv(kind, rb)) != count_le(right, M, lkey_inv(kind, ra)):
        return False
    return True


@njit(cache=True)
def can_move_down(kind, pos, M, l, j, b):
    C = pos.shape[0]
    row = pos[l]
    a = row[j]
    if b >= a:
        return False
    prv = _prev_pos(row, M, j)
    if b <= prv or lkey(kind, b) <= lkey(kind, prv) or rkey(kind, b) <= rkey(kind, prv):
        return False
    left = pos[(l - 1) % C]
    right = pos[(l + 1) % C]
    la, lb = lkey(kind, a), lkey(kind, b)
    if count_le(left, M, rkey_inv(kind, la - 1)) != count_le(left, M, rkey_inv(kind, lb - 1)):
        return False
    ra, rb = rkey(kind, a), rkey(kind, b)
    if count_le(right, M, lkey_inv(kind, ra - 1)) != count_le(right, M, lkey_inv(kind, rb - 1)):
        return False
    return True


@njit(cache=True)
def allowed_interval(kind, pos, M, l, j):
    """Inclusive range of positions particle j of column l may occupy, all else fixed."""
    C = pos.shape[0]
    row = pos[l]
    a = row[j]
    prv = _prev_pos(row, M, j)
    nxt = _next_pos(row, M, j)
    lo = max(prv + 1, lkey_inv(kind, lkey(kind, prv)) + 1, rkey_inv(kind, rkey(kind, prv)) + 1)
    hi = min(nxt - 1, lkey_inv(kind, lkey(kind, nxt) - 1), rkey_inv(kind, rkey(kind, nxt) - 1))
    left = pos[(l - 1) % C]
    right = pos[(l + 1) % C]
    la = lkey(kind, a)
    c = count_le(left, M, rkey_inv(kind, la - 1))
    r_lo = rkey(kind, kth(left, M, c))
    r_hi = rkey(kind, kth(left, M, c + 1))
    lo = max(lo, lkey_inv(kind, r_lo) + 1)
    hi = min(hi, lkey_inv(kind, r_hi - 1))
    ra = rkey(kind, a)
    c = count_le(right, M, lkey_inv(kind, ra - 1))
    l_lo = lkey(kind, kth(right, M, c))
    l_hi = lkey(kind, kth(right, M, c + 1))
    lo = max(lo, rkey_inv(kind, l_lo) + 1)
    hi = min(hi, rkey_inv(kind, l_hi - 1))
    return lo, hi


@njit(cache=True)
def is_valid(kind, pos, M):
    """Full interlacement check: on every line the keys of the two columns alternate."""
    C, N = pos.shape
    P = 2 * M if kind == HEX else M  # key period
    for l in range(C):
        row = pos[l]
        for j in range(N - 1):
            if row[j + 1] <= row[j]:
                return False
        if row[N - 1] >= row[0] + M:
            return False
    tags = np.empty(2 * N, np.int64)
    keys = np.empty(2 * N, np.int64)
    for l in range(C):
        left = pos[(l - 1) % C]
        row = pos[l]
        for j in range(N):
            keys[j] = rkey(kind, left[j]) % P
            tags[j] = 0
            keys[N + j] = lkey(kind, row[j]) % P
            tags[N + j] = 1
        order = np.argsort(keys, kind="mergesort")
        for i in range(2 * N):
            u = order[i]
            v = order[(i + 1) % (2 * N)]
            if tags[u] == tags[v] or keys[u] == keys[v]:
                return False
    return True


# ---------------------------------------------------------------- sampler kernels

@njit(cache=True)
def seed_rng(seed):
    np.random.seed(seed)


@njit(cache=True)
def flip_sweeps(kind, pos, M, n_attempts):
    """Uniform face selection; rotate when flippable. Returns the number of rotations."""
    C = pos.shape[0]
    acc = 0
    for _ in range(n_attempts):
        l = np.random.randint(C)
        k = np.random.randint(M)
        row = pos[l]
        if occupied(row, M, k) and not occupied(row, M, k + 1):
            j, a, b = find_below(row, M, k + 1)
            if can_move_up(kind, pos, M, l, j, b):
                pos[l, j] = b
                acc += 1
        elif occupied(row, M, k + 1) and not occupied(row, M, k):
            j, a, b = find_above(row, M, k)
            if can_move_down(kind, pos, M, l, j, b):
                pos[l, j] = b
                acc += 1
    return acc


@njit(cache=True)
def heat_bath(kind, pos, M, n_updates):
    """Resample one particle uniformly within its allowed interval per update."""
    C, N = pos.shape
    moved = 0
    for _ in range(n_updates):
        l = np.random.randint(C)
        j = np.random.randint(N)
        lo, hi = allowed_interval(kind, pos, M, l, j)
        b = lo + np.random.randint(hi - lo + 1)
        if b != pos[l, j]:
            moved += 1
        pos[l, j] = b
    return moved


# ---------------------------------------------------------------- dynamics kernel

@njit(cache=True)
def gillespie(kind, pos, M, p, q, t0, t_max, J, log_t, log_col, log_from, log_to):
    """Run the growth chain from time t0 until t_max.

    J (C x M) accumulates the signed number of particle crossings of every face.
    Accepted jumps are logged until the log arrays are full.
    Returns (time, n_events, n_jumps, n_logged).
    """
    C = pos.shape[0]
    total = (p + q) * C * M
    up_prob = p / (p + q)
    t = t0
    n_events = 0
    n_jumps = 0
    n_log = 0
    cap = log_t.shape[0]
    while True:
        t += np.random.exponential(1.0 / total)
        if t >= t_max:
            break
        n_events += 1
        l = np.random.randint(C)
        e = np.random.randint(M)
        row = pos[l]
        if np.random.random() < up_prob:
            j, a, b = find_below(row, M, e)
            if j < 0 or not can_move_up(kind, pos, M, l, j, b):
                continue
            pos[l, j] = b
            for k in range(a, b):
                J[l, k % M] += 1
        else:
            j, a, b = find_above(row, M, e)
            if j < 0 or not can_move_down(kind, pos, M, l, j, b):
                continue
            pos[l, j] = b
            for k in range(b, a):
                J[l, k % M] -= 1
        n_jumps += 1
        if n_log < cap:
            log_t[n_log] = t
            log_col[n_log] = l
            log_from[n_log] = a
            log_to[n_log] = b
            n_log += 1
    return t_max, n_events, n_jumps, n_log


@njit(cache=True)
def reach_fields(kind, pos, M):
    """V and V-hat for every transversal edge: faces crossed by the particle that may
    move onto the edge from below (resp. above), zero when the move is blocked."""
    C = pos.shape[0]
    V = np.zeros((C, M), np.int64)
    Vh = np.zeros((C, M), np.int64)
    for l in range(C):
        row = pos[l]
        for e in range(M):
            j, a, b = find_below(row, M, e)
            if j >= 0 and can_move_up(kind, pos, M, l, j, b):
                V[l, e] = b - a
            j, a, b = find_above(row, M, e)
            if j >= 0 and can_move_down(kind, pos, M, l, j, b):
                Vh[l, e] = a - b
    return V, Vh


@njit(cache=True)
def state_code(pos, M):
    """Integer code of the configuration (positions reduced mod M, sorted per column)."""
    C, N = pos.shape
    code = 0
    red = np.empty(N, np.int64)
    for l in range(C):
        for j in range(N):
            red[j] = pos[l, j] % M
        red.sort()
        for j in range(N):
            code = code * M + red[j]
    return code


@njit(cache=True)
def flip_trace(kind, pos, M, n_attempts, codes):
    """flip_sweeps one attempt at a time, recording state_code after each attempt."""
    for i in range(n_attempts):
        flip_sweeps(kind, pos, M, 1)
        codes[i] = state_code(pos, M)
