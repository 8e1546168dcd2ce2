"""Infinite-volume analytics: weights from the slope, inverse Kasteleyn kernels, the
Omega_c geometry, densities, speeds, the current series, honeycomb covariance kernels
and the Hessian of the square-lattice speed."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
import warnings
from typing import Sequence

import numpy as np
from scipy import integrate

from .lattice import Edge, LatticeKind, Slope, Vertex, black, check_slope, white

QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-13, limit=500)


class QuadratureError(RuntimeError):
    pass


class AmoebaError(ValueError):
    """Fields outside the amoeba, where the liquid-phase formulas do not apply."""


def _cquad(f, a: float, b: float, points: Sequence[float] = ()) -> complex:
    """Adaptive Gauss-Kronrod on [a, b] for a complex integrand, split at `points`."""
    cuts = [a] + sorted(p for p in points if a < p < b) + [b]
    re = im = 0.0
    err = scale = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        # accuracy is judged below from the returned error estimates
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            r, er = integrate.quad(lambda t: f(t).real, lo, hi, **QUAD_OPTS)
            i, ei = integrate.quad(lambda t: f(t).imag, lo, hi, **QUAD_OPTS)
        re += r
        im += i
        err += er + ei
        scale += (hi - lo) * max(abs(f(t)) for t in np.linspace(lo, hi, 9))
    if not math.isfinite(re + im) or err > 1e-10 * max(1.0, scale):
        raise QuadratureError(f"quadrature error estimate {err:.2e}")
    return complex(re, im)


# ================================================================ honeycomb

@dataclass(frozen=True)
class HexWeights:
    rho: Slope
    r1: float
    r2: float
    r3: float
    a1: float
    a2: float
    a3: float

    def edge_weight(self, direction: int) -> float:
        """Kbar on the three edge types: north-west a2, north-east a3, horizontal a1."""
        return (self.a2, self.a3, self.a1)[direction]

    @property
    def key(self) -> tuple[float, float, float]:
        return (self.a1, self.a2, self.a3)


def hex_weights(rho: Slope) -> HexWeights:
    check_slope(LatticeKind.HONEYCOMB, rho)
    r1, r2, r3 = 1.0 - rho.rho2, rho.rho1, rho.rho2 - rho.rho1
    return HexWeights(rho, r1, r2, r3, math.sin(math.pi * r1), math.sin(math.pi * r2),
                      math.sin(math.pi * r3))


def _hex_exponents(w: Vertex, b: Vertex) -> tuple[int, int]:
    x1, x2, y1, y2 = w.x1, w.x2, b.x1, b.x2
    return y2 - x2, x2 - y2 + x1 - y1 - 1


def _residue_inner(alpha: complex, beta: complex, n: int) -> complex:
    """(1/2 pi i) times the integral over |z|=1 of z^n / (alpha z + beta) dz."""
    zs = -beta / alpha
    inside = abs(zs) < 1.0
    if n >= 0:
        return zs ** n / alpha if inside else 0j
    return 0j if inside else -(zs ** n) / alpha


def _circle_breaks(c0: float, c1: float, target: float) -> list[float]:
    """Angles where |c0 + c1 e^{i t}| = target, for real c0, c1 > 0."""
    cos_t = (target ** 2 - c0 ** 2 - c1 ** 2) / (2 * c0 * c1)
    if abs(cos_t) >= 1:
        return []
    t = math.acos(cos_t)
    return [-t, t]


@lru_cache(maxsize=200_000)
def _hex_kinv_cached(a1: float, a2: float, a3: float, A: int, B: int, swapped: bool) -> complex:
    if not swapped:
        def f(t):
            z1 = cmath.exp(1j * t)
            return z1 ** (A + 1) * _residue_inner(a3, a1 + a2 * z1, B)
        brk = _circle_breaks(a1, a2, a3)
    else:
        def f(t):
            z2 = cmath.exp(1j * t)
            return z2 ** (B + 1) * _residue_inner(a2, a1 + a3 * z2, A)
        brk = _circle_breaks(a1, a3, a2)
    return _cquad(f, -math.pi, math.pi, brk) / (2 * math.pi)


def hex_kinv(a: HexWeights, w: Vertex, b: Vertex, swapped: bool = False) -> complex:
    """Kbar^{-1}(w, b) on the honeycomb lattice.

    The inner contour integral is done by residues and the outer one by adaptive
    quadrature split where the pole crosses the unit circle. `swapped=True` integrates
    the two variables in the opposite order, which gives an independent evaluation.
    """
    A, B = _hex_exponents(w, b)
    return _hex_kinv_cached(a.a1, a.a2, a.a3, A, B, swapped)


def hex_kinv_trapezoid(a: HexWeights, w: Vertex, b: Vertex, n: int = 512) -> complex:
    """Plain tensor trapezoid over the torus (slow, O(1/n) because of the zeros of the
    denominator on the torus); kept as a crude independent check."""
    A, B = _hex_exponents(w, b)
    t = 2 * np.pi * (np.arange(n) + 0.5) / n
    z1 = np.exp(1j * t)[:, None]
    z2 = np.exp(1j * t)[None, :]
    vals = z1 ** (A + 1) * z2 ** (B + 1) / (a.a1 + a.a2 * z1 + a.a3 * z2)
    return complex(vals.mean())


def hex_kbar(a: HexWeights, e: Edge) -> float:
    return a.edge_weight(e.direction)


def hex_prob(a: HexWeights, edges: Sequence[Edge]) -> float:
    """Gibbs probability that all edges are occupied, via the local statistics formula."""
    if not edges:
        return 1.0
    M = np.array([[hex_kinv(a, ei.white, ej.black) for ej in edges] for ei in edges])
    pref = math.prod(hex_kbar(a, e) for e in edges)
    val = pref * np.linalg.det(M)
    return float(val.real)


def hex_density(a: HexWeights, direction: int) -> float:
    e = Edge(black(0, 0), direction)
    return float((hex_kbar(a, e) * hex_kinv(a, e.white, e.black)).real)


def speed_hex(rho: Slope) -> float:
    check_slope(LatticeKind.HONEYCOMB, rho)
    r1, r2 = rho.rho1, rho.rho2
    return math.sin(math.pi * r1) * math.sin(math.pi * (r2 - r1)) / (math.pi * math.sin(math.pi * r2))


def _hcoords(e: Edge) -> tuple[int, int]:
    if e.direction != 2:
        raise ValueError(f"{e!r} is not horizontal")
    return e.black.x1 - 1, e.black.x2


def horizontal_edge(x: int, n: int) -> Edge:
    """e = (black(x+1, n), white(x, n+1))."""
    return Edge(black(x + 1, n), 2)


def hex_v_expectation(a: HexWeights, e: Edge) -> float:
    """Mean of V~(e) from the single-entry formula."""
    x, n = _hcoords(e)
    val = -(a.a2 * a.a3 / a.a1) * hex_kinv(a, white(x + 1, n), black(x, n))
    return float(val.real)


def hex_pair_kernel(a: HexWeights, e1: Edge, e2: Edge) -> float:
    (x1, n1), (x2, n2) = _hcoords(e1), _hcoords(e2)
    if (x1, n1) == (x2, n2):
        return 0.0
    pts = [(x1, n1), (x2, n2)]
    M = np.array([[hex_kinv(a, white(xi + 1, ni), black(xj, nj)) for xj, nj in pts] for xi, ni in pts])
    return float(((a.a2 * a.a3 / a.a1) ** 2 * np.linalg.det(M)).real)


def o_tilde_edges(e: Edge, m: int) -> list[Edge]:
    """Edge set of O~_{m,e}: north-west edges of black(x, n+1-i) and north-east edges
    of black(x+1, n-i), i = 1..m."""
    x, n = _hcoords(e)
    out = []
    for i in range(1, m + 1):
        out.append(Edge(black(x, n + 1 - i), 0))
        out.append(Edge(black(x + 1, n - i), 1))
    return out


def o_tilde_prob(a: HexWeights, e: Edge, m: int, e2: Edge | None = None, m2: int = 0) -> float:
    edges = o_tilde_edges(e, m)
    if e2 is not None and m2 > 0:
        edges = list(dict.fromkeys(edges + o_tilde_edges(e2, m2)))
    return hex_prob(a, edges)


def hex_vtilde_moment(a: HexWeights, e1: Edge, e2: Edge, N: int) -> float:
    """E[V~(e1) V~(e2)] from the O~ expansions, every sum truncated at N."""
    (x1, n1), (x2, n2) = _hcoords(e1), _hcoords(e2)
    if (x1, n1) == (x2, n2):
        return sum((2 * m - 1) * o_tilde_prob(a, e1, m) for m in range(1, N + 1))
    if x1 == x2:
        if n1 < n2:
            e1, e2, n1, n2 = e2, e1, n2, n1
        D = n1 - n2
        s = sum(o_tilde_prob(a, e1, m1, e2, m2) for m1 in range(1, D) for m2 in range(1, N + 1))
        return s + sum(2 * m * o_tilde_prob(a, e1, D + m) for m in range(1, N + 1))
    if abs(x1 - x2) == 1:
        raise ValueError("adjacent columns are not covered by the expansion")
    return sum(o_tilde_prob(a, e1, m1, e2, m2) for m1 in range(1, N + 1) for m2 in range(1, N + 1))


def hex_pair_sum(a: HexWeights, e1: Edge, e2: Edge, N: int) -> float:
    """Truncated O~ sum that the scaled 2x2 kernel determinant should equal."""
    (x1, n1), (x2, n2) = _hcoords(e1), _hcoords(e2)
    if (x1, n1) == (x2, n2):
        return 0.0
    if x1 == x2:
        if n1 < n2:
            e1, e2, n1, n2 = e2, e1, n2, n1
        D = n1 - n2
        s = sum(o_tilde_prob(a, e1, m1, e2, m2) for m1 in range(1, D) for m2 in range(1, N + 1))
        return s + sum(o_tilde_prob(a, e1, D + m) for m in range(1, N + 1))
    return hex_vtilde_moment(a, e1, e2, N)


def hex_vtilde_covariance(a: HexWeights, e1: Edge, e2: Edge, N: int) -> float:
    """Cov(V~(e1), V~(e2)) = truncated second moment minus the product of means."""
    return hex_vtilde_moment(a, e1, e2, N) - hex_v_expectation(a, e1) * hex_v_expectation(a, e2)


@dataclass(frozen=True)
class DecayFit:
    C1: float
    c1: float
    residuals: tuple[float, ...]
    probs: tuple[float, ...]


def decay_fit(a: HexWeights, m_max: int, e: Edge | None = None, m_min: int = 1) -> DecayFit:
    """Least-squares fit log P(O~_m) = log C1 - c1 m over m_min..m_max."""
    if m_max < 5:
        raise ValueError("m_max >= 5")
    e = e if e is not None else horizontal_edge(0, 0)
    ms = np.arange(m_min, m_max + 1)
    ps = np.array([o_tilde_prob(a, e, int(m)) for m in ms])
    if np.any(ps <= 0):
        raise ValueError("non-positive probability: degenerate fit")
    coef = np.polyfit(ms, np.log(ps), 1)
    res = np.log(ps) - np.polyval(coef, ms)
    return DecayFit(float(math.exp(coef[1])), float(-coef[0]), tuple(res), tuple(ps))


# ================================================================ square lattice

@dataclass(frozen=True)
class SquareFields:
    B1: float
    B2: float

    def check(self) -> "SquareFields":
        if not in_amoeba(self):
            raise AmoebaError(f"B={self.B1, self.B2} outside the amoeba")
        return self


def in_amoeba(B: SquareFields) -> bool:
    return abs(math.sinh(B.B1) * math.sinh(B.B2)) < 1.0


def z2_kbar(B: SquareFields, e: Edge) -> complex:
    """Kbar on Z^2: east i e^{B1}, north e^{B1+B2}, west i e^{B2}, south 1."""
    return (1j * math.exp(B.B1), math.exp(B.B1 + B.B2), 1j * math.exp(B.B2), 1.0 + 0j)[e.direction]


def omega_c(B: SquareFields) -> complex:
    c = math.cosh(B.B1) * math.tanh(B.B2)
    if not -1.0 <= c <= 1.0:
        raise AmoebaError(f"cosh(B1) tanh(B2) = {c} outside [-1, 1]")
    return math.exp(-B.B1) * cmath.exp(1j * math.acos(c))


def _arg(z: complex) -> float:
    """Principal argument taken in [0, 2 pi)."""
    t = cmath.phase(z)
    return t + 2 * math.pi if t < 0 else t


@lru_cache(maxsize=200_000)
def _z2_double_cached(B1: float, B2: float, a: int, b: int, swapped: bool) -> complex:
    # the pole crosses the unit circle where sin t = cosh B1 tanh B2 (or B1, B2 swapped)
    s = math.tanh(B1) * math.cosh(B2) if swapped else math.cosh(B1) * math.tanh(B2)
    t0 = math.asin(max(-1.0, min(1.0, s)))
    brk = [t0, math.pi - t0]
    brk = [((t + math.pi) % (2 * math.pi)) - math.pi for t in brk]
    eB1, eB2, eB12 = math.exp(B1), math.exp(B2), math.exp(B1 + B2)
    if not swapped:
        def f(t):
            z1 = cmath.exp(1j * t)
            return z1 ** a * _residue_inner(z1 + 1j * eB1, 1j * eB2 * z1 + eB12, b)
    else:
        def f(t):
            z2 = cmath.exp(1j * t)
            return z2 ** (b + 1) * _residue_inner(z2 + 1j * eB2, 1j * eB1 * z2 + eB12, a - 1)
    return _cquad(f, -math.pi, math.pi, brk) / (2 * math.pi)


def z2_kinv_double(B: SquareFields, w: Vertex, b: Vertex, swapped: bool = False) -> complex:
    """Kbar^{-1}(w, b) from the double contour integral over the unit torus.

    One variable is integrated by residues, the other by adaptive quadrature split at the
    two angles where the pole crosses the unit circle (sin t = cosh B1 tanh B2).
    """
    B.check()
    return _z2_double_cached(B.B1, B.B2, b.x1 - w.x1, b.x2 - w.x2, swapped)


def z2_kinv_trapezoid(B: SquareFields, w: Vertex, b: Vertex, n: int = 512) -> complex:
    """Midpoint tensor rule on the torus; converges only algebraically."""
    a_, b_ = b.x1 - w.x1, b.x2 - w.x2
    t = 2 * np.pi * (np.arange(n) + 0.5) / n
    z1 = np.exp(1j * t)[:, None]
    z2 = np.exp(1j * t)[None, :]
    mu = z1 + 1j * math.exp(B.B1) + 1j * math.exp(B.B2) * z1 / z2 + math.exp(B.B1 + B.B2) / z2
    return complex((z1 ** a_ * z2 ** b_ / mu).mean())


@lru_cache(maxsize=200_000)
def _z2_single_cached(B1: float, B2: float, a: int, b: int) -> complex:
    Om = omega_c(SquareFields(B1, B2))
    if abs(Om.imag) < 1e-14:
        raise AmoebaError("Omega_c is real: amoeba boundary")
    r = math.exp(-B1)
    th = cmath.phase(Om)
    f = (1j) ** ((a - b - 1) % 4) * math.exp(B2 * b + B1 * (a - 1))

    def g(phi):
        z = r * cmath.exp(1j * phi)
        return z ** (a - 1) * (z - 1) ** b / (z + 1) ** (b + 1) * 1j * z

    if b >= 0:
        val = _cquad(g, -th, th)
    else:
        val = -_cquad(g, -2 * math.pi + th, -th)
    return f * val / (2j * math.pi)


def z2_kinv_single(B: SquareFields, w: Vertex, b: Vertex) -> complex:
    """Kbar^{-1}(w, b) as one integral along |z| = e^{-B1} from conj(Omega_c) to Omega_c,
    through +e^{-B1} when b.x2 >= w.x2 and through -e^{-B1} otherwise."""
    return _z2_single_cached(B.B1, B.B2, b.x1 - w.x1, b.x2 - w.x2)


def z2_kinv(B: SquareFields, w: Vertex, b: Vertex) -> complex:
    return z2_kinv_single(B, w, b)


def z2_prob(B: SquareFields, edges: Sequence[Edge]) -> float:
    if not edges:
        return 1.0
    M = np.array([[z2_kinv(B, ei.white, ej.black) for ej in edges] for ei in edges])
    pref = np.prod([z2_kbar(B, e) for e in edges])
    return float((pref * np.linalg.det(M)).real)


def slope_of_B(B: SquareFields) -> Slope:
    Om = omega_c(B.check())
    return Slope(-0.5 + _arg(Om) / math.pi, (_arg(Om - 1) - _arg(Om + 1)) / math.pi - 0.5)


def slope_of_B_kernel(B: SquareFields, method: str = "single") -> Slope:
    """Slope from the defining kernel expressions (densities of two edge pairs)."""
    k = z2_kinv_single if method == "single" else z2_kinv_double
    o = black(0, 0)
    e1, e2 = math.exp(B.B1), math.exp(B.B2)
    r1 = 0.5 - (1j * e2 * k(B, white(-1, 1), o) + e1 * e2 * k(B, white(0, 1), o))
    r2 = -0.5 + (1j * e1 * k(B, white(0, 0), o) + e1 * e2 * k(B, white(0, 1), o))
    return Slope(float(r1.real), float(r2.real))


def domino_densities(B: SquareFields) -> tuple[float, float, float, float]:
    """(a1, a2, a3, a4): east, north, west, south dimer densities at black(0,0)."""
    Om = omega_c(B.check())
    ar, am, ap = _arg(Om), _arg(Om - 1), _arg(Om + 1)
    return ((ar - ap) / math.pi, (am - ar) / math.pi, 1 - am / math.pi, ap / math.pi)


def domino_densities_kernel(B: SquareFields) -> tuple[float, float, float, float]:
    o = black(0, 0)
    out = []
    for d, wv in enumerate((white(0, 0), white(0, 1), white(-1, 1), white(-1, 0))):
        out.append(float((z2_kbar(B, Edge(o, d)) * z2_kinv(B, wv, o)).real))
    return tuple(out)


def B_of_slope_closed(rho: Slope) -> SquareFields:
    """Exact inverse: arg Omega_c = psi1 and Im Omega_c = pi v."""
    check_slope(LatticeKind.SQUARE, rho)
    psi1 = math.pi * (rho.rho1 + 0.5)
    im = math.pi * speed_z2(rho)
    B1 = -math.log(im / math.sin(psi1))
    B2 = math.atanh(math.cos(psi1) / math.cosh(B1))
    return SquareFields(B1, B2)


@dataclass(frozen=True)
class RootReport:
    B: SquareFields
    residual: float
    iterations: int
    converged: bool


def B_of_slope(rho: Slope, tol: float = 1e-10, max_iter: int = 100, h: float = 1e-6,
               report: bool = False):
    """Damped Newton on slope_of_B with a central-difference Jacobian."""
    check_slope(LatticeKind.SQUARE, rho)
    target = np.array(rho.as_tuple())
    xi = 0.5 + 0.99 * target / math.sqrt(2)   # inside the disk of radius 1/2 about (1/2,1/2)
    x = 0.5 * np.log(xi / (1 - xi))

    def F(v):
        s = slope_of_B(SquareFields(float(v[0]), float(v[1])))
        return np.array(s.as_tuple()) - target

    def ok(v):
        return in_amoeba(SquareFields(float(v[0]), float(v[1])))

    r = F(x)
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(r)) <= tol:
            break
        J = np.empty((2, 2))
        for j in range(2):
            d = np.zeros(2)
            d[j] = h
            hp, hm = x + d, x - d
            while not (ok(hp) and ok(hm)):
                d /= 2
                hp, hm = x + d, x - d
            J[:, j] = (F(hp) - F(hm)) / (2 * d[j])
        step = np.linalg.solve(J, -r)
        lam = 1.0
        while lam > 1e-8:
            xn = x + lam * step
            if ok(xn):
                rn = F(xn)
                if np.max(np.abs(rn)) < np.max(np.abs(r)) or lam < 1e-3:
                    break
            lam /= 2
        x, r = xn, rn
    res = float(np.max(np.abs(r)))
    out = RootReport(SquareFields(float(x[0]), float(x[1])), res, it, res <= tol)
    if report:
        return out
    if not out.converged:
        raise QuadratureError(f"B_of_slope did not converge: residual {res:.2e}")
    return out.B


def speed_z2(rho: Slope) -> float:
    check_slope(LatticeKind.SQUARE, rho)
    p1 = math.pi * (rho.rho1 + 0.5)
    s1 = math.sin(p1)
    if rho.rho2 == 0.0:
        return s1 / math.pi
    p2 = math.pi * (rho.rho2 + 0.5)
    u = s1 / math.tan(p2)
    return s1 * (u + math.sqrt(1 + u * u)) / math.pi


def speed_z2_omega(rho: Slope) -> float:
    return omega_c(B_of_slope(rho)).imag / math.pi


def ladder_edge(k: int) -> Edge:
    m, r = divmod(k, 2)
    return Edge(black(1, m), 2) if r else Edge(black(0, m), 3)


E_TILDE_0 = Edge(black(0, 0), 2)


def speed_z2_series(rho: Slope, N: int, B: SquareFields | None = None, terms: bool = False):
    """P(e1, not e~0) + sum_{n=2}^N P(e1..en)."""
    if N < 2:
        raise ValueError("N >= 2")
    B = B if B is not None else B_of_slope(rho)
    edges = [ladder_edge(k) for k in range(1, N + 1)]
    M = np.array([[z2_kinv(B, ei.white, ej.black) for ej in edges] for ei in edges])
    kb = np.array([z2_kbar(B, e) for e in edges])
    first = z2_prob(B, [edges[0]]) - z2_prob(B, [edges[0], E_TILDE_0])
    parts = [first]
    pref = 1 + 0j
    for n in range(1, N + 1):
        pref *= kb[n - 1]
        if n >= 2:
            parts.append(float((pref * np.linalg.det(M[:n, :n])).real))
    total = float(sum(parts))
    return (total, parts) if terms else total


# ---------------------------------------------------------------- Hessian

def W_closed(psi1: float, theta: float) -> float:
    e2, e4 = math.exp(2 * theta), math.exp(4 * theta)
    num = (-5 - e4 * (2 + e2) ** 2
           + 2 * e2 * ((2 + e2) * math.cos(4 * psi1) + 4 * (1 + math.sinh(2 * theta)) * math.cos(2 * psi1)))
    return num / (2 * math.cosh(theta)) ** 4


@dataclass(frozen=True)
class HessianReport:
    hess: np.ndarray          # in (rho1, rho2)
    det: float
    det_psi: float            # det of the Hessian of pi*v in (psi1, psi2)
    W: float
    psi1: float
    theta: float
    eigenvalues: tuple[float, float]


def hessian_z2(rho: Slope, h: float = 1e-4) -> HessianReport:
    """Central-difference Hessian of speed_z2 with one Richardson step (h, h/2)."""
    check_slope(LatticeKind.SQUARE, rho)
    r = np.array(rho.as_tuple())
    if np.max(np.abs(r)) + 2 * h >= 0.5:
        raise ValueError("step reaches the boundary")

    def v(p):
        return speed_z2(Slope(float(p[0]), float(p[1])))

    def fd(hh):
        H = np.empty((2, 2))
        I = np.eye(2) * hh
        f0 = v(r)
        for i in range(2):
            H[i, i] = (v(r + I[i]) - 2 * f0 + v(r - I[i])) / hh ** 2
        H[0, 1] = H[1, 0] = (v(r + I[0] + I[1]) - v(r + I[0] - I[1]) - v(r - I[0] + I[1])
                             + v(r - I[0] - I[1])) / (4 * hh ** 2)
        return H

    H = (4 * fd(h / 2) - fd(h)) / 3
    det = float(np.linalg.det(H))
    psi1 = math.pi * (rho.rho1 + 0.5)
    psi2 = math.pi * (rho.rho2 + 0.5)
    theta = math.asinh(math.sin(psi1) / math.tan(psi2)) if rho.rho2 != 0.0 else 0.0
    ev = np.linalg.eigvalsh(H)
    return HessianReport(H, det, det / math.pi ** 2, W_closed(psi1, theta), psi1, theta,
                         (float(ev[0]), float(ev[1])))
