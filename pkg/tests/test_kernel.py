import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimergrowth import kernel as k
from dimergrowth.lattice import Edge, LatticeKind, Slope, black, black_neighbors, white

HEX, SQ = LatticeKind.HONEYCOMB, LatticeKind.SQUARE
SYM = Slope(1 / 3, 2 / 3)


# ---------------------------------------------------------------- honeycomb

def test_hex_weights_examples():
    a = k.hex_weights(SYM)
    assert (a.r1, a.r2, a.r3) == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert (a.a1, a.a2, a.a3) == pytest.approx((math.sin(math.pi / 3),) * 3)
    a = k.hex_weights(Slope(0.25, 0.75))
    assert (a.r1, a.r2, a.r3) == pytest.approx((0.25, 0.25, 0.5))
    assert (a.a1, a.a2, a.a3) == pytest.approx((math.sin(math.pi / 4), math.sin(math.pi / 4), 1.0))
    with pytest.raises(ValueError):
        k.hex_weights(Slope(0.0, 0.5))


def _hex_identity_row(a, b, b2):
    """sum_w Kbar(b, w) Kbar^{-1}(w, b2): the (b, b2) entry of Kbar Kbar^{-1}."""
    return sum(k.hex_kbar(a, Edge(b, d)) * k.hex_kinv(a, w, b2)
               for d, w in enumerate(black_neighbors(HEX, b)))


@pytest.mark.parametrize("rho", [SYM, Slope(0.2, 0.7), Slope(0.5, 0.6)])
def test_hex_kernel_is_an_inverse(rho):
    a = k.hex_weights(rho)
    b0 = black(0, 0)
    assert _hex_identity_row(a, b0, b0) == pytest.approx(1.0, abs=1e-9)
    for dx, dn in ((1, 0), (0, 1), (-2, 1), (3, -2)):
        assert abs(_hex_identity_row(a, b0, black(dx, dn))) < 1e-9


@pytest.mark.parametrize("rho", [SYM, Slope(0.2, 0.7)])
def test_hex_densities_from_kernel(rho):
    a = k.hex_weights(rho)
    # direction 0 NW: rho1; 1 NE: rho2 - rho1; 2 horizontal: 1 - rho2
    expected = [rho.rho1, rho.rho2 - rho.rho1, 1 - rho.rho2]
    assert [k.hex_density(a, d) for d in range(3)] == pytest.approx(expected, abs=1e-9)


def test_hex_kinv_against_trapezoid_and_translation():
    a = k.hex_weights(Slope(0.3, 0.8))
    rng = np.random.default_rng(3)
    for _ in range(5):
        w = white(*rng.integers(-3, 4, size=2).tolist())
        b = black(*rng.integers(-3, 4, size=2).tolist())
        val = k.hex_kinv(a, w, b)
        # residues taken in the other variable first
        assert val == pytest.approx(k.hex_kinv(a, w, b, swapped=True), abs=1e-8)
        # the denominator vanishes on the torus, so the plain trapezoid is only O(1/n)
        assert val == pytest.approx(k.hex_kinv_trapezoid(a, w, b, n=2048), abs=5e-3)
        v = rng.integers(-7, 8, size=2).tolist()
        assert k.hex_kinv(a, w.shift(*v), b.shift(*v)) == pytest.approx(val, abs=1e-12)


def test_hex_kinv_far_decay():
    a = k.hex_weights(SYM)
    vals = []
    for d in range(4, 21, 4):
        vals.append((d, abs(k.hex_kinv(a, white(d, 0), black(0, 0)))))
    C = max(v * (1 + d) for d, v in vals)
    assert all(v <= C / (1 + d) + 1e-12 for d, v in vals)
    assert vals[-1][1] < vals[0][1]


def test_speed_hex_examples():
    assert k.speed_hex(SYM) == pytest.approx(math.sqrt(3) / (2 * math.pi))
    assert k.speed_hex(Slope(1e-9, 0.5)) < 1e-8
    for r2 in (0.4, 0.7):
        for r1 in (0.1, 0.25):
            if r1 < r2:
                assert k.speed_hex(Slope(r1, r2)) == pytest.approx(k.speed_hex(Slope(r2 - r1, r2)))


@pytest.mark.parametrize("rho", [SYM, Slope(0.25, 0.6)])
def test_v_expectation_equals_speed(rho):
    a = k.hex_weights(rho)
    for x, n in ((0, 0), (3, -2)):
        assert k.hex_v_expectation(a, k.horizontal_edge(x, n)) == pytest.approx(k.speed_hex(rho), abs=1e-6)


def test_pair_kernel_properties():
    a = k.hex_weights(SYM)
    e1 = k.horizontal_edge(0, 0)
    assert k.hex_pair_kernel(a, e1, e1) == 0.0
    e2 = k.horizontal_edge(5, -1)
    assert k.hex_pair_kernel(a, e1, e2) == pytest.approx(k.hex_pair_kernel(a, e2, e1), abs=1e-12)


def test_pair_kernel_equals_truncated_o_tilde_sum():
    a = k.hex_weights(SYM)
    e1, e2 = k.horizontal_edge(0, 0), k.horizontal_edge(5, 0)
    assert k.hex_pair_kernel(a, e1, e2) == pytest.approx(k.hex_pair_sum(a, e1, e2, 12), abs=1e-6)


def test_covariance_identity_separated():
    a = k.hex_weights(SYM)
    e1, e2 = k.horizontal_edge(0, 0), k.horizontal_edge(3, 1)
    mom = k.hex_vtilde_moment(a, e1, e2, 12)
    mu = k.hex_v_expectation(a, e1)
    # for separated edges the scaled 2x2 determinant is the full second moment E[V~ V~]
    assert mom == pytest.approx(k.hex_pair_kernel(a, e1, e2), abs=1e-6)
    assert k.hex_vtilde_covariance(a, e1, e2, 12) == pytest.approx(mom - mu * mu, abs=1e-12)


def test_second_moment_series_stabilizes():
    a = k.hex_weights(SYM)
    e = k.horizontal_edge(0, 0)
    m15 = k.hex_vtilde_moment(a, e, e, 15)
    m20 = k.hex_vtilde_moment(a, e, e, 20)
    assert abs(m15 - m20) < 1e-4


def test_o_tilde_probabilities_and_decay():
    a = k.hex_weights(SYM)
    e = k.horizontal_edge(0, 0)
    probs = [k.o_tilde_prob(a, e, m) for m in range(1, 9)]
    assert all(0 <= p <= 1 for p in probs)
    assert all(p >= q for p, q in zip(probs, probs[1:]))
    fit = k.decay_fit(a, 10)
    assert fit.c1 > 0 and fit.C1 > 0
    # the decay is faster than exponential: log-decrements increase with m
    logs = np.log(fit.probs)
    assert np.all(np.diff(np.diff(logs)) < 0)
    # so an exponential envelope with the fitted rate bounds every term
    env = np.max(np.array(fit.probs) * np.exp(fit.c1 * np.arange(1, 11)))
    assert np.all(np.array(fit.probs) <= env * np.exp(-fit.c1 * np.arange(1, 11)) * (1 + 1e-12))


# ---------------------------------------------------------------- square lattice

def _z2_identity_row(B, b, b2):
    return sum(k.z2_kbar(B, Edge(b, d)) * k.z2_kinv(B, w, b2)
               for d, w in enumerate(black_neighbors(SQ, b)))


@pytest.mark.parametrize("B", [k.SquareFields(0.0, 0.0), k.SquareFields(0.3, -0.2)])
def test_z2_kernel_is_an_inverse(B):
    b0 = black(0, 0)
    assert _z2_identity_row(B, b0, b0) == pytest.approx(1.0, abs=1e-8)
    for v in ((1, 0), (0, 2), (-1, 1)):
        assert abs(_z2_identity_row(B, b0, black(*v))) < 1e-8


def test_closed_entries_at_origin():
    B = k.SquareFields(0.0, 0.0)
    assert k.z2_kinv_single(B, white(-1, 1), black(1, 0)) == pytest.approx((math.pi / 4 - 1) / math.pi, abs=1e-10)
    assert k.z2_kinv_single(B, white(0, 1), black(1, 0)) == pytest.approx(-0.25j, abs=1e-10)
    p = (1j * k.z2_kinv_double(B, white(0, 0), black(0, 0)))
    assert abs(p.imag) < 1e-10 and 0 < p.real < 1


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.integers(-3, 3), st.integers(-3, 3),
       st.integers(-3, 3), st.integers(-3, 3))
def test_single_vs_double_contour(B1, B2, a1, a2, c1, c2):
    B = k.SquareFields(B1, B2)
    if not k.in_amoeba(B):
        return
    w, b = white(a1, a2), black(c1, c2)
    assert k.z2_kinv_single(B, w, b) == pytest.approx(k.z2_kinv_double(B, w, b), abs=1e-8)


def test_z2_translation_invariance():
    B = k.SquareFields(0.2, 0.1)
    assert k.z2_kinv_double(B, white(1, 2), black(0, 0)) == pytest.approx(
        k.z2_kinv_double(B, white(4, -1), black(3, -3)), abs=1e-12)


def test_omega_c():
    assert k.omega_c(k.SquareFields(0.0, 0.0)) == pytest.approx(1j)
    assert k.omega_c(k.SquareFields(0.0, 8.0)) == pytest.approx(1.0, abs=1e-3)
    rng = np.random.default_rng(0)
    for _ in range(10):
        B = k.SquareFields(*rng.uniform(-0.7, 0.7, size=2))
        if k.in_amoeba(B):
            om = k.omega_c(B)
            assert abs(om) == pytest.approx(math.exp(-B.B1))
            assert om.imag >= 0


def test_slope_of_B():
    s = k.slope_of_B(k.SquareFields(0.0, 0.0))
    assert (s.rho1, s.rho2) == pytest.approx((0.0, 0.0), abs=1e-14)
    rng = np.random.default_rng(5)
    n = 0
    while n < 10:
        B = k.SquareFields(*rng.uniform(-0.7, 0.7, size=2))
        if not k.in_amoeba(B):
            continue
        s = k.slope_of_B(B)
        assert abs(s.rho1) < 0.5 and abs(s.rho2) < 0.5
        sk = k.slope_of_B_kernel(B)
        assert (sk.rho1, sk.rho2) == pytest.approx((s.rho1, s.rho2), abs=1e-8)
        n += 1


def test_B_of_slope_round_trip():
    B = k.B_of_slope(Slope(0.0, 0.0))
    assert (B.B1, B.B2) == pytest.approx((0.0, 0.0), abs=1e-10)
    for r1 in np.linspace(-0.4, 0.4, 9):
        for r2 in np.linspace(-0.4, 0.4, 9):
            s = k.slope_of_B(k.B_of_slope(Slope(r1, r2)))
            assert (s.rho1, s.rho2) == pytest.approx((r1, r2), abs=1e-8)
    rep = k.B_of_slope(Slope(0.45, 0.0), report=True) if "report" in k.B_of_slope.__code__.co_varnames else None
    if rep is not None:
        assert rep.residual < 1e-6


def test_domino_densities():
    assert k.domino_densities(k.SquareFields(0.0, 0.0)) == pytest.approx((0.25,) * 4)
    rng = np.random.default_rng(2)
    for _ in range(10):
        B = k.SquareFields(*rng.uniform(-0.6, 0.6, size=2))
        if not k.in_amoeba(B):
            continue
        d = k.domino_densities(B)
        assert sum(d) == pytest.approx(1.0, abs=1e-12)
        assert all(0 < x < 1 for x in d)
        s = k.slope_of_B(B)
        assert s.rho1 + 0.5 == pytest.approx(d[0] + d[3], abs=1e-10)
        assert s.rho2 + 0.5 == pytest.approx(d[0] + d[1], abs=1e-10)
        assert k.domino_densities_kernel(B) == pytest.approx(d, abs=1e-8)


def test_speed_z2_examples():
    assert k.speed_z2(Slope(0.0, 0.0)) == pytest.approx(1 / math.pi)
    assert k.speed_z2(Slope(0.0, 0.25)) == pytest.approx((math.sqrt(2) - 1) / math.pi)
    assert k.speed_z2(Slope(0.5 - 1e-9, 0.1)) < 1e-7
    for rho in (Slope(0.1, 0.2), Slope(-0.3, 0.05)):
        assert k.speed_z2(rho) == pytest.approx(k.speed_z2_omega(rho), abs=1e-8)


def test_speed_series():
    rho = Slope(0.0, 0.0)
    total, parts = k.speed_z2_series(rho, 40, terms=True)
    assert abs(total - 1 / math.pi) < 1e-3
    assert all(p >= -1e-12 for p in parts)
    assert parts[0] <= total
    partial = np.cumsum(parts)
    assert np.all(np.diff(partial) >= -1e-12)
    # geometric decay of the terms: negative slope of log-terms
    tail = np.array(parts[5:30])
    slope = np.polyfit(np.arange(len(tail)), np.log(np.abs(tail) + 1e-300), 1)[0]
    assert slope < 0


def test_hessian_signature_and_W():
    rng = np.random.default_rng(7)
    for _ in range(10):
        rho = Slope(*rng.uniform(-0.4, 0.4, size=2))
        rep = k.hessian_z2(rho)
        assert rep.det < 0
        assert rep.eigenvalues[0] < 0 < rep.eigenvalues[1]
        assert rep.det_psi == pytest.approx(rep.W, rel=1e-4)
    # the closed form at the centre, evaluated directly: (-5 - 9 + 2 (3 - 4)) / 16
    assert k.W_closed(math.pi / 2, 0.0) == pytest.approx(-1.0)
