import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from reflectionless.errors import DegenerateWarning, ValidationError
from reflectionless.krein import KreinFunction, extract_measure
from reflectionless.measures import SpectralMeasure, weak_star_distance
from reflectionless.sets import FiniteGapSet, gaps
from reflectionless.spectral import (
    JacobiMatrix,
    TorusPoint,
    green_function,
    h_function,
    half_line_m,
    half_line_measure,
    is_reflectionless,
    jacobi_distance,
    jacobi_from_torus,
    lanczos_recurrence,
    reconstruct_from_halfline,
    spectral_inclusion,
    torus_circle_decode,
    torus_circle_encode,
    torus_from_periodic,
    torus_measures,
    xi_from_J,
    xi_from_torus,
)

from .strategies import one_gap_torus

K_FREE = FiniteGapSet([(-2, 2)], 3)
PERIOD2 = JacobiMatrix.periodic([1.0, 0.5], [0.0, 0.0])


def free_rho(n):
    return extract_measure(KreinFunction(3, [-3, -2, 2, 3], [1, 0.5, 0]), K_FREE, n)


def dense_green(J, n, z, pad=600):
    """Oracle: dense inverse of the window extended by ``pad`` constant sites each side."""
    a = np.concatenate([np.full(pad, J.a[0]), J.a, np.full(pad, J.a[-1])])
    b = np.concatenate([np.full(pad, J.b[0]), J.b, np.full(pad, J.b[-1])])
    M = np.diag(b.astype(complex) - z) + np.diag(a, 1) + np.diag(a, -1)
    e = np.zeros(b.size)
    i = n - J.offset + pad
    e[i] = 1
    return np.linalg.solve(M, e)[i]


def dense_periodic_green(a, b, n, z, copies=400):
    p = len(a)
    L = copies * p
    aa = np.tile(a, copies)[:-1]
    bb = np.tile(b, copies)
    M = np.diag(bb.astype(complex) - z) + np.diag(aa, 1) + np.diag(aa, -1)
    i = (copies // 2) * p + n
    e = np.zeros(L)
    e[i] = 1
    return np.linalg.solve(M, e)[i]


def random_window(rng, N=60):
    return JacobiMatrix(rng.uniform(0.5, 1.5, 2 * N), rng.uniform(-1, 1, 2 * N + 1), -N)


# --- JacobiMatrix -------------------------------------------------------------


def test_jacobi_validation():
    with pytest.raises(ValidationError):
        JacobiMatrix([1.0, -1.0], [0, 0, 0])
    with pytest.raises(ValidationError):
        JacobiMatrix([1.0], [0, 0, 0])
    with pytest.raises(ValidationError):
        JacobiMatrix([1.0, 1.0, 1.0], [0, 0, 0], 0, 2)
    with pytest.raises(ValidationError):
        JacobiMatrix([1.0], [0, 0], 0, "mirror")


def test_jacobi_json_round_trip(tmp_path):
    J = reconstruct_from_halfline(SpectralMeasure([(-1, 0.5), (1, 0.5)]), free_rho(64).scaled(0.5), 0.1, 4)
    d = J.to_dict()
    assert None in d["a"]  # undetermined coefficients are written as null
    J2 = JacobiMatrix.from_dict(d)
    assert np.array_equal(np.isnan(J2.a), np.isnan(J.a))
    assert np.allclose(J2.a[np.isfinite(J2.a)], J.a[np.isfinite(J.a)])
    P = JacobiMatrix.from_dict(PERIOD2.to_dict())
    assert P.boundary == 2 and np.array_equal(P.a, PERIOD2.a)


def test_periodic_access():
    assert PERIOD2.a_at(-3) == 0.5 and PERIOD2.a_at(4) == 1.0
    J = JacobiMatrix.constant(1.0, 0.3, 5)
    assert J.b_at(100) == 0.3  # pad-constant continuation


# --- Green functions ----------------------------------------------------------


def test_green_free():
    J = JacobiMatrix.free()
    assert green_function(J, 0, 3j) == pytest.approx(1j / math.sqrt(13), abs=1e-12)
    z = np.array([0.3 + 0.1j, -1.9 + 1j, 2.5 + 0.5j])
    assert np.allclose(green_function(J, 7, z), -1 / (np.sqrt(z - 2) * np.sqrt(z + 2)), atol=1e-12)


def test_green_diagonal():
    J = JacobiMatrix(np.zeros(10), np.full(11, 0.7), -5)
    for n in (-5, 0, 5):
        assert green_function(J, n, 1 + 2j) == pytest.approx(1 / (0.7 - (1 + 2j)))


def test_green_matches_dense_oracle(rng):
    J = random_window(rng)
    for z in (0.2 + 0.1j, -1 + 0.5j):
        for n in (-5, 0, 3):
            assert abs(green_function(J, n, z, margin=0) - dense_green(J, n, z)) < 1e-10


def test_green_edge_error():
    J = JacobiMatrix.free(100)
    with pytest.raises(ValidationError):
        green_function(J, 80, 1j)
    with pytest.raises(ValidationError):
        green_function(J, 0, 1.0)


def test_green_periodic_matches_dense():
    a, b = np.array([1.0, 0.5, 0.8]), np.array([0.1, -0.3, 0.2])
    J = JacobiMatrix.periodic(a, b)
    for n in range(3):
        z = 0.4 + 0.2j
        assert abs(green_function(J, n, z) - dense_periodic_green(a, b, n, z)) < 1e-10


@given(st.integers(-3, 3), st.floats(-4, 4), st.floats(1e-3, 3))
def test_green_herglotz(n, x, y):
    for J in (JacobiMatrix.free(120), PERIOD2):
        z = complex(x, y)
        assert green_function(J, n, z).imag > 0
        assert h_function(J, z).imag > 0


def test_h_examples():
    z = np.array([3j, 0.5 + 0.2j])
    assert np.allclose(h_function(JacobiMatrix.free(), z), np.sqrt(z - 2) * np.sqrt(z + 2), atol=1e-12)
    J = JacobiMatrix(np.zeros(4), np.full(5, 0.25), -2)
    assert h_function(J, 1j) == pytest.approx(1j - 0.25)


def dense_halfline_m(J, z, side, pad=600):
    """Oracle: a(0)^2 <delta_1,(J_+ - z)^{-1} delta_1> by dense solve on an extended half line."""
    if side == "+":
        b = np.array([J.b_at(k) for k in range(1, J.n_max + 1)] + [J.b[-1]] * pad)
        a = np.array([J.a_at(k) for k in range(1, J.n_max)] + [J.a[-1]] * pad)
        edge = J.a_at(0)
    else:
        b = np.array([J.b_at(k) for k in range(-1, J.n_min - 1, -1)] + [J.b[0]] * pad)
        a = np.array([J.a_at(k - 1) for k in range(-1, J.n_min, -1)] + [J.a[0]] * pad)
        edge = J.a_at(-1)
    M = np.diag(b.astype(complex) - z) + np.diag(a, 1) + np.diag(a, -1)
    e = np.zeros(b.size)
    e[0] = 1
    return edge**2 * np.linalg.solve(M, e)[0]


def test_h_halfline_consistency(rng):
    J = random_window(rng)
    for z in (0.3 + 0.2j, -1.2 + 1j):
        mp, mm = half_line_m(J, z, "+"), half_line_m(J, z, "-")
        assert abs(mp - dense_halfline_m(J, z, "+")) < 1e-10
        assert abs(mm - dense_halfline_m(J, z, "-")) < 1e-10
        h = z - J.b_at(0) + mp + mm
        assert abs(h - h_function(J, z, margin=0)) < 1e-10


def test_h_halfline_consistency_periodic_and_weyl():
    K, p = torus_from_periodic(PERIOD2)
    J = jacobi_from_torus(K, p, 30)
    for Jx in (PERIOD2, J):
        z = 0.2 + 0.3j
        h = z - Jx.b_at(0) + half_line_m(Jx, z, "+") + half_line_m(Jx, z, "-")
        assert abs(h - h_function(Jx, z)) < 1e-10


def test_weyl_green_matches_periodic():
    K, p = torus_from_periodic(PERIOD2)
    J = jacobi_from_torus(K, p, 30)
    z = np.array([0.7 + 0.01j, -1.2 + 0.1j, 3j])
    for n in (-3, 0, 2):
        assert np.allclose(green_function(J, n, z), green_function(PERIOD2, n, z), atol=1e-9)


# --- forward map --------------------------------------------------------------


def test_xi_free():
    xi = xi_from_J(JacobiMatrix.free(), radius=3)
    assert len(xi.pieces) == 3
    (l0, h0, v0), (l1, h1, v1), (l2, h2, v2) = xi.pieces
    assert (v0, v1, v2) == (1.0, 0.5, 0.0)
    assert h0 == pytest.approx(-2, abs=1e-3) and h1 == pytest.approx(2, abs=1e-3)


def test_xi_diagonal():
    J = JacobiMatrix(np.zeros(20), np.full(21, 0.5), -10)
    xi = xi_from_J(J, radius=3)
    assert [v for *_, v in xi.pieces] == [1.0, 0.0]
    assert xi.breakpoints[1] == pytest.approx(0.5, abs=1e-9)


def test_xi_shift_covariance_periodic():
    J = JacobiMatrix.periodic([1.0, 0.5, 0.8], [0.1, -0.3, 0.2])
    x0 = xi_from_J(J, radius=4)
    assert xi_from_J(J.shifted(3), radius=4).pieces == x0.pieces
    assert xi_from_J(J.shifted(1), radius=4).pieces != x0.pieces


def test_xi_of_periodic_matches_torus():
    K, p = torus_from_periodic(PERIOD2)
    xi = xi_from_J(PERIOD2, radius=K.radius)
    ref = xi_from_torus(K, p)
    t = np.linspace(-K.radius + 1e-3, K.radius - 1e-3, 4001)
    assert np.mean(np.abs(xi(t) - ref(t))) < 1e-3


# --- inverse map --------------------------------------------------------------


def test_reconstruct_free():
    half = free_rho(2000).scaled(0.5)
    J = reconstruct_from_halfline(half, half, 0.0, 20)
    assert np.max(np.abs(J.a - 1)) < 1e-6
    assert np.max(np.abs(J.b)) < 1e-6


def test_reconstruct_zero_mass_warns():
    with pytest.warns(DegenerateWarning):
        J = reconstruct_from_halfline(SpectralMeasure(), free_rho(256).scaled(0.5), 0.0, 5)
    assert J.a_at(0) == 0
    assert np.all(np.isnan([J.b_at(k) for k in range(1, 6)]))


def test_reconstruct_two_atoms():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWarning)
        J = reconstruct_from_halfline(SpectralMeasure([(-1, 0.5), (1, 0.5)]), SpectralMeasure(), 0.0, 4)
    # 2x2 Jacobi matrix with eigenvalues -1, 1 and equal first-component weights
    assert J.a_at(0) == pytest.approx(1.0)
    assert J.b_at(1) == pytest.approx(0.0, abs=1e-15) and J.b_at(2) == pytest.approx(0.0, abs=1e-15)
    assert J.a_at(1) == pytest.approx(1.0)
    assert math.isnan(J.a_at(2)) and math.isnan(J.b_at(3))
    lo, hi = J.determined_range()
    assert hi == 2


def test_reconstruct_depth_limit():
    with pytest.raises(ValidationError):
        reconstruct_from_halfline(free_rho(64), free_rho(64), 0.0, 20)


@given(
    st.lists(st.floats(-3, 3), min_size=2, max_size=12, unique=True),
    st.lists(st.floats(0.01, 1.0), min_size=12, max_size=12),
)
def test_lanczos_recovers_gauss_rule(xs, ws):
    x = np.sort(np.array(xs))
    if np.min(np.diff(x)) < 1e-3:
        return
    w = np.array(ws[: x.size])
    al, bt = lanczos_recurrence(x, w, x.size)
    assert al.size == x.size and bt.size == x.size - 1
    ev, vec = eigh_tridiagonal(al, bt)
    assert np.allclose(ev, x, atol=1e-9)
    assert np.allclose(vec[0] ** 2, w / w.sum(), atol=1e-9)


# --- torus --------------------------------------------------------------------


def test_xi_from_torus_examples():
    assert [v for *_, v in xi_from_torus(K_FREE, TorusPoint([], [])).pieces] == [1, 0.5, 0]
    K = FiniteGapSet([(-2, -1), (1, 2)], 3)
    xi = xi_from_torus(K, TorusPoint([1.0], [0]))
    assert [v for *_, v in xi.pieces] == [1, 0.5, 0, 0.5, 0]
    xi = xi_from_torus(K, TorusPoint([0.0], [1]))
    assert list(xi.breakpoints) == [-3, -2, -1, 0, 1, 2, 3]
    assert list(xi.values) == [1, 0.5, 0, 1, 0.5, 0]


def test_torus_point_validation():
    K = FiniteGapSet([(-2, -1), (1, 2)], 3)
    with pytest.raises(ValidationError):
        TorusPoint([1.5], [0]).validate(K)
    with pytest.raises(ValidationError):
        TorusPoint([0.0, 0.1], [0, 1]).validate(K)
    with pytest.raises(ValidationError):
        TorusPoint([0.0], [3])


def test_jacobi_from_torus_free_and_shift():
    J = jacobi_from_torus(K_FREE, TorusPoint([], []), 20)
    assert np.max(np.abs(J.a - 1)) < 1e-6 and np.max(np.abs(J.b)) < 1e-6
    c = 0.4
    Jc = jacobi_from_torus(FiniteGapSet([(c - 2, c + 2)], 3), TorusPoint([], []), 20)
    assert np.max(np.abs(Jc.a - 1)) < 1e-6 and np.max(np.abs(Jc.b - c)) < 1e-6
    # free operator: eigenvalue oracle for the spectrum [-2, 2]
    ev = np.linalg.eigvalsh(JacobiMatrix.free(200).dense())
    assert ev.min() > -2 and ev.max() < 2 and ev.min() < -1.999


def test_period2_round_trip():
    K, p = torus_from_periodic(PERIOD2)
    assert len(K.bands) == 2
    assert K.bands[0].lo == pytest.approx(-K.bands[1].hi) and K.bands[0].hi == pytest.approx(-K.bands[1].lo)
    J = jacobi_from_torus(K, p, 12)
    err = max(max(abs(J.a_at(n) - PERIOD2.a_at(n)), abs(J.b_at(n) - PERIOD2.b_at(n))) for n in range(-10, 11))
    assert err < 1e-4
    # and once more through the forward map of the reconstruction
    K2, p2 = torus_from_periodic(JacobiMatrix.periodic(J.a[12:14], J.b[12:14]))
    assert p2.mus == pytest.approx(p.mus, abs=1e-6) and p2.sigmas == p.sigmas


@settings(max_examples=4)
@given(one_gap_torus())
def test_forward_inverse_round_trip(case):
    K, mu, sigma = case
    p = TorusPoint([mu], [sigma])
    J = jacobi_from_torus(K, p, 400)
    _, _, nu_p, _, _ = torus_measures(K, p)
    # nu_+ from the coefficients alone: the Gauss rule of the half-line block
    assert weak_star_distance(half_line_measure(J, "+"), nu_p, K.radius) < 5e-3
    xi = xi_from_J(J, radius=K.radius)
    ref = xi_from_torus(K, p)
    t = np.linspace(-K.radius, K.radius, 6001)[1:-1]
    assert np.trapezoid(np.abs(xi(t) - ref(t)), t) < 5e-3


@given(st.floats(0, 1), st.integers(0, 1))
def test_circle_round_trip(frac, sigma):
    K = FiniteGapSet([(-2, -1), (1, 2.5)], 3)
    g = gaps(K)[0]
    mu = g.lo + frac * (g.hi - g.lo)
    p = TorusPoint([mu], [sigma])
    z = torus_circle_encode(K, p)
    assert abs(abs(z[0]) - 1) < 1e-15
    q = torus_circle_decode(K, z)
    assert q.mus[0] == pytest.approx(mu, abs=1e-12)
    if g.lo < mu < g.hi:
        assert q.sigmas == p.sigmas


def test_circle_examples():
    K = FiniteGapSet([(-2, -1), (1, 2)], 3)
    assert torus_circle_encode(K, TorusPoint([-1.0], [1])) == [1]
    assert torus_circle_encode(K, TorusPoint([1.0], [1])) == [-1]
    assert torus_circle_encode(K, TorusPoint([0.0], [1]))[0] == pytest.approx(1j, abs=1e-15)
    with pytest.raises(ValidationError):
        torus_circle_decode(K, [2.0])


# --- reflectionless check -----------------------------------------------------


def test_is_reflectionless_free():
    J = JacobiMatrix.free()
    assert is_reflectionless(J, K_FREE, y=1e-3, tol=1e-2).passed
    rep = is_reflectionless(J, FiniteGapSet([(-3, 3)], 4), y=1e-3, tol=1e-2)
    assert not rep.passed and abs(rep.worst_t) > 2


def test_is_reflectionless_diagonal():
    J = JacobiMatrix(np.zeros(200), np.full(201, 0.5), -100)
    assert not is_reflectionless(J, FiniteGapSet([(0.0, 1.0)], 3)).passed
    assert not is_reflectionless(J, FiniteGapSet([(1.0, 2.0)], 3)).passed
    rep = is_reflectionless(J, FiniteGapSet([(1.0, 1.01)], 3))
    assert rep.vacuous and rep.passed and rep.n_samples == 0


def test_is_reflectionless_torus_point():
    K = FiniteGapSet([(-2, -0.3), (0.4, 2.2)], 3)
    J = jacobi_from_torus(K, TorusPoint([0.1], [1]), 40)
    assert is_reflectionless(J, K).passed


def test_is_reflectionless_rejects_y():
    with pytest.raises(ValidationError):
        is_reflectionless(JacobiMatrix.free(), K_FREE, y=0.5)


# --- spectral inclusion and distance ------------------------------------------


def test_spectral_inclusion_shrinks():
    K = FiniteGapSet([(-2, -0.3), (0.4, 2.2)], 3)
    dists = []
    for depth in (25, 50, 100):
        J = jacobi_from_torus(K, TorusPoint([0.1], [1]), depth)
        dists.append(spectral_inclusion(J, K).max_distance)
    assert dists[-1] <= dists[0]
    assert dists[-1] < 1e-2


def test_jacobi_distance():
    J = JacobiMatrix.free(50)
    assert jacobi_distance(J, J) == 0
    assert jacobi_distance(J, J + 0.1) == pytest.approx(0.1 * sum(2.0 ** -abs(n) for n in range(-50, 51)))
    assert jacobi_distance(J, PERIOD2) > 0
