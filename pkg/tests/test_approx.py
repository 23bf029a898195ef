import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reflectionless.approx import (
    SubdivisionPlan,
    approximate_reflectionless,
    averaged_xi,
    band_factor,
    greedy_sigma,
    lemma32_band_weight,
    lemma32_density,
    lemma32_xi,
    split_point_mass,
    split_weights_closed_form,
    subdivide,
    transport_torus_data,
)
from reflectionless.errors import ValidationError
from reflectionless.krein import KreinFunction, atom_weight, chebyshev_nodes, measure_from_xi
from reflectionless.measures import SplitSpec
from reflectionless.sets import FiniteGapSet, gaps, lebesgue_symmdiff
from reflectionless.spectral import TorusPoint

A0 = FiniteGapSet([(-1, 0), (1, 2)], 3)


def gap_xi(inner_pieces, R=3.0):
    """xi = 1 left of A0, 1/2 on its bands, 0 right of it, ``inner_pieces`` on the gap (0, 1)."""
    return KreinFunction.from_pieces(R, [(-R, -1, 1), (-1, 0, 0.5)] + inner_pieces + [(1, 2, 0.5), (2, R, 0)])


# --- subdivide ----------------------------------------------------------------


def test_subdivide_examples():
    An = subdivide(A0, SubdivisionPlan(2, 0.01))
    assert len(An.bands) == 3
    mid = An.bands[1]
    assert mid.lo == pytest.approx(0.495, abs=1e-15) and mid.hi == pytest.approx(0.505, abs=1e-15)
    assert subdivide(A0, SubdivisionPlan(1, 0.01)) == A0
    with pytest.raises(ValidationError):
        subdivide(A0, SubdivisionPlan(11, 0.1))
    with pytest.raises(ValidationError):
        SubdivisionPlan(0, 0.1)


@given(st.integers(1, 50), st.floats(1e-6, 1e-2))
def test_subdivide_bookkeeping(n, delta):
    K = FiniteGapSet([(-2.5, -2), (-1, 0), (0.7, 2.4)], 3)
    An = subdivide(K, SubdivisionPlan(n, delta))
    assert len(gaps(An)) == len(gaps(K)) * n
    assert An.measure - K.measure == pytest.approx(len(gaps(K)) * (n - 1) * delta, abs=1e-12)
    for g0 in gaps(K):
        sub = [g for g in gaps(An) if g0.lo <= g.lo and g.hi <= g0.hi]
        assert len(sub) == n
        assert np.allclose([g.length for g in sub], SubdivisionPlan(n, delta).subgap_length(g0.length), atol=1e-12)
    assert lebesgue_symmdiff(An, K) == pytest.approx(len(gaps(K)) * (n - 1) * delta, abs=1e-12)


# --- averaged xi --------------------------------------------------------------


def test_averaged_examples():
    xin = averaged_xi(gap_xi([(0, 1, 0.5)]), A0)
    assert xin.breakpoints[3] == pytest.approx(0.5)
    xin = averaged_xi(gap_xi([(0, 0.4, 0), (0.4, 1, 1)]), A0)
    assert 0.4 in list(xin.breakpoints) and list(xin.values) == [1, 0.5, 0, 1, 0.5, 0]
    xi = gap_xi([(0, 1, 0.25)])
    An = subdivide(A0, SubdivisionPlan(2, 0.01))
    xin = averaged_xi(xi, An)
    for g in gaps(An):
        assert xin.integral(g.lo, g.hi) == pytest.approx(0.25 * 0.495, abs=1e-15)
        # a single 0 -> 1 step on each sub-gap
        assert [v for *_, v in xin.pieces_in(g.lo, g.hi)] == [0, 1]


def test_averaged_band_deletion():
    # xi = 0 on the left half of the gap: the first sub-gap has mu = b and its right band goes
    xi = gap_xi([(0, 0.5, 0), (0.5, 1, 0.5)])
    An = subdivide(A0, SubdivisionPlan(4, 0.01))
    xin, An2 = averaged_xi(xi, An, protected=list(A0.bands), return_set=True)
    assert len(An2.bands) < len(An.bands)
    for b in An2.bands:
        assert all(v == 0.5 for *_, v in xin.pieces_in(b.lo, b.hi))
    # deleted bands change the integral by at most delta each
    deleted = len(An.bands) - len(An2.bands)
    assert abs(xin.integral(0, 1) - xi.integral(0, 1)) <= deleted * 0.01 + 1e-12


def test_averaged_collision_is_sequential():
    # sub-gap 1 wants to delete the band on its right (mu = b), sub-gap 2 the same band (mu = a)
    xi = gap_xi([(0, 0.5, 0), (0.5, 1, 1)])
    An = subdivide(A0, SubdivisionPlan(2, 0.02))
    xin, An2 = averaged_xi(xi, An, protected=list(A0.bands), return_set=True)
    assert An2 == A0
    # the merged gap carries a single step
    assert [v for *_, v in xin.pieces_in(0, 1)] == [0, 1]


@given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.integers(1, 12))
def test_averaged_preserves_gap_integrals(vals, n):
    xi = gap_xi([(0, 0.25, vals[0]), (0.25, 0.5, vals[1]), (0.5, 0.75, vals[2]), (0.75, 1, vals[3])])
    delta = 1e-3
    An = subdivide(A0, SubdivisionPlan(n, delta))
    xin, An2 = averaged_xi(xi, An, protected=list(A0.bands), return_set=True)
    deleted = len(An.bands) - len(An2.bands)
    # new bands are 1/2 in xi_n; add their contribution back from the original xi
    kept = sum(xi.integral(b.lo, b.hi) - 0.5 * b.length for b in An2.bands if 0 < b.lo < 1)
    assert abs(xin.integral(0, 1) + kept - xi.integral(0, 1)) <= deleted * delta + 1e-12


def test_averaged_hull_requirement():
    xi = KreinFunction(3, [-3, -1, 0, 1, 2, 3], [0.5, 0.5, 0.3, 0.5, 0])
    with pytest.raises(ValidationError):
        averaged_xi(xi, A0)


# --- band weight bound --------------------------------------------------------


def test_band_factor_midpoint():
    for delta in (1e-2, 1e-4):
        assert band_factor(delta / 2, 1.0, delta) == pytest.approx((delta / 2) / (1 + delta / 2), rel=1e-14)


def test_band_weight_decreasing():
    vals = [lemma32_band_weight(1, 1, d) for d in (1e-2, 1e-3, 1e-4)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert lemma32_band_weight(1, 1, 1e-6) < lemma32_band_weight(1, 1, 1e-2) / 10


@pytest.mark.parametrize("A,B,delta", [(1, 1, 1e-2), (0.5, 2, 1e-3), (2, 0.7, 1e-4)])
def test_band_weight_matches_extraction(A, B, delta):
    # oracle 1: the krein module's density of the extremal xi, integrated by Chebyshev quadrature
    m = measure_from_xi(lemma32_xi(A, B, delta), 512)
    band = [b for b in m.ac_bands if b.lo == 0.0][0]
    bound = lemma32_band_weight(A, B, delta)
    assert band.mass() == pytest.approx(bound, rel=1e-9)
    # oracle 2: the density formula itself
    x, w = chebyshev_nodes(0, delta, 512)
    assert np.dot(w, lemma32_density(x, A, B, delta)) == pytest.approx(bound, rel=1e-9)
    assert bound == pytest.approx(delta**2 / 2 * (2 * max(A, B)) ** 2 / (A * B * 4), rel=0.05)


def test_band_weight_is_maximal():
    # any other arrangement outside (-A, B) gives less mass on (0, delta)
    A, B, delta, R = 1.0, 1.0, 1e-2, 2.0
    bound = lemma32_band_weight(A, B, delta)
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = rng.uniform(0, 1, 2)
        xi = KreinFunction(R, [-R, -A, 0, delta, B, R], [v[0], 1.0, 0.5, 0.0, v[1]])
        band = [b for b in measure_from_xi(xi, 256).ac_bands if b.lo == 0.0][0]
        assert band.mass() <= bound * (1 + 1e-9)


# --- splitting lemma ----------------------------------------------------------

ONEGAP_XI = KreinFunction(3, [-3, -2, -1, 0, 1, 2, 3], [1, 0.5, 0, 1, 0.5, 0])


def twins(xi, g, delta, mu=0.0):
    xs = split_point_mass(xi, mu, g, delta)
    wl = atom_weight(xs, mu - g * delta)
    wr = atom_weight(xs, mu + (1 - g) * delta)
    return xs, wl, wr


@pytest.mark.parametrize("g", [0.1, 0.3, 0.5, 0.9])
def test_split_ratio(g):
    _, wl, wr = twins(ONEGAP_XI, g, 1e-3)
    assert abs(wl / (wl + wr) - g) < 0.01


def test_split_symmetric_half():
    _, wl, wr = twins(ONEGAP_XI, 0.5, 1e-3)
    assert abs(wl - wr) / (wl + wr) < 0.01


@pytest.mark.parametrize("g", [0.1, 0.3, 0.5, 0.9])
@pytest.mark.parametrize("delta", [1e-2, 1e-3, 1e-4])
def test_split_closed_form(g, delta):
    _, wl, wr = twins(ONEGAP_XI, g, delta)
    cl, cr = split_weights_closed_form(ONEGAP_XI, 0.0, g, delta)
    assert cl == pytest.approx(wl, rel=1e-12)
    assert cr == pytest.approx(wr, rel=1e-12)


def test_split_printed_variant_deviates():
    # with (g - delta) in place of (g + delta) the left weight is off by a factor sqrt((g-d)/(g+d))
    g, delta = 0.3, 1e-3
    _, wl, _ = twins(ONEGAP_XI, g, delta)
    cl, _ = split_weights_closed_form(ONEGAP_XI, 0.0, g, delta)
    printed = cl * math.sqrt((g - delta) / (g + delta))
    assert abs(printed / wl - 1) == pytest.approx(delta / g, rel=0.01)
    assert abs(printed / wl - 1) > 1e-6


def test_split_mass_converges():
    w = atom_weight(ONEGAP_XI, 0.0)
    errs, slivers = [], []
    for delta in (1e-2, 1e-3, 1e-4):
        xs, wl, wr = twins(ONEGAP_XI, 0.3, delta)
        m = measure_from_xi(xs, 256)
        sliver = sum(b.mass() for b in m.ac_bands if b.lo == 0.0)
        slivers.append(sliver / w)
        errs.append(abs(wl + wr + sliver - w))
    assert errs[0] > errs[1] > errs[2]
    assert slivers[1] < slivers[0] / 10 and slivers[2] < slivers[1] / 10
    assert errs[2] < 1e-3 * w


def test_split_errors():
    with pytest.raises(ValidationError):
        split_point_mass(ONEGAP_XI, 0.0, 0.3, 1.5)
    with pytest.raises(ValidationError):
        split_point_mass(ONEGAP_XI, 0.0, 0.0, 1e-3)
    narrow = KreinFunction(3, [-3, -2, -1, 0.9999, 1, 2, 3], [1, 0.5, 0, 1, 0.5, 0])
    with pytest.raises(ValidationError, match="clearance"):
        split_point_mass(narrow, 0.9999, 0.5, 1e-3)
    with pytest.raises(ValidationError):
        split_point_mass(ONEGAP_XI, 0.5, 0.5, 1e-3)  # no jump there


def test_greedy_sigma():
    assert greedy_sigma([1.0, 1.0], [0.5, 0.5]) in ([1, 0], [0, 1])
    assert greedy_sigma([3.0, 1.0, 1.0], [1, 0, 0]) == [1, 0, 0]
    assert greedy_sigma([0.5, 0.3, 0.2], [0.5, 0.5, 0.5]) == [1, 0, 0]
    assert greedy_sigma([1.0], [0.0]) == [0]


@given(st.lists(st.floats(0.01, 1), min_size=1, max_size=8), st.lists(st.floats(0, 1), min_size=8, max_size=8))
def test_greedy_sigma_tracks_target(ws, fs):
    f = fs[: len(ws)]
    sig = greedy_sigma(ws, f)
    target = float(np.dot(ws, f))
    assert abs(float(np.dot(ws, sig)) - target) <= max(ws) / 2 + 1e-12


# --- pipeline -----------------------------------------------------------------

TWOBAND = FiniteGapSet([(-2, -0.5), (0.5, 2)], 3)


def test_pipeline_nothing_to_split():
    xi = KreinFunction(3, [-3, -2, -0.5, 0.5, 2, 3], [1, 0.5, 0, 0.5, 0])  # mu at the right gap end
    stages = approximate_reflectionless(TWOBAND, xi, SplitSpec([]), [SubdivisionPlan(4, 1e-2)])
    d = stages[0].diagnostics
    assert stages[0].P == TWOBAND
    assert d["symmdiff_PB"] == 0 and d["d_J"] < 1e-8
    assert d["reflectionless_pass"]


def test_pipeline_trend_short():
    xi = KreinFunction(3, [-3, -2, -0.5, 0.1, 0.5, 2, 3], [1, 0.5, 0, 1, 0.5, 0])
    sched = [SubdivisionPlan(4, 1e-2), SubdivisionPlan(16, 1e-3)]
    stages = approximate_reflectionless(TWOBAND, xi, SplitSpec([1], g=[0.5]), sched)
    d = [s.diagnostics for s in stages]
    assert d[1]["symmdiff_PB"] < d[0]["symmdiff_PB"]
    assert d[1]["d_J"] < d[0]["d_J"]
    assert d[1]["weak_star_nu_plus"] < d[0]["weak_star_nu_plus"]
    for s in stages:
        assert s.diagnostics["reflectionless_pass"]
        # P_n contains B
        assert all(any(p.lo <= b.lo and b.hi <= p.hi for p in s.P.bands) for b in TWOBAND.bands)


def test_pipeline_wrong_split_length():
    xi = KreinFunction(3, [-3, -2, -0.5, 0.1, 0.5, 2, 3], [1, 0.5, 0, 1, 0.5, 0])
    with pytest.raises(ValidationError):
        approximate_reflectionless(TWOBAND, xi, SplitSpec([1, 0]), [SubdivisionPlan(2, 1e-2)])


# --- transport ----------------------------------------------------------------

K3 = FiniteGapSet([(-2, -1), (0, 0.5), (1.5, 2)], 3)


def test_transport_identity():
    p = TorusPoint([-0.5, 1.0], [1, 0])
    assert transport_torus_data(K3, K3, p) == p


def test_transport_interior():
    K2 = FiniteGapSet([(-2, -1 + 1e-4), (0, 0.5), (1.5, 2)], 3)
    p = TorusPoint([-0.5, 1.0], [1, 0])
    assert transport_torus_data(K3, K2, p) == p


def test_transport_endpoint_follows():
    K2 = FiniteGapSet([(-2, -1 + 1e-3), (0, 0.5), (1.5, 2)], 3)
    q = transport_torus_data(K3, K2, TorusPoint([-1.0, 1.5], [0, 0]))
    assert q.mus == (-1 + 1e-3, 1.5)


def test_transport_unmatched_and_failure():
    K2 = FiniteGapSet([(-2, -1), (0, 0.2), (0.21, 0.5), (1.5, 2)], 3)
    q = transport_torus_data(K3, K2, TorusPoint([-0.5, 1.0], [1, 0]))
    assert q.mus[1] == 0.21  # the new short gap gets mu at its right end
    K_far = FiniteGapSet([(-2, -0.6), (0, 0.5), (1.5, 2)], 3)
    with pytest.raises(ValidationError, match="gap 0"):
        transport_torus_data(K3, K_far, TorusPoint([-0.5, 1.0], [1, 0]))
