import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sparse_vecs
from tubelab.checks import directional_diff, richardson_diff
from tubelab.errors import DomainError
from tubelab.negligibility import (
    CylindricalBody, DeletingDiffeo, PlanarBand, StarlikeBody, StarlikeToolkit,
    planar_phi, planar_phi_inverse,
)
from tubelab.seq_space import SparseVec
from tubelab.tube import CylPoint, Z

EPS = 0.01
BAND = PlanarBand(EPS)
DELETER = DeletingDiffeo()
CHART = DELETER.chart
KIT = StarlikeToolkit(deleter=DELETER)


def h_vector(rng, radius, dim=6):
    """Random vector of the given norm in the hyperplane orthogonal to z."""
    v = SparseVec.from_dense(rng.standard_normal(dim))
    v = v - Z.dot(v) * Z
    return v * (radius / v.norm())


def unit_dir(rng, dim=8):
    d = SparseVec.from_dense(rng.standard_normal(dim))
    return d / d.norm()


def ball_point(rng, dim=8, rmax=1.0):
    return unit_dir(rng, dim) * (rmax * rng.uniform() ** (1.0 / dim))


def band_samples(rng, n):
    """Points of the plane with 1/2 < q_B < 1."""
    out = []
    while len(out) < n:
        s = rng.uniform(-EPS / 2, EPS / 2)
        t = rng.uniform(-1.0, 0.0)
        q = BAND.gauge(s, t)
        if 0.5 < q < 1.0:
            out.append((s, t))
    return out


def moved_point(rng):
    """A cylinder point inside V, the region the deleting map moves."""
    return CylPoint(h_vector(rng, rng.uniform(0.0, EPS / 2)), rng.uniform(1.0, 10.0))


# planar band ----------------------------------------------------------------------

def test_band_needs_positive_width():
    with pytest.raises(ValueError):
        PlanarBand(0.0)


@pytest.mark.parametrize("s", np.linspace(-EPS / 4, EPS / 4, 11))
def test_gauge_is_one_on_floor(s):
    assert BAND.gauge(s, -1.0) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("t", [-1.0 + EPS / 4, -0.9, -0.5, 0.0, 3.0, 40.0])
@pytest.mark.parametrize("sign", [-1.0, 1.0])
def test_gauge_is_one_on_sides(t, sign):
    assert BAND.gauge(sign * EPS / 2, t) == pytest.approx(1.0, abs=1e-8)


def test_gauge_vanishes_on_recession_ray():
    for t in [0.0, 0.5, 7.0]:
        assert BAND.gauge_and_grad(0.0, t) == (0.0, 0.0, 0.0)


@given(s=st.floats(-0.02, 0.02), t=st.floats(-3.0, 3.0), r=st.floats(0.0, 50.0))
@settings(max_examples=300, deadline=None)
def test_band_gauge_homogeneous(s, t, r):
    assert BAND.gauge(r * s, r * t) == pytest.approx(r * BAND.gauge(s, t), rel=1e-10, abs=1e-12)


def test_gauge_gradient_matches_differences(rng):
    worst = 0.0
    for _ in range(500):
        # bias toward the rounded corners where the gradient varies fastest
        s = rng.choice([-1.0, 1.0]) * rng.uniform(0.0, 0.6 * EPS)
        t = rng.uniform(-1.2, 0.2)
        if BAND.gauge(s, t) == 0.0:
            continue
        _, qs, qt = BAND.gauge_and_grad(s, t)
        fs = richardson_diff(lambda u: BAND.gauge(u, t), s, 1e-7)
        ft = richardson_diff(lambda u: BAND.gauge(s, u), t, 1e-5)
        worst = max(worst, abs(qs - fs) / max(1.0, abs(qs)), abs(qt - ft))
    assert worst <= 1e-5


def test_inside_matches_gauge(rng):
    for _ in range(300):
        s, t = rng.uniform(-0.01, 0.01), rng.uniform(-1.5, 1.0)
        q = BAND.gauge(s, t)
        if abs(q - 1.0) > 1e-9:
            assert BAND.inside(s, t) == (q < 1.0)


# planar phi ----------------------------------------------------------------------

@pytest.mark.parametrize("s,t", [(0.0, -1.5), (0.005, -0.3), (-0.02, 0.4), (0.3, -7.0)])
def test_phi_identity_off_band(s, t):
    assert BAND.gauge(s, t) >= 1.0
    assert planar_phi(s, t, EPS) == (s, t)
    assert planar_phi_inverse(s, t, EPS) == pytest.approx((s, t), abs=1e-12)


def test_phi_rejects_half_band():
    with pytest.raises(DomainError):
        planar_phi(0.0, -0.4, EPS)


def test_phi_round_trip(rng):
    worst = 0.0
    for s, t in band_samples(rng, 1000):
        s2, tau = BAND.phi(s, t)
        s3, t3 = BAND.phi_inverse(s2, tau)
        worst = max(worst, abs(s3 - s), abs(t3 - t))
    assert worst <= 1e-9


def test_phi_blows_up_toward_half_band():
    # along the ray through (0, -1) the gauge is -t, so q -> 1/2 as t -> -1/2
    ts = -0.5 - np.geomspace(0.2, 1e-6, 40)
    vals = [BAND.phi(0.0, t)[1] for t in ts]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] > 1e4


@pytest.mark.parametrize("s", [0.0, 0.001, 0.002, 0.0035, 0.0049])
def test_phi_second_coordinate_increasing_on_fibres(s):
    ts = np.linspace(-1.0, 0.5, 3001)
    vals = []
    for t in ts:
        v, dv, _ = BAND.phi2_and_dt(s, t)
        if math.isfinite(v):
            assert dv > 0
            vals.append(v)
    assert np.all(np.diff(vals) > 0)


def test_phi_inverse_partials_match_differences(rng):
    # away from the pole at q_B = 1/2, where the partials diverge
    for s, t in (p for p in band_samples(rng, 200) if BAND.gauge(*p) > 0.6):
        tau = BAND.phi(s, t)[1]
        du_dtau, du_ds = BAND.phi_inverse_partials(s, t)
        ft = richardson_diff(lambda v: BAND.phi2_inverse(s, v), tau, 1e-6)
        fs = richardson_diff(lambda v: BAND.phi2_inverse(v, tau), s, 1e-8)
        assert du_dtau == pytest.approx(ft, rel=1e-5, abs=1e-7)
        assert du_ds == pytest.approx(fs, rel=1e-4, abs=1e-5)


# starlike and cylindrical bodies ---------------------------------------------------

def _weights(idx):
    return 1.0 - 0.5 * np.sin(np.asarray(idx, dtype=float)) ** 2


@pytest.mark.parametrize("body", [StarlikeBody.unit_ball(), StarlikeBody.weighted_ball(_weights)],
                         ids=["ball", "ellipsoid"])
@given(x=sparse_vecs(), r=st.floats(0.0, 100.0))
@settings(max_examples=200, deadline=None)
def test_starlike_gauge_homogeneous(body, x, r):
    assert body(r * x) == pytest.approx(r * body(x), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("body", [StarlikeBody.unit_ball(), StarlikeBody.weighted_ball(_weights)],
                         ids=["ball", "ellipsoid"])
def test_starlike_gradient(body, rng):
    for _ in range(500):
        x = unit_dir(rng) * rng.uniform(0.1, 3.0)
        d = unit_dir(rng)
        fd = directional_diff(body, x, d, 1e-5)
        assert body.grad(x).dot(d) == pytest.approx(fd, abs=1e-8)


def test_cylindrical_body_homogeneous(rng):
    V = CylindricalBody(BAND, 1.0, 2.0)
    apex = 2.0 * Z
    for _ in range(200):
        u = SparseVec.from_dense(rng.standard_normal(6) * [1, 1, 0.01, 0.01, 0.01, 0.01])
        r = rng.uniform(0.0, 5.0)
        assert V.gauge(apex + r * (u - apex)) == pytest.approx(r * V.gauge(u), rel=1e-10, abs=1e-12)


# deleting diffeomorphism ----------------------------------------------------------

def test_identity_far_away(rng):
    for _ in range(100):
        y = unit_dir(rng, 12) * rng.uniform(1.0, 5.0)
        assert DELETER(y) == y
        assert DELETER.inverse(y) == y


def test_identity_on_complement(rng):
    n_tube = 0
    for _ in range(1000):
        y = ball_point(rng, dim=10)
        pt = DELETER._preimage(y)
        if pt is not None:
            n_tube += 1
            if DELETER.psi(pt) < 1.0:
                continue
        assert DELETER(y) == y
    # tube points outside V: thin shell and the stretch t < 1
    for _ in range(300):
        pt = CylPoint(h_vector(rng, rng.uniform(0.5, 0.99) * EPS), rng.uniform(0.05, 14.0))
        if DELETER.psi(pt) >= 1.0:
            y = CHART.pi(pt)
            assert DELETER(y) == y


def test_psi_level_sets():
    assert DELETER.psi(CylPoint(SparseVec(), 1.0)) == pytest.approx(1.0)
    assert DELETER.psi(CylPoint(SparseVec(), 1.5)) == pytest.approx(0.5)
    assert DELETER.in_deleted(DELETER.deleted_center())


def test_round_trip_and_image_avoids_deleted_tube(rng):
    images = []
    for _ in range(200):
        y = CHART.pi(moved_point(rng))
        fy = DELETER(y)
        back = DELETER.inverse(fy)
        assert (back - y).norm() <= 1e-7
        pt = CHART.pi_inverse(fy)
        assert DELETER.psi(pt) > 0.5
        assert not DELETER.in_deleted(fy)
        images.append(fy.to_dense(12))
    images = np.array(images)
    gaps = [np.linalg.norm(images[i] - images[j]) for i in range(len(images)) for j in range(i)]
    assert min(gaps) > 0


def test_inverse_rejects_deleted_tube():
    with pytest.raises(DomainError):
        DELETER.inverse(DELETER.deleted_center())
    with pytest.raises(DomainError):
        DELETER.h_inverse(SparseVec(), -0.4)


def test_h_map_round_trip(rng):
    for _ in range(300):
        x = h_vector(rng, rng.uniform(0.0, EPS))
        t = rng.uniform(-2.0, 2.0)
        x2, u = DELETER.h_map(x, t)
        assert DELETER.band.gauge(x2.norm(), u) > 0.5
        x3, t3 = DELETER.h_inverse(x2, u)
        assert x3 == x and t3 == pytest.approx(t, abs=1e-8)


def test_seam_continuity(rng):
    for _ in range(100):
        r = rng.uniform(0.0, EPS / 4)
        x = h_vector(rng, r)
        # the floor of V sits at t = 1
        lo, hi = CylPoint(x, 1.0 - 1e-9), CylPoint(x, 1.0 + 1e-9)
        ylo, yhi = CHART.pi(lo), CHART.pi(hi)
        assert (DELETER(ylo) - DELETER(yhi)).norm() <= (ylo - yhi).norm() + 1e-7
        d = unit_dir(rng)
        jlo = DELETER.jacobian(ylo).apply(d)
        jhi = DELETER.jacobian(yhi).apply(d)
        assert (jlo - jhi).norm() <= 1e-4


def test_jacobian_matches_differences(rng):
    # entries reach ~2e3 inside the thin tube, so the base step is kept short
    worst = 0.0
    for _ in range(30):
        y = CHART.pi(moved_point(rng))
        d = unit_dir(rng)
        an = DELETER.jacobian(y).apply(d).to_dense(12)
        fd = directional_diff(lambda u: DELETER(u).to_dense(12), y, d, 1e-7)
        worst = max(worst, float(np.max(np.abs(an - fd)) / max(1.0, np.max(np.abs(an)))))
    assert worst <= 1e-7


# toolkit --------------------------------------------------------------------------

def test_translated_tube_fits_in_ball():
    assert KIT.moved_radius < 1.0
    assert KIT.f(SparseVec()).norm() > 0


def test_bump_vanishes_off_body(rng):
    for _ in range(100):
        x = unit_dir(rng) * rng.uniform(1.0, 3.0)
        val, g = KIT.bump(x)
        assert val == 0.0 and g.norm() == 0.0


def test_bump_gradient_nonzero_inside(rng):
    for _ in range(1000):
        x = ball_point(rng, rmax=0.999)
        val, g = KIT.bump(x)
        assert val > 0 and g.norm() > 0


def test_bump_gradient_fades_at_boundary(rng):
    x = unit_dir(rng)
    norms = [KIT.bump(x * (1.0 - h))[1].norm() for h in (1e-1, 1e-2, 1e-3)]
    assert norms[0] > norms[1] > norms[2]
    assert KIT.bump(x)[0] == 0.0


def test_retract(rng):
    for _ in range(1000):
        x = ball_point(rng)
        assert KIT.retract(x).norm() == pytest.approx(1.0, abs=1e-9)
    for _ in range(100):
        x = unit_dir(rng)
        assert (KIT.retract(x) - x).norm() <= 1e-10
    r0 = KIT.retract(SparseVec())
    assert r0.norm() == pytest.approx(1.0)


def test_retract_rejects_outside():
    with pytest.raises(ValueError):
        KIT.retract(SparseVec([0], [1.5]))


def test_fixed_point_free(rng):
    gaps = [(KIT.fixed_point_free(x) - x).norm() for x in (ball_point(rng) for _ in range(2000))]
    assert min(gaps) > 0


def test_homotopy_ends(rng):
    r0 = KIT.retract(SparseVec())
    for _ in range(50):
        x = unit_dir(rng)
        assert (KIT.homotopy(0.0, x) - x).norm() <= 1e-9
        assert (KIT.homotopy(1.0, x) - r0).norm() <= 1e-9
        assert KIT.homotopy(0.4, x).norm() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("t,x", [(-0.1, SparseVec([0], [1.0])), (1.2, SparseVec([0], [1.0])),
                                 (0.5, SparseVec([0], [0.5]))])
def test_homotopy_domain(t, x):
    with pytest.raises(ValueError):
        KIT.homotopy(t, x)


def test_bump_gradient_matches_differences(rng):
    worst = 0.0
    for i in range(60):
        if i % 2:
            x = ball_point(rng, rmax=0.99)
        else:
            x = CHART.pi(moved_point(rng)) - KIT.d0
        d = unit_dir(rng)
        fd = directional_diff(lambda u: KIT.bump(u)[0], x, d, 1e-6 if i % 2 else 1e-7)
        g = KIT.bump(x)[1].dot(d)
        worst = max(worst, abs(g - fd) / max(1.0, abs(g)))
    assert worst <= 1e-7
