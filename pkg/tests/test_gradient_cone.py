import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubelab.checks import directional_diff
from tubelab.gradient_cone import (
    BlockFunctionalU, BlockSpace, BlockSum, SubspaceAvoidingBump, TwoFactorBump, cone_certificate,
)
from tubelab.seq_space import SparseVec

EPS = 0.1
BS = BlockSum(EPS)
U = BS.U


def random_x(rng, dim=30, scale=None):
    """Vectors with mixed coordinate sizes, norms roughly spanning [0, 10]."""
    s = rng.uniform(0.0, 3.0) if scale is None else scale
    return SparseVec.from_dense(rng.standard_normal(dim) * s * rng.uniform(0, 1, dim) ** 3)


def unit_dir(rng, dim):
    d = SparseVec.from_dense(rng.standard_normal(dim))
    return d / d.norm()


# block space -------------------------------------------------------------------------

def test_block_map_round_trip():
    k = np.arange(5000)
    n, j = BlockSpace.block_of_index(k)
    assert np.array_equal(BlockSpace.index_of(n, j), k)
    assert n.min() == 1


@given(n=st.integers(1, 30), j=st.integers(0, 10 ** 6))
def test_block_map_inverse(n, j):
    k = int(BlockSpace.index_of(n, j))
    assert tuple(int(a) for a in BlockSpace.block_of_index(k)) == (n, j)


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_every_block_infinite(n):
    idx = BlockSpace.index_of(n, np.arange(100))
    assert np.all(np.diff(idx) > 0)
    assert np.all(BlockSpace.block_of_index(idx)[0] == n)


def test_block_map_rejects_bad_input():
    with pytest.raises(ValueError):
        BlockSpace.block_of_index(-1)
    with pytest.raises(ValueError):
        BlockSpace.index_of(0, 3)


def test_split_and_embed(rng):
    x = random_x(rng)
    parts = BlockSpace.split(x)
    back = SparseVec.combine((1.0, BlockSpace.embed(n, v)) for n, v in parts.items())
    assert back == x


# U -------------------------------------------------------------------------------------

def test_U_rejects_bad_epsilon():
    for e in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            BlockFunctionalU(e)


@pytest.mark.parametrize("shell", [0.0, 0.5, 1.0, 2.0])
def test_U_bounds_on_shells(shell, rng):
    for _ in range(50):
        x = unit_dir(rng, 8) * (shell * EPS * rng.uniform(0.98, 1.02))
        u, g = U.value_and_grad(x)
        r2 = x.norm2()
        assert EPS ** 2 <= u
        assert r2 <= u <= 2 * EPS ** 2 + r2
        assert g.norm() > 0
        if x.norm() >= EPS:
            assert u == pytest.approx(EPS ** 2 + r2, rel=1e-15)


def test_U_bounds_sweep(rng):
    for _ in range(1000):
        x = unit_dir(rng, 8) * (EPS * rng.uniform(0.0, 3.0))
        u, g = U.value_and_grad(x)
        assert max(EPS ** 2, x.norm2()) <= u <= 2 * EPS ** 2 + x.norm2()
        assert g.norm() > 0


def test_U_gradient_at_zero_nonzero():
    assert U.at_zero[1].norm() > 0


# f, psi, b -----------------------------------------------------------------------------

def test_f_at_zero():
    val, g = BS.f(SparseVec())
    assert val == pytest.approx(U.at_zero[0] / 3.0, rel=1e-15)
    assert EPS ** 2 / 3 <= val <= 2 * EPS ** 2 / 3
    assert g.block_norm(1) > 0 and g.block_norm(40) > 0
    assert g.norm() == pytest.approx(U.at_zero[1].norm() / math.sqrt(3.0))


def test_f_single_block():
    x1 = SparseVec([0, 2], [0.3, -0.4])  # block 1, entries 0 and 1
    assert BlockSpace.top_block(x1) == 1
    val, _ = BS.f(x1)
    assert 2 * x1.norm() >= EPS
    expected = (EPS ** 2 / 4 + x1.norm2()) + U.at_zero[0] * (1.0 / 3.0 - 0.25)
    assert val == pytest.approx(expected, rel=1e-14)


def test_f_bounds_and_tail(rng):
    for _ in range(1000):
        x = random_x(rng)
        val, _ = BS.f(x)
        r2 = x.norm2()
        assert max(EPS ** 2 / 3, r2) <= val <= 2 * EPS ** 2 / 3 + r2 + 1e-15
        assert val == pytest.approx(BS.f_brute(x, 60), abs=1e-12)


def test_psi_approximates_norm(rng):
    for _ in range(1000):
        x = random_x(rng, scale=rng.uniform(0.0, 6.0))
        val, g = BS.psi(x)
        assert 0.0 <= val - x.norm() <= 2 * EPS / math.sqrt(3.0)
        assert g.norm() > 0
    p0 = BS.psi(SparseVec())[0]
    assert EPS / math.sqrt(3) <= p0 <= EPS * math.sqrt(2.0 / 3.0)


@pytest.mark.parametrize("which", ["f", "psi", "bump"])
def test_gradients_match_differences(which, rng):
    fn = getattr(BS, which)
    worst = 0.0
    for _ in range(60):
        x = random_x(rng, scale=rng.uniform(0.0, 0.6))
        d = unit_dir(rng, 40)
        _, g = fn(x)
        # short base step: blocks near 0 sit in the steep part of the deleting map
        fd = directional_diff(lambda u: fn(u)[0], x, d, 1e-7)
        worst = max(worst, abs(g.dot(d) - fd))
    assert worst <= 1e-6


def test_gradient_dot_sees_tail_blocks():
    g = BS.f(SparseVec([0], [0.2]))[1]
    far = BlockSpace.embed(9, SparseVec([0, 1], [1.0, 1.0]))
    assert g.dot(far) == pytest.approx(2.0 ** -9 * U.at_zero[1].dot(SparseVec([0, 1], [1.0, 1.0])))
    assert g.truncate(12).norm() <= g.norm()


def test_bump_support(rng):
    assert BS.bump(SparseVec())[0] > 0
    for _ in range(200):
        x = unit_dir(rng, 20) * rng.uniform(1.0, 5.0)
        val, g = BS.bump(x)
        assert val == 0.0 and g.norm() == 0.0


def test_bump_gradient_nonzero_where_slope_is(rng):
    for _ in range(300):
        x = random_x(rng, scale=rng.uniform(0.0, 0.5))
        val, g = BS.bump(x)
        if val > 0 and BS.theta.deriv(BS.f(x)[0]) != 0:
            assert g.norm() > 0


def test_bump_rejects_large_epsilon():
    class Loose(BlockFunctionalU):
        def __init__(self):
            self.epsilon = 1.5
    with pytest.raises(ValueError):
        BlockSum(U=Loose()).bump(SparseVec())


# cone certificate -------------------------------------------------------------------

def test_cone_certificate_random(rng):
    cert = cone_certificate(BS, [random_x(rng) for _ in range(300)])
    assert cert.ok and cert.samples == 300
    assert cert.to_dict()["min_block_norm"] == cert.min_block_norm


def test_cone_certificate_at_zero():
    cert = BS.cone_certificate([SparseVec()])
    g0 = U.at_zero[1].norm()
    assert cert.min_block_norm == pytest.approx(g0 / 8.0)  # blocks 1..3 checked


def test_cone_certificate_plateau_block():
    # blocks landing exactly on the sphere where the deleting map stops acting
    r = EPS * U.phi.moved_radius
    x = SparseVec.combine([(1.0, BlockSpace.embed(1, SparseVec([0], [r / 2]))),
                           (1.0, BlockSpace.embed(3, SparseVec([2], [r / 8])))])
    assert BS.cone_certificate([x]).ok


def test_cone_certificate_needs_samples():
    with pytest.raises(ValueError):
        BS.cone_certificate([])


def test_lipschitz_report():
    rep = BS.lipschitz_report(pairs=30, seed=2)
    assert rep["ok"]


# product bumps --------------------------------------------------------------------------

W = [SparseVec([0], [1.0]), SparseVec([1, 3], [0.5, 1.0])]
SUB = SubspaceAvoidingBump(W)
TWO = TwoFactorBump()


def test_subspace_rejects_dependent_basis():
    with pytest.raises(ValueError):
        SubspaceAvoidingBump([SparseVec([0], [1.0]), SparseVec([0], [2.0])])
    with pytest.raises(ValueError):
        SubspaceAvoidingBump([])


def test_subspace_coordinates_are_isometric(rng):
    for _ in range(50):
        x = SparseVec.from_dense(rng.standard_normal(12))
        y, z = SUB.to_coords(x)
        assert y.norm() ** 2 + z @ z == pytest.approx(x.norm2())
        assert (SUB.from_coords(y, z) - x).norm() <= 1e-14
        # the Z coordinates see only span W
        proj = SUB.from_coords(SparseVec(), z)
        for w in W:
            assert (x - proj).dot(w) == pytest.approx(0.0, abs=1e-13)


def test_subspace_zero_branch():
    val, g = SUB(SparseVec([5], [3.0]))
    assert val == 0.0 and g.nnz == 0


def test_subspace_gradient_avoids_W(rng):
    for x in SUB.sample_support(300, seed=1):
        val, g = SUB(x)
        assert val > 0
        assert SUB.complement_part(g).norm() > 1e-12


def test_subspace_e0(rng):
    sb = SubspaceAvoidingBump([SparseVec([0], [1.0])])
    for x in sb.sample_support(100, seed=5):
        val, g = sb(x)
        assert val > 0 and g.select(lambda k: k != 0).norm() > 0


def test_subspace_gradient_matches_differences(rng):
    for x in SUB.sample_support(30, seed=3):
        d = unit_dir(rng, x.max_index + 3)
        fd = directional_diff(lambda u: SUB(u)[0], x, d, 1e-5)
        assert SUB(x)[1].dot(d) == pytest.approx(fd, abs=1e-5)


def test_two_factor_split_join(rng):
    x = SparseVec.from_dense(rng.standard_normal(15))
    assert TWO.join(*TWO.split(x)) == x


def test_two_factor_zero_off_support():
    assert TWO(SparseVec([0, 1], [2.0, 0.0])) == (0.0, SparseVec())


def test_two_factor_both_parts_nonzero():
    for x in TWO.sample_support(100, seed=2):
        val, g = TWO(x)
        g1, g2 = TWO.split(g)
        assert val > 0 and g1.norm() > 1e-12 and g2.norm() > 1e-12


def test_two_factor_gradient_matches_differences(rng):
    for x in TWO.sample_support(25, seed=4):
        d = unit_dir(rng, x.max_index + 3)
        fd = directional_diff(lambda u: TWO(u)[0], x, d, 1e-5)
        assert TWO(x)[1].dot(d) == pytest.approx(fd, abs=1e-5)
