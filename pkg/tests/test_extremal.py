import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sigff.errors import DomainError
from sigff.extremal import (
    extremal_process,
    full_process,
    joint_region_maxima,
    level_set,
    local_max_mask,
    local_maxima,
    m_centering,
    m_kt,
    pairing,
    superpose,
)
from sigff.fields import VarianceProfile, sample_inhomogeneous
from sigff.lattice import GridSpec, Region
from sigff.sampler import RngStream

from conftest import SEED

TWO = VarianceProfile.two_scale()
HOM = VarianceProfile.homogeneous()
fields8 = arrays(np.float64, (8, 8), elements=st.floats(-5, 5, allow_nan=False))


def gaussian_field(N=32, path="f"):
    return sample_inhomogeneous(GridSpec(N), TWO, RngStream(SEED, ("extremal", path))).heights


def test_centering_values():
    assert round(m_centering(16), 4) == 5.2902
    assert round(m_centering(256), 4) == 10.6621
    assert m_centering(16) == 2 * math.log(16) - 0.25 * math.log(math.log(16))


def test_centering_increasing_and_domain():
    vals = [m_centering(n) for n in range(8, 400)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        m_centering(2)


def test_m_kt_examples():
    N, n = 64, 6
    assert m_kt(N, 0, n, TWO) == pytest.approx(2 * math.log(N) - 0.25 * math.log(n), abs=1e-12)
    assert m_kt(N, 0, n / 2, HOM) == pytest.approx(math.log(N) - math.log(n) / 8, abs=1e-12)
    with pytest.raises(DomainError):
        m_kt(N, 3, 2, TWO)


@given(st.floats(0, 6), st.floats(0, 6), st.floats(0, 6), st.floats(0, 4))
def test_m_kt_monotone_in_t(k, a, b, lbar):
    lo, hi = sorted((a, b))
    if k > lo:
        return
    assert m_kt(64, k, lo, TWO, lbar) <= m_kt(64, k, hi, TWO, lbar) + 1e-12


def test_local_maxima_spike_and_constant():
    h = np.zeros((16, 16))
    h[5, 9] = 3.0
    # flat zeros tie with their neighbours and qualify too; the spike is the
    # only maximum above the background, and the only one once the ball
    # covers the grid
    for r in (1, 3, 8):
        assert [v for v, x in local_maxima(h, r) if x > 0] == [(5, 9)]
    assert local_maxima(h, 30) == [((5, 9), 3.0)]
    assert local_max_mask(np.ones((6, 6)), 2).all()
    with pytest.raises(DomainError):
        local_max_mask(h, 0)


def test_local_maxima_brute_force_and_argmax():
    h = gaussian_field(16)
    for r in (1, 2, 3):
        mask = local_max_mask(h, r)
        brute = np.zeros_like(mask)
        for a in range(16):
            for b in range(16):
                nb = [h[a + x, b + y] for x in range(-r, r + 1) for y in range(-r, r + 1)
                      if abs(x) + abs(y) <= r and 0 <= a + x < 16 and 0 <= b + y < 16]
                brute[a, b] = h[a, b] >= max(nb)
        assert np.array_equal(mask, brute)
        assert mask[np.unravel_index(h.argmax(), h.shape)]


@settings(max_examples=40, deadline=None)
@given(fields8, st.integers(1, 3), st.integers(0, 3))
def test_local_maxima_antitone_in_r(h, r, extra):
    assert not np.any(local_max_mask(h, r + extra) & ~local_max_mask(h, r))


@settings(max_examples=40, deadline=None)
@given(fields8, st.integers(1, 3))
def test_local_maxima_separated(h, r):
    h = h + np.arange(64).reshape(8, 8) * 1e-9  # break ties
    verts = np.argwhere(local_max_mask(h, r))
    for i in range(len(verts)):
        for j in range(i + 1, len(verts)):
            assert np.abs(verts[i] - verts[j]).sum() > r


def test_extremal_process_single_spike():
    N = 16
    h = np.zeros((N, N))
    h[7, 7] = m_centering(N) + 1.0
    pp = extremal_process(h, 2 * N)
    assert len(pp) == 1
    assert pp.heights[0] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(pp.positions[0], [7 / 16, 7 / 16])


def test_extremal_process_window_counts():
    h = gaussian_field()
    pp = extremal_process(h, 2)
    N = 32
    A = (0.25, 0.75)
    count = sum(1 for x, hh in zip(pp.positions, pp.heights)
                if A[0] < x[0] < A[1] and A[0] < x[1] < A[1] and -2 <= hh < 0)
    indicator = lambda x, hh: ((x[:, 0] > A[0]) & (x[:, 0] < A[1]) & (x[:, 1] > A[0])
                               & (x[:, 1] < A[1]) & (hh >= -2) & (hh < 0)).astype(float)
    assert pairing(pp, indicator) == count
    mask = local_max_mask(h, 2)
    gamma = level_set(h, 1.5)
    band = int(np.sum(pp.heights >= -1.5))
    assert band == sum(1 for v in gamma if mask[v])
    assert np.sum(mask) == len(pp)


def test_pairing_two_routes():
    h = gaussian_field(path="pair")
    pp = extremal_process(h, 1)
    f = lambda x, hh: np.exp(hh) * np.sin(np.pi * x[:, 0]) ** 2
    mask = local_max_mask(h, 1)
    N = h.shape[0]
    g = np.indices((N, N)).transpose(1, 2, 0) / N
    grid = np.exp(h - m_centering(N)) * np.sin(np.pi * g[..., 0]) ** 2
    assert pairing(pp, f) == pytest.approx(float(np.sum(grid * mask)), abs=1e-12)
    empty = extremal_process(np.zeros((4, 4)) - np.eye(4), 1)
    assert pairing(type(empty)(4, 1, 0.0, np.zeros((0, 2), int), np.zeros(0), np.zeros(0, bool)), f) == 0.0


def test_full_process_and_superpose():
    h = gaussian_field(path="full")
    cs = full_process(h, 3, 2)
    assert np.all(cs.theta[:, 0] == 0)
    ok = ~np.isnan(cs.theta)
    assert np.all(cs.theta[ok] >= 0)
    sp = superpose(cs)
    assert len(sp) == int(ok.sum())
    parent = np.repeat(cs.process.heights, ok.sum(axis=1))
    assert np.all(sp.heights <= parent)
    with pytest.raises(DomainError):
        full_process(h, 2, 3)


def test_superpose_flat_window():
    h = np.full((9, 9), -50.0)
    h[3:6, 3:6] = 0.0
    h[4, 4] = 0.0
    cs = full_process(h, 1, 1, centering=0.0)
    # pick the central atom, whose flat window holds 2j^2 + 2j + 1 = 5 equal heights
    keep = [i for i, v in enumerate(cs.process.vertices.tolist()) if v == [4, 4]]
    sp = superpose(type(cs)(
        type(cs.process)(9, 1, 0.0, cs.process.vertices[keep], cs.process.heights[keep], cs.process.clipped[keep]),
        cs.offsets, cs.theta[keep]))
    assert len(sp) == 5 and np.all(sp.heights == 0.0)


def test_full_process_clipping():
    h = np.full((8, 8), -1.0)
    h[0, 0] = 1.0
    cs = full_process(h, 2, 2)
    i = cs.process.vertices.tolist().index([0, 0])
    assert cs.process.clipped[i]
    assert np.isnan(cs.theta[i]).any()


def test_level_set_examples():
    h = gaussian_field(path="level")
    N = 32
    assert level_set(h, -(h.max() - m_centering(N)) - 1) == frozenset()
    assert level_set(h, m_centering(N)) == frozenset(map(tuple, np.argwhere(h >= 0).tolist()))


@settings(max_examples=40, deadline=None)
@given(fields8, st.floats(-5, 10), st.floats(-5, 10))
def test_level_set_monotone(h, a, b):
    lo, hi = sorted((a, b))
    assert level_set(h, lo) <= level_set(h, hi)


def test_joint_region_maxima():
    h = gaussian_field(path="joint")
    N = 32
    whole = joint_region_maxima(h, [Region("all", rect=(-0.1, 1.1, -0.1, 1.1))])
    assert whole[0] == pytest.approx(h.max() - m_centering(N))
    regs = [Region("a", rect=(0, 0.5, 0, 1)), Region("b", rect=(0.5, 1, 0, 0.5))]
    vals = joint_region_maxima(h, regs)
    assert np.all(vals <= whole[0])
    assert np.array_equal(joint_region_maxima(h, regs[::-1]), vals[::-1])
    empty = joint_region_maxima(h, [Region("tiny", rect=(0.001, 0.002, 0.001, 0.002))])
    assert np.isnan(empty[0])
    with pytest.raises(DomainError):
        joint_region_maxima(h, [regs[0], Region("c", rect=(0.25, 0.75, 0, 1))])
