import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sigff.coupling import (
    CouplingParams,
    compute_D,
    coupling_cdf,
    estimate_beta_star,
    laplace_prediction,
    region_boxes,
    sample_coupling,
)
from sigff.errors import CalibrationWarning, ConfigurationError, DomainError, StatisticalError
from sigff.fields import VarianceProfile, calibrate_three_field, sample_three_field
from sigff.greenfn import square_green
from sigff.lattice import GridSpec, Region
from sigff.sampler import RngStream

from conftest import SEED

TWO = VarianceProfile.two_scale()
LEFT = Region("left", rect=(0, 0.5, 0, 1))
LOWER_RIGHT = Region("lower-right", rect=(0.5, 1, 0, 0.5))


def params(**kw):
    base = dict(K=4, L=4, Kp=2, Lp=2, gamma=0.4, beta_star=0.3, profile=TWO)
    base.update(kw)
    return CouplingParams(**base)


def rng(*path):
    return RngStream(SEED, ("coupling",) + path)


def test_params_derived_quantities():
    p = params()
    assert p.KL == 16 and p.R == 256
    assert p.kbar == math.log(16)
    assert p.success_probability == pytest.approx(0.3 * math.exp(2 * p.kbar**0.4 + 2 * p.kbar * (0.5 - 1)))
    assert np.allclose(p.coarse_covariance(), 0.5 * square_green(16))


def test_params_validation():
    with pytest.raises(ConfigurationError, match="kbar"):
        params(beta_star=50.0)
    with pytest.raises(ConfigurationError):
        params(gamma=0.5)
    with pytest.raises(ConfigurationError):
        params(K=3)
    with pytest.raises(ConfigurationError):
        params(exponent="triple")
    with pytest.raises(ConfigurationError):
        params(profile=VarianceProfile.homogeneous())


def test_region_boxes():
    idx = region_boxes(LEFT, 4)
    assert sorted(idx.tolist()) == [i1 * 4 + i2 for i1 in range(2) for i2 in range(4)]
    assert sorted(region_boxes(LOWER_RIGHT, 4).tolist()) == [8, 9, 12, 13]
    with pytest.raises(DomainError):
        region_boxes(Region("v", vertices=frozenset({(0, 0)})), 4)


def test_zero_beta_gives_empty_maxima():
    s = sample_coupling(params(beta_star=0.0), [LEFT, LOWER_RIGHT], rng("zero"), size=50)
    assert s.empty.all()
    assert np.isnan(s.values).all()
    assert coupling_cdf(s, [-100.0, -100.0]) == 1.0


def test_exponential_marginal():
    p = params()
    s = sample_coupling(p, [LEFT], rng("Y"), size=200)
    y = s.Y.ravel()
    for x in np.linspace(-p.kbar**p.gamma, 1.0, 8):
        emp = (y >= x).mean()
        ref = math.exp(-2 * (x + p.kbar**p.gamma))
        se = math.sqrt(ref * (1 - ref) / y.size)
        assert abs(emp - ref) <= 5 * max(se, 1e-12)


def test_single_box_convolution_law():
    p = params()
    j = 37
    s = sample_coupling(p, [[j]], rng("conv"), size=20_000, force_on=True)
    g = rng("conv-oracle").generator
    var = p.coarse_covariance()[j, j]
    kb = p.kbar
    oracle = (
        -(kb**p.gamma)
        + g.exponential(0.5, 20_000)
        + 2 * kb * (1 - TWO.sigma2_start)
        + g.normal(0, math.sqrt(var), 20_000)
        - 2 * kb
    )
    assert stats.ks_2samp(s.values[:, 0], oracle).pvalue > 0.01


def test_exchangeable_within_region():
    p = params()
    T = region_boxes(LOWER_RIGHT, 16)
    a = sample_coupling(p, [T], rng("ex"), size=100)
    b = sample_coupling(p, [T[::-1]], rng("ex"), size=100)
    assert np.array_equal(a.values, b.values, equal_nan=True)


def test_D_zero_field():
    p = params()
    sets = [list(range(5)), [10, 11]]
    D = compute_D(np.zeros(p.R), sets, p)
    ref = 16.0 ** (-2 * (1 + TWO.sigma2_start))
    assert D == pytest.approx([5 * ref, 2 * ref], rel=1e-12)
    Dd = compute_D(np.zeros(p.R), sets, params(exponent="double"))
    assert Dd[0] == pytest.approx(5 * 16.0 ** (-4 * (1 + TWO.sigma2_start)), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 255), st.floats(0.01, 2.0))
def test_D_additive_and_increasing(seed, j, bump):
    p = params()
    Z = np.random.default_rng(seed).normal(size=p.R)
    a, b = list(range(0, 40)), list(range(100, 130))
    D = compute_D(Z, [a, b, a + b], p)
    assert D[2] == pytest.approx(D[0] + D[1], rel=1e-12)
    Z2 = Z.copy()
    Z2[j] += bump
    full = list(range(p.R))
    assert compute_D(Z2, [full], p)[0] > compute_D(Z, [full], p)[0]


def test_laplace_prediction_properties():
    p = params()
    Z = sample_coupling(p, [LEFT], rng("lp"), size=500).Z
    D = compute_D(Z, [LEFT, LOWER_RIGHT], p)
    assert laplace_prediction(D, 0.3, [50.0, 50.0]) == pytest.approx(1.0, abs=1e-12)
    xs = np.linspace(-3, 3, 13)
    vals = [laplace_prediction(D, 0.3, [x, 0.0]) for x in xs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        laplace_prediction(D, 0.3, [0.0])


def test_prediction_tracks_empirical_cdf():
    p = params()
    s = sample_coupling(p, [LEFT, LOWER_RIGHT], rng("median"), size=20_000)
    x = np.nanmedian(np.where(s.empty, -np.inf, s.values), axis=0)
    D = compute_D(s.Z, [LEFT, LOWER_RIGHT], p)
    single = laplace_prediction(D, p.beta_star, x)
    double = laplace_prediction(compute_D(s.Z, [LEFT, LOWER_RIGHT], params(exponent="double")), p.beta_star, x)
    emp = coupling_cdf(s, x)
    assert abs(single - emp) <= 0.1
    assert abs(double - emp) > 0.1


def test_beta_estimate_basic():
    p = params(K=2, L=2, Kp=4, Lp=4)
    centre = 2 * math.log(64) * TWO.integral(p.kbar / 6, 1.0)
    g = rng("beta").generator
    m = centre + g.exponential(0.5, 4000) - 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        a = estimate_beta_star(m, p, 64)
        b = estimate_beta_star(np.concatenate([m, centre + g.exponential(0.5, 4000) - 1.0]), p, 64)
    assert a.value > 0
    assert abs(a.value - b.value) <= 3 * math.hypot(a.se, b.se)
    with pytest.raises(StatisticalError):
        estimate_beta_star([], p, 64)


def test_beta_estimate_warns_without_plateau():
    p = params(K=2, L=2, Kp=4, Lp=4)
    m = np.linspace(0, 30, 5000)  # flat law: e^{2z} P grows quickly
    with pytest.warns(CalibrationWarning, match="plateau"):
        est = estimate_beta_star(m, p, 64)
    assert not est.plateau


@pytest.fixture(scope="module")
def fine_box_maxima():
    calib = calibrate_three_field(GridSpec(64), 2, 2, 4, 4, TWO)
    out = []
    for b in range(6):
        S, parts = sample_three_field(calib, rng("fine", b), size=500, parts=True)
        fine = S.heights - parts["coarse"]
        out.append(fine[:, 16:32, 16:32].max(axis=(1, 2)))
    return np.concatenate(out)


def test_beta_estimate_desk_finite(fine_box_maxima):
    p = params(K=2, L=2, Kp=4, Lp=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        est = estimate_beta_star(fine_box_maxima, p, 64)
    assert np.isfinite(est.value) and est.value > 0


@pytest.mark.xfail(strict=True, reason="finite-N tail decays slower than e^{-2z}, so the rescaled values rise with z")
def test_beta_estimate_desk_plateau(fine_box_maxima):
    p = params(K=2, L=2, Kp=4, Lp=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        est = estimate_beta_star(fine_box_maxima, p, 64)
    assert est.per_z.max() <= 1.5 * est.per_z.min()


def test_prediction_error_shrinks_with_KL():
    gaps = []
    for K, L in [(2, 2), (2, 4), (4, 4)]:
        p = params(K=K, L=L)
        s = sample_coupling(p, [LEFT, LOWER_RIGHT], rng("trend", K, L), size=20_000)
        x = np.nanmedian(np.where(s.empty, -np.inf, s.values), axis=0)
        emp = coupling_cdf(s, x)
        pred = laplace_prediction(compute_D(s.Z, [LEFT, LOWER_RIGHT], p), p.beta_star, x)
        gaps.append((abs(pred - emp), math.sqrt(emp * (1 - emp) / 20_000)))
    for (g1, s1), (g2, s2) in zip(gaps, gaps[1:]):
        assert g2 <= g1 + 2 * math.hypot(s1, s2)
