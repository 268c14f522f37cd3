import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sigff.errors import DomainError, NumericError
from sigff.sampler import GaussianLaw, RngStream, condition_gaussian, factorize, gaussian_sample

from conftest import SEED, empirical_cov_check


def random_cov(rng, n, rank=None):
    A = rng.standard_normal((n, rank or n))
    return A @ A.T + (0 if rank else 0.1) * np.eye(n)


def test_stream_determinism():
    a = RngStream(SEED, ("x", 1)).normal(100)
    b = RngStream(SEED, ("x", 1)).normal(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, RngStream(SEED, ("x", 2)).normal(100))
    assert np.array_equal(RngStream(SEED).child("x", 1).normal(100), a)


def test_stream_independent_of_creation_order():
    RngStream(SEED, ("other",)).normal(10)
    first = RngStream(SEED, ("y",)).normal(5)
    assert np.array_equal(first, RngStream(SEED, ("y",)).normal(5))


def test_distinct_paths_uncorrelated():
    a = RngStream(SEED, ("p", 0)).normal(20_000)
    b = RngStream(SEED, ("p", 1)).normal(20_000)
    assert abs(np.corrcoef(a, b)[0, 1]) <= 5 / math.sqrt(20_000)


def test_stream_rejects_bad_seed():
    with pytest.raises(DomainError):
        RngStream(-1)


def test_zero_covariance_returns_mean(stream):
    law = GaussianLaw(np.array([1.0, -2.0]), np.zeros((2, 2)))
    assert np.array_equal(gaussian_sample(law, stream), law.mean)


def test_scalar_variance_four(stream):
    x = gaussian_sample(GaussianLaw([0.0], [[4.0]]), stream, size=10_000)[:, 0]
    s = x.std(ddof=1)
    # SE of the sample std for Gaussian data is about sigma / sqrt(2 n)
    assert abs(s - 2.0) <= 5 * 2.0 / math.sqrt(2 * len(x))


def test_empirical_covariance(stream):
    cov = random_cov(np.random.default_rng(1), 4)
    draws = gaussian_sample(GaussianLaw.centred(cov), stream, size=10_000)
    assert empirical_cov_check(draws, cov) <= 5.0


def test_sample_determinism():
    law = GaussianLaw.centred(random_cov(np.random.default_rng(2), 3))
    a = gaussian_sample(law, RngStream(SEED, ("g",)), size=7)
    b = gaussian_sample(law, RngStream(SEED, ("g",)), size=7)
    assert a.tobytes() == b.tobytes()


def test_factorize_singular_and_indefinite():
    cov = random_cov(np.random.default_rng(3), 5, rank=2)
    F, _ = factorize(cov)
    assert np.allclose(F @ F.T, cov, atol=1e-8 * np.abs(cov).max())
    with pytest.raises(NumericError, match="smallest eigenvalue"):
        factorize(np.diag([1.0, -1.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_factor_reproduces_covariance(n, seed):
    cov = random_cov(np.random.default_rng(seed), n)
    F, jitter = factorize(cov)
    rel = np.abs(F @ F.T - cov).max() / np.abs(cov).max()
    assert rel <= 1e-8


def test_law_rejects_asymmetric():
    with pytest.raises(DomainError):
        GaussianLaw.centred([[1.0, 0.5], [0.0, 1.0]])


def test_condition_empty_is_identity():
    law = GaussianLaw.centred(np.eye(2))
    assert condition_gaussian(law, {}) is law


@given(st.floats(-0.95, 0.95), st.floats(-3, 3))
def test_condition_bivariate(rho, y):
    law = GaussianLaw.centred([[1.0, rho], [rho, 1.0]])
    post = condition_gaussian(law, {1: y})
    assert post.mean[0] == pytest.approx(rho * y, abs=1e-12)
    assert post.cov[0, 0] == pytest.approx(1 - rho * rho, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_condition_tower_property(seed):
    rng = np.random.default_rng(seed)
    law = GaussianLaw(rng.standard_normal(5), random_cov(rng, 5))
    obs = {1: float(rng.standard_normal()), 3: float(rng.standard_normal())}
    joint = condition_gaussian(law, obs)
    seq = condition_gaussian(condition_gaussian(law, {1: obs[1]}), {3: obs[3]})
    assert np.abs(joint.mean - seq.mean).max() <= 1e-10
    assert np.abs(joint.cov - seq.cov).max() <= 1e-10
    assert np.all(np.diag(joint.cov) <= np.diag(law.cov) + 1e-12)


def test_condition_errors():
    law = GaussianLaw.centred(np.eye(2))
    with pytest.raises(DomainError):
        condition_gaussian(law, {5: 0.0})
    singular = GaussianLaw.centred(np.zeros((2, 2)))
    with pytest.raises(NumericError):
        condition_gaussian(singular, {0: 1.0})
