import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from evreg import EULER, EvregError, GumbelParams, Tail
from evreg import evd


def test_log_density_standard_point():
    p = GumbelParams(mu=0.0, sigma=1.0, tail=Tail.MAX)
    assert evd.log_density(0.0, p) == pytest.approx(-1.0, abs=1e-15)


def test_log_density_at_mu_any_sigma():
    p = GumbelParams(mu=3.7, sigma=2.5, tail=Tail.MAX)
    assert evd.log_density(3.7, p) == pytest.approx(-np.log(2.5) - 1.0, abs=1e-14)


def test_density_integrates_to_one():
    p = GumbelParams(mu=0.3, sigma=2.1, tail=Tail.MAX)
    val, _ = integrate.quad(lambda y: np.exp(evd.log_density(y, p)), -40.0, 40.0,
                            limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_density_integrates_to_one_random_params():
    rng = np.random.default_rng(7)
    for _ in range(20):
        mu = float(rng.uniform(-3, 3))
        sigma = float(rng.uniform(0.2, 4.0))
        tail = Tail.MAX if rng.random() < 0.5 else Tail.MIN
        p = GumbelParams(mu=mu, sigma=sigma, tail=tail)
        lo, hi = mu - 45 * sigma, mu + 45 * sigma
        val, _ = integrate.quad(lambda y: np.exp(evd.log_density(y, p)), lo, hi,
                                limit=300)
        assert val == pytest.approx(1.0, abs=1e-8)


def test_cdf_quantile_examples():
    p = GumbelParams(mu=1.5, sigma=0.7, tail=Tail.MAX)
    assert evd.cdf(1.5, p) == pytest.approx(np.exp(-1.0), abs=1e-14)
    assert evd.quantile(np.exp(-1.0), p) == pytest.approx(1.5, abs=1e-12)


def test_quantile_domain_error():
    p = GumbelParams(mu=0.0, sigma=1.0)
    with pytest.raises(EvregError):
        evd.quantile(0.0, p)
    with pytest.raises(EvregError):
        evd.quantile(1.0, p)


def test_invalid_params_rejected():
    with pytest.raises(EvregError):
        GumbelParams(mu=0.0, sigma=0.0)
    with pytest.raises(EvregError):
        GumbelParams(mu=np.inf, sigma=1.0)
    with pytest.raises(EvregError):
        evd.log_density(np.nan, GumbelParams(mu=0.0, sigma=1.0))


@given(st.floats(-30, 30), st.floats(0.05, 20),
       st.sampled_from([Tail.MAX, Tail.MIN]),
       st.floats(1e-4, 1 - 1e-4))
@settings(max_examples=200, deadline=None)
def test_quantile_cdf_roundtrip(mu, sigma, tail, u):
    p = GumbelParams(mu=mu, sigma=sigma, tail=tail)
    y = evd.quantile(u, p)
    assert evd.cdf(y, p) == pytest.approx(u, abs=1e-10)
    assert evd.quantile(evd.cdf(y, p), p) == pytest.approx(y, rel=1e-10, abs=1e-10)


def test_cdf_monotone():
    p = GumbelParams(mu=-1.0, sigma=1.7, tail=Tail.MIN)
    ys = np.linspace(-30, 30, 500)
    vals = evd.cdf(ys, p)
    assert np.all(np.diff(vals) >= 0)


def test_moments():
    p = GumbelParams(mu=0.0, sigma=1.0, tail=Tail.MAX)
    assert evd.mean(p) == pytest.approx(EULER, abs=1e-15)
    assert evd.variance(p) == pytest.approx(np.pi**2 / 6, abs=1e-15)
    pm = GumbelParams(mu=0.0, sigma=1.0, tail=Tail.MIN)
    assert evd.mean(pm) == pytest.approx(-EULER, abs=1e-15)
    assert evd.variance(pm) == evd.variance(p)
    assert evd.mean(GumbelParams(mu=2.0, sigma=3.0)) == pytest.approx(2 + 3 * EULER)


def test_sample_moments_match():
    rng = np.random.default_rng(123)
    p = GumbelParams(mu=0.0, sigma=1.0, tail=Tail.MAX)
    draws = evd.sample(rng, p, size=1_000_000)
    se_mean = np.sqrt(evd.variance(p) / draws.size)
    assert abs(draws.mean() - evd.mean(p)) < 3 * se_mean
    # variance of the sample variance for the Gumbel via fourth-moment bound
    var = evd.variance(p)
    se_var = np.sqrt((draws.var(ddof=1) ** 2) * 2.4 / draws.size) * 3
    assert abs(draws.var(ddof=1) - var) < max(3 * se_var, 0.01)


def test_reflect():
    p = GumbelParams(mu=1.5, sigma=2.0, tail=Tail.MIN)
    r = evd.reflect(p)
    assert (r.mu, r.sigma, r.tail) == (-1.5, 2.0, Tail.MAX)
    p0 = GumbelParams(mu=0.0, sigma=1.0, tail=Tail.MAX)
    assert evd.reflect(p0).tail is Tail.MIN
    assert evd.reflect(evd.reflect(p)) == p


def test_reflect_density_identity():
    rng = np.random.default_rng(5)
    p = GumbelParams(mu=0.8, sigma=1.3, tail=Tail.MIN)
    r = evd.reflect(p)
    ys = rng.normal(scale=5.0, size=100)
    for y in ys:
        assert evd.log_density(y, p) == pytest.approx(evd.log_density(-y, r), abs=1e-14)
