import numpy as np
import pytest
from scipy import special

from evreg import EULER, Dataset, EvaluationError, GumbelParams, ModelSpec, Tail, parse_formula
from evreg import evd
from evreg.inference import GAMMA_D2_AT_2, gamma_d1, gamma_d2, prepare


def intercept_model(link="identity"):
    return ModelSpec(tail=Tail.MAX, location=parse_formula("1"),
                     dispersion=parse_formula("1"), dispersion_link=link)


def random_dataset(rng, n, positive=False):
    lo = 0.05 if positive else -0.5
    return Dataset(response=rng.normal(1.0, 1.0, n),
                   covariates={c: rng.uniform(lo, 0.9, n)
                               for c in ("x1", "x2", "x3", "x4", "z1", "z2")})


MODEL_SHAPES = [
    # linear homoskedastic
    (ModelSpec(tail=Tail.MAX, location=parse_formula("1 + x1 + x2 + x3 + x4"),
               dispersion=parse_formula("1"), dispersion_link="identity"), False),
    # linear heteroskedastic with log dispersion
    (ModelSpec(tail=Tail.MAX, location=parse_formula("1 + x1 + x2 + x3"),
               dispersion=parse_formula("1 + z1 + z2"), dispersion_link="log"), False),
    # nonlinear location
    (ModelSpec(tail=Tail.MAX, location=parse_formula("1 + x1 + pow(x2)"),
               dispersion=parse_formula("1"), dispersion_link="identity"), True),
]


def theta_for(model, rng):
    beta = rng.uniform(-0.8, 0.8, model.k)
    if model.dispersion_link == "identity":
        gamma = np.concatenate([[rng.uniform(0.6, 1.6)], rng.uniform(-0.1, 0.1, model.m - 1)])
    else:
        gamma = np.concatenate([[rng.uniform(-0.3, 0.5)], rng.uniform(-0.2, 0.2, model.m - 1)])
    return np.concatenate([beta, gamma])


def test_special_function_derivatives():
    # finite differences of the gamma function itself
    for x in (1.3, 2.0, 2.7):
        h = 1e-6
        fd1 = (special.gamma(x + h) - special.gamma(x - h)) / (2 * h)
        fd2 = (special.gamma(x + h) - 2 * special.gamma(x) + special.gamma(x - h)) / h**2
        assert gamma_d1(x) == pytest.approx(fd1, rel=1e-8)
        assert gamma_d2(x) == pytest.approx(fd2, rel=1e-3)
    assert GAMMA_D2_AT_2 == pytest.approx((1 - EULER) ** 2 + special.polygamma(1, 2.0),
                                          abs=1e-14)
    assert EULER == pytest.approx(-special.digamma(1.0), abs=1e-15)


def test_loglik_single_observation():
    data = Dataset(response=np.array([5.0, 5.0, 5.0]), covariates={})
    prep = prepare(intercept_model(), data)
    # y == mu, sigma == 1: each term contributes -1
    assert prep.loglik(np.array([5.0, 1.0])) == pytest.approx(-3.0, abs=1e-14)


def test_loglik_matches_density_sum():
    rng = np.random.default_rng(4)
    for model, positive in MODEL_SHAPES:
        data = random_dataset(rng, 25, positive=positive)
        prep = prepare(model, data)
        theta = theta_for(model, rng)
        c = prep._components(theta)
        direct = sum(evd.log_density(y, GumbelParams(mu=m, sigma=s, tail=Tail.MAX))
                     for y, m, s in zip(prep.y, c["mu"], c["sigma"]))
        assert prep.loglik(theta) == pytest.approx(direct, abs=1e-12)


def test_loglik_min_tail_matches_density_sum():
    rng = np.random.default_rng(9)
    data = Dataset(response=rng.normal(size=10), covariates={"x1": rng.uniform(-1, 1, 10)})
    model = ModelSpec(tail=Tail.MIN, location=parse_formula("1 + x1"),
                      dispersion=parse_formula("1"), dispersion_link="identity")
    prep = prepare(model, data)
    theta = np.array([0.3, -0.2, 1.4])
    mu = 0.3 - 0.2 * data.column("x1")
    direct = sum(evd.log_density(y, GumbelParams(mu=m, sigma=1.4, tail=Tail.MIN))
                 for y, m in zip(data.response, mu))
    assert prep.loglik(theta) == pytest.approx(direct, abs=1e-12)


def test_invalid_sigma_raises():
    data = Dataset(response=np.array([0.0, 1.0, 2.0]), covariates={})
    prep = prepare(intercept_model(), data)
    with pytest.raises(EvaluationError):
        prep.loglik(np.array([0.0, -1.0]))
    assert prep.loglik_grad(np.array([0.0, -1.0]))[0] == -np.inf


def test_score_zero_at_standard_point():
    data = Dataset(response=np.array([3.0, 3.0, 3.0]), covariates={})
    prep = prepare(intercept_model(), data)
    score = prep.score(np.array([3.0, 1.0]))
    assert score[0] == pytest.approx(0.0, abs=1e-14)  # z = 0: dl/dmu = (1 - 1)/1


def test_score_matches_finite_differences():
    rng = np.random.default_rng(21)
    for model, positive in MODEL_SHAPES:
        data = random_dataset(rng, 30, positive=positive)
        prep = prepare(model, data)
        theta = theta_for(model, rng)
        score = prep.score(theta)
        h = 1e-6
        for j in range(theta.size):
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            fd = (prep.loglik(up) - prep.loglik(dn)) / (2 * h)
            assert score[j] == pytest.approx(fd, rel=1e-7, abs=1e-7)


def test_perobs_rows_sum_to_score_exactly():
    rng = np.random.default_rng(2)
    for model, positive in MODEL_SHAPES:
        data = random_dataset(rng, 17, positive=positive)
        prep = prepare(model, data)
        theta = theta_for(model, rng)
        perobs = prep.perobs(theta)
        assert np.array_equal(perobs.sum(axis=0), prep.score(theta))


def test_observed_info_matches_finite_difference_hessian():
    rng = np.random.default_rng(31)
    for model, positive in MODEL_SHAPES:
        data = random_dataset(rng, 30, positive=positive)
        prep = prepare(model, data)
        theta = theta_for(model, rng)
        J = prep.observed_info(theta)
        assert np.array_equal(J, J.T)
        h = 1e-5
        p = theta.size
        fd = np.zeros((p, p))
        for j in range(p):
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            fd[:, j] = (prep.score(up) - prep.score(dn)) / (2 * h)
        fd = -(fd + fd.T) / 2
        scale = np.maximum(np.abs(fd), 1e-3 * np.max(np.abs(fd)))
        assert np.max(np.abs(J - fd) / scale) < 1e-4


def test_observed_info_closed_form_point():
    data = Dataset(response=np.array([2.0, 2.0, 2.0]), covariates={})
    prep = prepare(intercept_model(), data)
    J = prep.observed_info(np.array([2.0, 1.0]))
    # z = 0, sigma = 1: per-observation J_mumu = exp(-z)/sigma^2 = 1
    assert J[0, 0] == pytest.approx(3.0, abs=1e-14)


def test_expected_info_closed_form():
    data = Dataset(response=np.array([0.4, 1.2, 0.9]), covariates={})
    prep = prepare(intercept_model(), data)
    I = prep.expected_info(np.array([0.0, 1.0]))
    trigamma2 = special.polygamma(1, 2.0)
    gamma2dd = (1 - EULER) ** 2 + trigamma2  # second gamma derivative at 2
    assert I[0, 0] == pytest.approx(3.0, abs=1e-12)
    assert I[0, 1] == pytest.approx(3 * (EULER - 1.0), abs=1e-12)
    assert I[1, 1] == pytest.approx(3 * (1.0 + gamma2dd), abs=1e-12)


def test_expected_info_scaling():
    rng = np.random.default_rng(6)
    data = random_dataset(rng, 20)
    model = ModelSpec(tail=Tail.MAX, location=parse_formula("1 + x1"),
                      dispersion=parse_formula("1"), dispersion_link="identity")
    prep = prepare(model, data)
    theta = np.array([0.5, 1.0, 2.0])
    scaled = np.array([0.5, 1.0, 6.0])
    I1 = prep.expected_info(theta)
    I3 = prep.expected_info(scaled)
    k = model.k
    assert I3[:k, :k] == pytest.approx(I1[:k, :k] / 9.0, rel=1e-12)


def test_mean_score_zero_and_bartlett_smoke():
    # smaller-scale version of the acceptance Monte Carlo identities
    rng = np.random.default_rng(17)
    model, _ = MODEL_SHAPES[0]
    data = random_dataset(rng, 25)
    prep = prepare(model, data)
    theta = theta_for(model, rng)
    c = prep._components(theta)
    reps = 4000
    score_acc = np.zeros(theta.size)
    score_sq = np.zeros(theta.size)
    j_acc = np.zeros((theta.size, theta.size))
    j_sq = np.zeros((theta.size, theta.size))
    for _ in range(reps):
        y = evd.sample(rng, GumbelParams(mu=c["mu"], sigma=c["sigma"], tail=Tail.MAX),
                       size=data.n)
        p_i = prep.with_response(y)
        s = p_i.score(theta)
        score_acc += s
        score_sq += s * s
        J = p_i.observed_info(theta)
        j_acc += J
        j_sq += J * J
    mean_score = score_acc / reps
    se = np.sqrt(score_sq / reps - mean_score**2) / np.sqrt(reps)
    assert np.all(np.abs(mean_score) <= 3 * se)
    I = prep.expected_info(theta)
    j_mean = j_acc / reps
    j_se = np.sqrt(np.maximum(j_sq / reps - j_mean**2, 0.0) / reps)
    assert np.all(np.abs(j_mean - I) <= 4 * j_se + 1e-9)
