import numpy as np
import pytest

from evreg import (DataError, Dataset, EvaluationError, FormulaError, ModelSpec, Tail,
                   UnsupportedModelError, eval_predictor, parse_formula, to_max_form)
from evreg.inference import prepare
from evreg.model import Intercept, Linear, Power


def kinds(spec):
    return [type(t).__name__ for t in spec.terms]


def test_parse_linear_formula():
    spec = parse_formula("1 + x1 + x2 + x3 + x4")
    assert kinds(spec) == ["Intercept", "Linear", "Linear", "Linear", "Linear"]
    assert spec.labels() == ["1", "x1", "x2", "x3", "x4"]


def test_parse_power_formula():
    spec = parse_formula("1 + x1 + pow(x2)")
    assert spec.terms == (Intercept(), Linear("x1"), Power("x2"))


def test_parse_whitespace_insensitive():
    assert parse_formula("1+x1+pow( x2 )") == parse_formula("1 + x1 + pow(x2)")


def test_parse_syntax_error_with_offset():
    with pytest.raises(FormulaError) as err:
        parse_formula("x1 + + x2")
    assert err.value.offset == 5


def test_parse_duplicate_errors():
    with pytest.raises(FormulaError):
        parse_formula("1 + 1")
    with pytest.raises(FormulaError):
        parse_formula("x + x")
    with pytest.raises(FormulaError):
        parse_formula("pow(x) + pow(x)")
    # same covariate in different kinds is allowed
    parse_formula("x + pow(x)")


def test_parse_trailing_garbage():
    with pytest.raises(FormulaError):
        parse_formula("x1 x2")
    with pytest.raises(FormulaError):
        parse_formula("")
    with pytest.raises(FormulaError):
        parse_formula("pow(x")


@pytest.mark.parametrize("text", ["1 + x1 + x2", "pow(a) + b", "1", "x9",
                                  "1 + x1 + pow(x2) + pow(x3)"])
def test_print_parse_idempotent(text):
    spec = parse_formula(text)
    printed = spec.to_string()
    again = parse_formula(printed)
    assert again == spec
    assert again.to_string() == printed


def make_data(n=6, seed=0, positive=False):
    rng = np.random.default_rng(seed)
    lo = 0.1 if positive else -1.0
    return Dataset(response=rng.normal(size=n),
                   covariates={"x": rng.uniform(lo, 1.0, n),
                               "w": rng.uniform(lo, 1.0, n)})


def test_eval_linear():
    data = Dataset(response=np.zeros(1), covariates={"x": np.array([0.5])})
    spec = parse_formula("1 + x")
    values, jac = eval_predictor(spec, np.array([1.0, 2.0]), data)
    assert values[0] == pytest.approx(2.0)
    assert jac[0].tolist() == [1.0, 0.5]


def test_eval_power():
    data = Dataset(response=np.zeros(1), covariates={"x": np.array([0.25])})
    spec = parse_formula("pow(x)")
    values, jac = eval_predictor(spec, np.array([0.5]), data)
    assert values[0] == pytest.approx(0.5)
    assert jac[0, 0] == pytest.approx(0.5 * np.log(0.25), abs=1e-12)


def test_eval_power_at_zero_exponent():
    data = Dataset(response=np.zeros(2), covariates={"x": np.array([0.3, 2.0])})
    values, jac = eval_predictor(parse_formula("pow(x)"), np.array([0.0]), data)
    assert values == pytest.approx([1.0, 1.0])
    assert jac[:, 0] == pytest.approx(np.log([0.3, 2.0]))


def test_eval_power_requires_positive():
    data = Dataset(response=np.zeros(2), covariates={"x": np.array([0.5, -0.1])})
    with pytest.raises(EvaluationError):
        eval_predictor(parse_formula("pow(x)"), np.array([1.0]), data)


def test_jacobian_matches_finite_differences():
    data = make_data(n=8, seed=3, positive=True)
    spec = parse_formula("1 + x + pow(w)")
    rng = np.random.default_rng(1)
    for _ in range(5):
        params = rng.uniform(-1.5, 1.5, spec.n_params)
        _, jac = eval_predictor(spec, params, data)
        h = 1e-6
        for j in range(spec.n_params):
            up, dn = params.copy(), params.copy()
            up[j] += h
            dn[j] -= h
            vu, _ = eval_predictor(spec, up, data)
            vd, _ = eval_predictor(spec, dn, data)
            fd = (vu - vd) / (2 * h)
            denom = np.maximum(np.abs(fd), 1.0)
            assert np.max(np.abs(jac[:, j] - fd) / denom) < 1e-6


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(response=np.array([1.0, np.nan]))
    with pytest.raises(DataError):
        Dataset(response=np.ones(3), covariates={"x": np.ones(2)})
    data = make_data()
    with pytest.raises(DataError):
        data.column("missing")


def test_dataset_from_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,x\n1.0,2.0\n3.5,4.0\n")
    data = Dataset.from_csv(path, response="y")
    assert data.response.tolist() == [1.0, 3.5]
    assert data.column("x").tolist() == [2.0, 4.0]
    with pytest.raises(DataError):
        Dataset.from_csv(path, response="nope")
    bad = tmp_path / "bad.csv"
    bad.write_text("y,x\n1.0,oops\n")
    with pytest.raises(DataError):
        Dataset.from_csv(bad, response="y")


def simple_model(tail=Tail.MAX):
    return ModelSpec(tail=tail, location=parse_formula("1"),
                     dispersion=parse_formula("1"), dispersion_link="identity")


def test_to_max_form_basics():
    data = Dataset(response=np.array([1.0, 2.0]), covariates={})
    model = simple_model(Tail.MIN)
    max_model, max_data = to_max_form(model, data)
    assert max_model.tail is Tail.MAX
    assert max_data.response.tolist() == [-1.0, -2.0]
    values, jac = max_model.location.evaluate(np.array([3.0]), max_data)
    assert values == pytest.approx([-3.0, -3.0])
    assert jac[:, 0] == pytest.approx([-1.0, -1.0])
    with pytest.raises(UnsupportedModelError):
        to_max_form(simple_model(Tail.MAX), data)


def test_to_max_form_preserves_loglik():
    rng = np.random.default_rng(11)
    data = Dataset(response=rng.normal(2.0, 1.0, 12),
                   covariates={"x": rng.uniform(-1, 1, 12),
                               "z": rng.uniform(-1, 1, 12)})
    model = ModelSpec(tail=Tail.MIN, location=parse_formula("1 + x"),
                      dispersion=parse_formula("1 + z"), dispersion_link="log")
    prep_min = prepare(model, data)
    max_model, max_data = to_max_form(model, data)
    prep_max = prepare(max_model, max_data)
    for _ in range(50):
        theta = np.concatenate([rng.normal(size=2), rng.normal(scale=0.5, size=2)])
        assert prep_min.loglik(theta) == pytest.approx(prep_max.loglik(theta),
                                                       abs=1e-12, rel=1e-12)


def test_param_names_and_index():
    model = ModelSpec(tail=Tail.MAX, location=parse_formula("1 + temp"),
                      dispersion=parse_formula("1 + z"), dispersion_link="log")
    assert model.param_names() == ["1", "temp", "disp:1", "disp:z"]
    assert model.param_index("temp") == 1
    assert model.param_index("disp:z") == 3
    assert model.param_index("intercept") == 0
    with pytest.raises(DataError):
        model.param_index("nope")


def test_model_requires_enough_observations():
    model = ModelSpec(tail=Tail.MAX, location=parse_formula("1 + x"),
                      dispersion=parse_formula("1"), dispersion_link="identity")
    tiny = Dataset(response=np.array([1.0, 2.0]), covariates={"x": np.array([0.1, 0.2])})
    with pytest.raises(DataError):
        model.validate_data(tiny)
