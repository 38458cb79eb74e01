"""Model specification: links, predictor formulas, designs, min/max transform.

A model couples a response tail orientation with two sub-models,

    g(mu_t)    = eta(x_t, beta)      (location;   identity link)
    h(sigma_t) = delta(z_t, gamma)   (dispersion; log or identity link)

where each predictor is parsed from a small formula grammar::

    formula := term ('+' term)*
    term    := '1' | NAME | 'pow(' NAME ')'

``1`` is the intercept, ``NAME`` a linear covariate term, and ``pow(NAME)``
contributes ``x^b`` with its own exponent parameter ``b``.  Parameter order
is formula term order, location block before dispersion block.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, EvaluationError, FormulaError, UnsupportedModelError
from .evd import Tail


# --------------------------------------------------------------------------
# links
# --------------------------------------------------------------------------

class IdentityLink:
    """g(x) = x."""

    name = "identity"

    @staticmethod
    def apply(x):
        return np.asarray(x, dtype=float)

    @staticmethod
    def inverse(e):
        return np.asarray(e, dtype=float)

    @staticmethod
    def inv_deriv(e):
        # d g^{-1} / d eta  ==  1 / g'(mu)
        return np.ones_like(np.asarray(e, dtype=float))

    @staticmethod
    def inv_deriv2(e):
        return np.zeros_like(np.asarray(e, dtype=float))


class LogLink:
    """h(x) = ln x, so x = exp(delta)."""

    name = "log"

    @staticmethod
    def apply(x):
        return np.log(x)

    @staticmethod
    def inverse(e):
        return np.exp(e)

    @staticmethod
    def inv_deriv(e):
        return np.exp(e)

    @staticmethod
    def inv_deriv2(e):
        return np.exp(e)


IDENTITY = IdentityLink()
LOG = LogLink()

_LINKS = {"identity": IDENTITY, "log": LOG}


def get_link(name: str):
    try:
        return _LINKS[name]
    except KeyError:
        raise UnsupportedModelError(f"unknown link {name!r}; available: {sorted(_LINKS)}")


# --------------------------------------------------------------------------
# formula terms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Intercept:
    def label(self):
        return "1"


@dataclass(frozen=True)
class Linear:
    name: str

    def label(self):
        return self.name


@dataclass(frozen=True)
class Power:
    name: str

    def label(self):
        return f"pow({self.name})"


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def parse_formula(text: str) -> "PredictorSpec":
    """Parse a predictor formula into term order = parameter order."""
    terms = []
    i, n = 0, len(text)

    def skip_ws(j):
        while j < n and text[j].isspace():
            j += 1
        return j

    def parse_term(j):
        j = skip_ws(j)
        if j >= n:
            raise FormulaError("expected a term", offset=j)
        if text[j] == "1":
            return Intercept(), j + 1
        m = _NAME_RE.match(text, j)
        if not m:
            raise FormulaError(f"expected '1', a name, or 'pow(...)', found {text[j]!r}", offset=j)
        word = m.group(0)
        j2 = skip_ws(m.end())
        if word == "pow" and j2 < n and text[j2] == "(":
            j3 = skip_ws(j2 + 1)
            m2 = _NAME_RE.match(text, j3)
            if not m2:
                raise FormulaError("expected a covariate name inside pow(...)", offset=j3)
            j4 = skip_ws(m2.end())
            if j4 >= n or text[j4] != ")":
                raise FormulaError("expected ')'", offset=j4)
            return Power(m2.group(0)), j4 + 1
        return Linear(word), m.end()

    term, i = parse_term(0)
    terms.append(term)
    i = skip_ws(i)
    while i < n:
        if text[i] != "+":
            raise FormulaError(f"expected '+' between terms, found {text[i]!r}", offset=i)
        term, i = parse_term(i + 1)
        terms.append(term)
        i = skip_ws(i)

    seen_intercept = False
    seen = {"linear": set(), "power": set()}
    for t in terms:
        if isinstance(t, Intercept):
            if seen_intercept:
                raise FormulaError("duplicate intercept term")
            seen_intercept = True
        elif isinstance(t, Linear):
            if t.name in seen["linear"]:
                raise FormulaError(f"duplicate linear term for covariate {t.name!r}")
            seen["linear"].add(t.name)
        else:
            if t.name in seen["power"]:
                raise FormulaError(f"duplicate power term for covariate {t.name!r}")
            seen["power"].add(t.name)
    return PredictorSpec(terms=tuple(terms))


@dataclass(frozen=True)
class PredictorSpec:
    """Ordered additive terms; ``negate`` flips the sign of value and jacobian.

    The negate flag is produced by :func:`to_max_form` (it is not part of the
    formula grammar), so :meth:`to_string` is only defined for plain specs.
    """

    terms: tuple
    negate: bool = False

    @property
    def n_params(self) -> int:
        return len(self.terms)

    def labels(self) -> list[str]:
        return [t.label() for t in self.terms]

    def covariate_names(self) -> set[str]:
        return {t.name for t in self.terms if not isinstance(t, Intercept)}

    def to_string(self) -> str:
        if self.negate:
            raise UnsupportedModelError("negated predictors have no formula form")
        return " + ".join(self.labels())

    def evaluate(self, params, data: "Dataset", with_hessian: bool = False):
        """Return (values, jacobian[, hessian_diag]) at ``params``.

        The jacobian column for an intercept is 1, for a linear term the
        covariate, and for ``pow(x)`` with exponent b it is x^b ln x; the
        hessian diagonal is x^b (ln x)^2 (cross second derivatives vanish).
        """
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise EvaluationError(
                f"predictor expects {self.n_params} parameters, got shape {params.shape}")
        n = data.n
        values = np.zeros(n)
        jac = np.empty((n, self.n_params))
        hess = np.zeros((n, self.n_params)) if with_hessian else None
        for j, t in enumerate(self.terms):
            if isinstance(t, Intercept):
                col = np.ones(n)
                values += params[j]
            elif isinstance(t, Linear):
                col = data.column(t.name)
                values += params[j] * col
            else:
                x = data.column(t.name)
                if np.any(x <= 0):
                    raise EvaluationError(
                        f"pow({t.name}) requires strictly positive covariate values")
                lx = np.log(x)
                # overflow at extreme exponents yields inf, rejected downstream
                with np.errstate(over="ignore"):
                    xb = np.exp(params[j] * lx)
                    values += xb
                    col = xb * lx
                    if with_hessian:
                        hess[:, j] = xb * lx * lx
            jac[:, j] = col
        if self.negate:
            values = -values
            jac = -jac
            if with_hessian:
                hess = -hess
        return (values, jac, hess) if with_hessian else (values, jac)


def eval_predictor(spec: PredictorSpec, params, data: "Dataset"):
    """Predictor values and jacobian (n x p) at ``params``."""
    return spec.evaluate(params, data)


# --------------------------------------------------------------------------
# data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Response vector plus named covariate columns, no missing values."""

    response: np.ndarray
    covariates: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.response, dtype=float)
        object.__setattr__(self, "response", y)
        if y.ndim != 1 or y.size == 0:
            raise DataError("response must be a nonempty 1-d vector")
        if not np.all(np.isfinite(y)):
            raise DataError("response contains non-finite values")
        cols = {}
        for name, col in self.covariates.items():
            c = np.asarray(col, dtype=float)
            if c.shape != y.shape:
                raise DataError(f"covariate {name!r} has length {c.shape}, expected {y.shape}")
            if not np.all(np.isfinite(c)):
                raise DataError(f"covariate {name!r} contains non-finite values")
            cols[name] = c
        object.__setattr__(self, "covariates", cols)

    @property
    def n(self) -> int:
        return self.response.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.covariates[name]
        except KeyError:
            raise DataError(f"unknown covariate column {name!r}")

    @classmethod
    def from_csv(cls, path, response: str) -> "Dataset":
        """Load a comma-separated file with a header row ('.' decimal point)."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file")
            header = [h.strip() for h in header]
            rows = [r for r in reader if r and any(c.strip() for c in r)]
        if response not in header:
            raise DataError(f"{path}: response column {response!r} not found in {header}")
        cols = {h: [] for h in header}
        for lineno, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            for h, cell in zip(header, row):
                try:
                    cols[h].append(float(cell))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric value {cell!r} in column {h!r}")
        y = np.array(cols.pop(response))
        return cls(response=y, covariates={k: np.array(v) for k, v in cols.items()})


# --------------------------------------------------------------------------
# model spec
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Tail orientation plus location/dispersion predictors and links.

    Parameter layout theta = (beta, gamma): location parameters first, in
    formula term order, then dispersion parameters.
    """

    tail: Tail
    location: PredictorSpec
    dispersion: PredictorSpec
    dispersion_link: str = "log"
    location_link: str = "identity"

    def __post_init__(self):
        if self.location_link != "identity":
            raise UnsupportedModelError("only the identity location link is implemented")
        get_link(self.dispersion_link)

    @property
    def k(self) -> int:
        return self.location.n_params

    @property
    def m(self) -> int:
        return self.dispersion.n_params

    @property
    def n_params(self) -> int:
        return self.k + self.m

    def param_names(self) -> list[str]:
        loc = self.location.labels()
        disp = [f"disp:{l}" for l in self.dispersion.labels()]
        return loc + disp

    def param_index(self, name: str) -> int:
        names = self.param_names()
        if name in names:
            return names.index(name)
        # bare '1' or 'intercept' resolve to the location intercept
        aliases = {"intercept": "1", "disp:intercept": "disp:1"}
        alias = aliases.get(name)
        if alias and alias in names:
            return names.index(alias)
        raise DataError(f"unknown parameter {name!r}; available: {names}")

    def validate_data(self, data: Dataset):
        missing = (self.location.covariate_names() | self.dispersion.covariate_names()) \
            - set(data.covariates)
        if missing:
            raise DataError(f"data is missing covariate columns: {sorted(missing)}")
        if self.n_params >= data.n:
            raise DataError(
                f"model has {self.n_params} parameters but only {data.n} observations")


def to_max_form(model: ModelSpec, data: Dataset):
    """Rewrite a MIN model as the equivalent MAX model.

    The response is negated and the location predictor wrapped so its value
    and jacobian are the negation of the original's; dispersion is unchanged.
    The log-likelihood is identical at every theta.
    """
    if model.tail is not Tail.MIN:
        raise UnsupportedModelError("to_max_form requires a MIN model")
    flipped = replace(model.location, negate=not model.location.negate)
    new_model = replace(model, tail=Tail.MAX, location=flipped)
    new_data = Dataset(response=-data.response, covariates=data.covariates)
    return new_model, new_data
