"""Log-likelihood, analytic score, observed and expected information.

All formulas are written for the MAX orientation; MIN models are
canonicalized through :func:`evreg.model.to_max_form`, which preserves the
log-likelihood pointwise in theta.

Per observation, with z = (y - mu)/sigma and ez = exp(-z):

    l    = -ln sigma - z - ez
    dl/dmu      = (1 - ez) / sigma
    dl/dsigma   = (-1 + z - z ez) / sigma
    d2l/dmu2    = -ez / sigma^2
    d2l/dmusig  = (-1 + ez - z ez) / sigma^2
    d2l/dsigma2 = (1 - 2z + 2z ez - z^2 ez) / sigma^2

and the chain rule runs through the links (T = 1/g'(mu), H = 1/h'(sigma))
and the predictor jacobians/second derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConditioningError, DataError, EvaluationError
from .evd import EULER, Tail
from .model import Dataset, ModelSpec, get_link, to_max_form


# --------------------------------------------------------------------------
# special values
# --------------------------------------------------------------------------

def gamma_d1(x):
    """First derivative of the gamma function: Gamma'(x) = Gamma(x) psi(x)."""
    x = np.asarray(x, dtype=float)
    return special.gamma(x) * special.digamma(x)


def gamma_d2(x):
    """Second derivative: Gamma''(x) = Gamma(x) (psi(x)^2 + psi'(x))."""
    x = np.asarray(x, dtype=float)
    psi = special.digamma(x)
    return special.gamma(x) * (psi * psi + special.polygamma(1, x))


#: Gamma''(2) = (1 - euler)^2 + pi^2/6 - 1, the dispersion information constant.
GAMMA_D2_AT_2 = float(gamma_d2(2.0))


# --------------------------------------------------------------------------
# state containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagonalBundle:
    """Per-observation diagonals shared by every adjusted statistic.

    All entries are length-n vectors standing for the corresponding diagonal
    matrices; ``iota``/``idn`` realize the ones vector and identity on demand.
    """

    z: np.ndarray        # (y - mu)/sigma
    zbreve: np.ndarray   # exp(-z)
    t: np.ndarray        # 1/g'(mu)
    h: np.ndarray        # 1/h'(sigma)
    phi: np.ndarray      # sigma
    ldiag: np.ndarray    # per-observation log-likelihood terms
    mu: np.ndarray

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def iota(self) -> np.ndarray:
        return np.ones(self.n)

    @property
    def idn(self) -> np.ndarray:
        return np.eye(self.n)


@dataclass(frozen=True)
class LikelihoodState:
    """Everything the test statistics need at one theta."""

    theta: np.ndarray
    loglik: float
    score: np.ndarray
    observed: np.ndarray   # J = -d2 l / dtheta dtheta'
    expected: np.ndarray   # Fisher information I
    bundle: DiagonalBundle
    perobs: np.ndarray     # n x (k+m) score contributions, rows sum to score
    xjac: np.ndarray       # n x k location predictor jacobian at theta
    zjac: np.ndarray       # n x m dispersion predictor jacobian at theta


# --------------------------------------------------------------------------
# prepared evaluator
# --------------------------------------------------------------------------

class Prepared:
    """Model+data bound together with cached designs for repeated evaluation.

    MIN models are converted to MAX form once at construction; theta has the
    same meaning in both forms.
    """

    def __init__(self, model: ModelSpec, data: Dataset):
        model.validate_data(data)
        self.original_model = model
        if model.tail is Tail.MIN:
            model, data = to_max_form(model, data)
        self.model = model
        self.data = data
        self.y = data.response
        self.n = data.n
        self.k = model.k
        self.m = model.m
        self.hlink = get_link(model.dispersion_link)
        self._disp_identity = model.dispersion_link == "identity"
        self._disp_log = model.dispersion_link == "log"
        self._loc_static = self._static_jacobian(model.location)
        self._disp_static = self._static_jacobian(model.dispersion)

    def with_response(self, response) -> "Prepared":
        """Same model and covariates with a new response vector.

        ``response`` is in the original model's orientation; MIN models are
        re-negated internally.  Cached designs are shared.
        """
        import copy

        y = np.asarray(response, dtype=float)
        if y.shape != (self.n,) or not np.all(np.isfinite(y)):
            raise EvaluationError("response must be a finite vector of matching length")
        if self.original_model.tail is Tail.MIN:
            y = -y
        new = copy.copy(self)
        new.y = y
        new.data = Dataset(response=y, covariates=self.data.covariates)
        return new

    def _static_jacobian(self, spec):
        """Constant jacobian for specs without power terms, else None."""
        if any(type(t).__name__ == "Power" for t in spec.terms):
            return None
        _, jac = spec.evaluate(np.zeros(spec.n_params), self.data)
        return jac

    # -- raw predictor evaluation ------------------------------------------

    def _location(self, beta, with_hessian=False):
        static = self._loc_static
        if static is not None:
            eta = static @ beta
            if with_hessian:
                return eta, static, None
            return eta, static
        return self.model.location.evaluate(beta, self.data, with_hessian=with_hessian)

    def _dispersion(self, gamma, with_hessian=False):
        static = self._disp_static
        if static is not None:
            delta = static @ gamma
            if with_hessian:
                return delta, static, None
            return delta, static
        return self.model.dispersion.evaluate(gamma, self.data, with_hessian=with_hessian)

    def split(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.k + self.m,):
            raise EvaluationError(
                f"theta must have length {self.k + self.m}, got shape {theta.shape}")
        return theta[: self.k], theta[self.k:]

    # -- likelihood paths ---------------------------------------------------

    def loglik_grad(self, theta):
        """Fused (loglik, gradient); returns (-inf, None) on invalid theta.

        This is the optimizer's hot path: an invalid dispersion or an
        overflowing exp(-z) is a rejected step, not an exception.
        """
        theta = np.asarray(theta, dtype=float)
        k = self.k
        try:
            eta, xjac = self._location(theta[:k])
            delta, zjac = self._dispersion(theta[k:])
        except EvaluationError:
            return -np.inf, None
        if self._disp_identity:
            sigma, h = delta, None
        elif self._disp_log:
            with np.errstate(over="ignore"):
                sigma = np.exp(delta)
            h = sigma
        else:
            sigma = self.hlink.inverse(delta)
            h = self.hlink.inv_deriv(delta)
        if not np.all(sigma > 0.0):  # also False when sigma has NaNs
            return -np.inf, None
        with np.errstate(over="ignore", invalid="ignore"):
            z = (self.y - eta) / sigma  # identity location link: mu == eta
            ez = np.exp(-z)
            total = float(np.sum(-np.log(sigma) - z - ez))
            if not np.isfinite(total):
                return -np.inf, None
            s1 = (1.0 - ez) / sigma
            s2 = (z * (1.0 - ez) - 1.0) / sigma
            if h is not None:
                s2 = s2 * h
            grad = np.empty(theta.shape[0])
            grad[:k] = xjac.T @ s1
            grad[k:] = zjac.T @ s2
        if not np.all(np.isfinite(grad)):
            return -np.inf, None
        return total, grad

    def loglik(self, theta) -> float:
        """Total log-likelihood; raises on invalid sigma, -inf on overflow."""
        c = self._components(theta)
        return float(np.sum(c["ldiag"]))

    def _components(self, theta, with_hessian=False):
        beta, gamma = self.split(theta)
        loc = self._location(beta, with_hessian=with_hessian)
        disp = self._dispersion(gamma, with_hessian=with_hessian)
        if with_hessian:
            eta, xjac, xhess = loc
            delta, zjac, zhess = disp
        else:
            (eta, xjac), (delta, zjac) = loc, disp
            xhess = zhess = None
        sigma = self.hlink.inverse(delta)
        if np.any(sigma <= 0.0) or not np.all(np.isfinite(sigma)):
            raise EvaluationError("dispersion sub-model produced sigma <= 0")
        mu = eta
        z = (self.y - mu) / sigma
        with np.errstate(over="ignore"):
            ez = np.exp(-z)
        ldiag = -np.log(sigma) - z - ez
        t = np.ones(self.n)
        h = self.hlink.inv_deriv(delta)
        return dict(mu=mu, sigma=sigma, z=z, ez=ez, ldiag=ldiag, t=t, h=h,
                    xjac=xjac, zjac=zjac, xhess=xhess, zhess=zhess,
                    delta=delta)

    def perobs(self, theta):
        c = self._components(theta)
        return self._perobs_from(c)

    def _perobs_from(self, c):
        s1 = (1.0 - c["ez"]) / c["sigma"] * c["t"]
        s2 = (-1.0 + c["z"] * (1.0 - c["ez"])) / c["sigma"] * c["h"]
        return np.hstack([c["xjac"] * s1[:, None], c["zjac"] * s2[:, None]])

    def score(self, theta):
        return self.perobs(theta).sum(axis=0)

    def observed_info(self, theta):
        c = self._components(theta, with_hessian=True)
        return self._observed_from(c)

    def _observed_from(self, c):
        sigma, z, ez = c["sigma"], c["z"], c["ez"]
        t, h = c["t"], c["h"]
        xjac, zjac = c["xjac"], c["zjac"]
        s1 = (1.0 - ez) / sigma
        s2 = (-1.0 + z * (1.0 - ez)) / sigma
        w11 = -ez / sigma**2
        w12 = (-1.0 + ez - z * ez) / sigma**2
        w22 = (1.0 - 2.0 * z + (2.0 * z - z * z) * ez) / sigma**2
        # identity location link: T = 1, (g^{-1})'' = 0
        hbb = xjac.T @ (w11[:, None] * xjac)
        if c["xhess"] is not None:
            hbb[np.diag_indices_from(hbb)] += c["xhess"].T @ s1
        hd2 = self.hlink.inv_deriv2(c["delta"])
        hbg = xjac.T @ ((w12 * h)[:, None] * zjac)
        hgg = zjac.T @ ((w22 * h * h + s2 * hd2)[:, None] * zjac)
        if c["zhess"] is not None:
            hgg[np.diag_indices_from(hgg)] += c["zhess"].T @ (s2 * h)
        top = np.hstack([hbb, hbg])
        bottom = np.hstack([hbg.T, hgg])
        out = -np.vstack([top, bottom])
        return (out + out.T) / 2.0

    def expected_info(self, theta):
        c = self._components(theta)
        return self._expected_from(c)

    def _expected_from(self, c):
        sigma, t, h = c["sigma"], c["t"], c["h"]
        xjac, zjac = c["xjac"], c["zjac"]
        inv2 = 1.0 / (sigma * sigma)
        ibb = xjac.T @ ((t * t * inv2)[:, None] * xjac)
        ibg = (EULER - 1.0) * (xjac.T @ ((t * h * inv2)[:, None] * zjac))
        igg = (1.0 + GAMMA_D2_AT_2) * (zjac.T @ ((h * h * inv2)[:, None] * zjac))
        top = np.hstack([ibb, ibg])
        bottom = np.hstack([ibg.T, igg])
        out = np.vstack([top, bottom])
        return (out + out.T) / 2.0

    def state(self, theta) -> LikelihoodState:
        theta = np.asarray(theta, dtype=float)
        c = self._components(theta, with_hessian=True)
        perobs = self._perobs_from(c)
        bundle = DiagonalBundle(z=c["z"], zbreve=c["ez"], t=c["t"], h=c["h"],
                                phi=c["sigma"], ldiag=c["ldiag"], mu=c["mu"])
        return LikelihoodState(
            theta=theta,
            loglik=float(np.sum(c["ldiag"])),
            score=perobs.sum(axis=0),
            observed=self._observed_from(c),
            expected=self._expected_from(c),
            bundle=bundle,
            perobs=perobs,
            xjac=c["xjac"],
            zjac=c["zjac"],
        )

    def check_rank(self, theta):
        """Numeric rank check of both design matrices at theta."""
        c = self._components(theta)
        if np.linalg.matrix_rank(c["xjac"]) < self.k:
            raise DataError("location design matrix is rank deficient")
        if np.linalg.matrix_rank(c["zjac"]) < self.m:
            raise DataError("dispersion design matrix is rank deficient")


def prepare(model: ModelSpec, data: Dataset) -> Prepared:
    return Prepared(model, data)


# -- spec-level functional API ----------------------------------------------

def loglik(model: ModelSpec, data: Dataset, theta) -> float:
    return prepare(model, data).loglik(theta)


def score(model: ModelSpec, data: Dataset, theta) -> np.ndarray:
    return prepare(model, data).score(theta)


def observed_info(model: ModelSpec, data: Dataset, theta) -> np.ndarray:
    return prepare(model, data).observed_info(theta)


def expected_info(model: ModelSpec, data: Dataset, theta) -> np.ndarray:
    return prepare(model, data).expected_info(theta)


def likelihood_state(model: ModelSpec, data: Dataset, theta) -> LikelihoodState:
    return prepare(model, data).state(theta)


def inverse_expected_info(state: LikelihoodState) -> np.ndarray:
    try:
        return np.linalg.inv(state.expected)
    except np.linalg.LinAlgError:
        raise ConditioningError("expected information is singular",
                                diagnostics={"expected_info": state.expected})
