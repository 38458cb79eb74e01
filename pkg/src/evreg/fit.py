"""Full and restricted maximum likelihood via BFGS with analytic gradients.

The optimizer is deterministic: fixed iteration order, no randomness, no
parallelism inside one fit, so identical inputs give bitwise-identical
results.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, EvaluationError
from .evd import EULER, Tail
from .inference import LikelihoodState, Prepared, prepare
from .model import Dataset, ModelSpec, get_link

MAX_ITER = 500
GRAD_TOL_REL = 1e-8
STEP_TOL = 1e-12
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
MAX_BACKTRACKS = 60


class Direction(enum.Enum):
    GREATER = "greater"   # H1: nu > nu0
    LESS = "less"         # H1: nu < nu0


@dataclass(frozen=True)
class HypothesisSpec:
    """One-sided hypothesis about the scalar parameter theta[param]."""

    param: int
    null_value: float
    direction: Direction

    def __post_init__(self):
        if self.param < 0:
            raise DataError("hypothesis parameter index must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    theta: np.ndarray
    loglik: float
    state: LikelihoodState
    converged: bool
    iterations: int
    grad_norm: float
    se: np.ndarray
    restricted_to: Optional[tuple] = None  # (param index, null value)


def default_init(model: ModelSpec, data: Dataset) -> np.ndarray:
    """Method-of-moments starting point.

    Least squares of y on the linear location terms (power exponents start
    at 1), dispersion from the residual variance through sigma^2 pi^2/6 = var,
    and the intercept shifted by -euler*sigma0 (MAX; +euler*sigma0 for MIN)
    to undo the Gumbel mean offset.
    """
    y = data.response
    beta = np.zeros(model.k)
    lin_cols = []
    lin_idx = []
    for j, t in enumerate(model.location.terms):
        kind = type(t).__name__
        if kind == "Intercept":
            lin_cols.append(np.ones(data.n))
            lin_idx.append(j)
        elif kind == "Linear":
            lin_cols.append(data.column(t.name))
            lin_idx.append(j)
        else:
            beta[j] = 1.0
    resid = y
    if lin_cols:
        L = np.column_stack(lin_cols)
        coef, _, rank, _ = np.linalg.lstsq(L, y, rcond=None)
        if rank == L.shape[1]:
            beta[lin_idx] = coef
            resid = y - L @ coef
        else:
            beta[lin_idx] = 0.0  # rank-deficient fallback: sigma0 from response variance
            resid = y
    sigma0 = float(np.sqrt(6.0 * np.var(resid)) / np.pi)
    if not np.isfinite(sigma0) or sigma0 <= 0:
        sigma0 = max(float(np.std(y)), 1.0)
    shift = -EULER * sigma0 if model.tail is Tail.MAX else EULER * sigma0
    for j, t in enumerate(model.location.terms):
        if type(t).__name__ == "Intercept":
            beta[j] += shift
            break
    gamma = np.zeros(model.m)
    hlink = get_link(model.dispersion_link)
    target = float(hlink.apply(sigma0))
    d_cols = []
    d_idx = []
    for j, t in enumerate(model.dispersion.terms):
        kind = type(t).__name__
        if kind == "Intercept":
            d_cols.append(np.ones(data.n))
            d_idx.append(j)
        elif kind == "Linear":
            d_cols.append(data.column(t.name))
            d_idx.append(j)
        else:
            gamma[j] = 1.0
    if d_idx:
        D = np.column_stack(d_cols)
        coef, _, rank, _ = np.linalg.lstsq(D, np.full(data.n, target), rcond=None)
        if rank == D.shape[1]:
            gamma[d_idx] = coef
    return np.concatenate([beta, gamma])


def _bfgs_max(fun_grad, x0, max_iter=MAX_ITER):
    """Maximize fun via BFGS + Armijo backtracking; returns (x, f, g, iters, converged).

    ``fun_grad`` returns (value, gradient) with value=-inf (gradient ignored)
    at infeasible points; such steps are rejected by the line search.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    if not np.isfinite(f) or g is None:
        raise EvaluationError("objective is not finite at the starting point")
    p_dim = x.shape[0]
    H = np.eye(p_dim)  # approximate inverse Hessian of -loglik
    fresh = True       # H carries no curvature yet: cap the raw-gradient step
    it = 0
    tol = lambda val: GRAD_TOL_REL * max(1.0, abs(val))
    while it < max_iter:
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol(f):
            return x, f, g, it, True
        d = H @ g  # ascent direction
        slope = float(g @ d)
        if not np.isfinite(slope) or slope <= 0.0:
            H = np.eye(p_dim)
            fresh = True
            d = g.copy()
            slope = float(g @ g)
            if slope == 0.0:
                return x, f, g, it, True
        alpha = 1.0
        if fresh:
            # raw gradient scale is arbitrary; keep the trial step O(1)
            dmax = float(np.max(np.abs(d)))
            if dmax > 1.0:
                alpha = 1.0 / dmax
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            x_new = x + alpha * d
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new >= f + ARMIJO_C * alpha * slope:
                accepted = True
                break
            alpha *= ARMIJO_SHRINK
        if not accepted:
            return x, f, g, it, float(np.max(np.abs(g))) <= tol(f)
        s = x_new - x
        yk = g - g_new  # gradient change of -loglik is -(g_new - g)
        x, f, g = x_new, f_new, g_new
        it += 1
        if float(np.max(np.abs(s))) < STEP_TOL:
            return x, f, g, it, float(np.max(np.abs(g))) <= tol(f)
        sy = float(s @ yk)
        if sy > 1e-10 * math.sqrt(float(s @ s) * float(yk @ yk)):
            if fresh:
                H = np.eye(p_dim) * (sy / float(yk @ yk))
                fresh = False
            rho = 1.0 / sy
            Hy = H @ yk
            H -= rho * (np.outer(s, Hy) + np.outer(Hy, s))
            H += rho * (rho * float(yk @ Hy) + 1.0) * np.outer(s, s)
    return x, f, g, it, float(np.max(np.abs(g))) <= tol(f)


def _newton_polish(fun_grad, hess, x, max_iter=50):
    """Analytic-Newton cleanup used only when BFGS exhausts its budget."""
    f, g = fun_grad(x)
    it = 0
    tol = lambda val: GRAD_TOL_REL * max(1.0, abs(val))
    while it < max_iter and float(np.max(np.abs(g))) > tol(f):
        J = hess(x)
        try:
            d = np.linalg.solve(J, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(d)):
            break
        alpha, accepted = 1.0, False
        slope = float(g @ d)
        if slope <= 0:
            break
        for _ in range(MAX_BACKTRACKS):
            f_new, g_new = fun_grad(x + alpha * d)
            if np.isfinite(f_new) and f_new >= f + ARMIJO_C * alpha * slope:
                accepted = True
                break
            alpha *= ARMIJO_SHRINK
        if not accepted:
            break
        x = x + alpha * d
        f, g = f_new, g_new
        it += 1
    return x, f, g, it


def _se_from_expected(state: LikelihoodState) -> np.ndarray:
    try:
        cov = np.linalg.inv(state.expected)
        d = np.diag(cov)
        with np.errstate(invalid="ignore"):
            return np.sqrt(np.where(d > 0, d, np.nan))
    except np.linalg.LinAlgError:
        return np.full(state.theta.shape, np.nan)


def fit_full(model: ModelSpec, data: Dataset, init=None,
             prepared: Prepared | None = None) -> FitResult:
    """Unrestricted MLE.  Standard errors use the inverse expected information."""
    prep = prepared if prepared is not None else prepare(model, data)
    theta0 = np.asarray(init, dtype=float) if init is not None \
        else default_init(model, data)
    f0, g0 = prep.loglik_grad(theta0)
    if not np.isfinite(f0):
        raise EvaluationError("log-likelihood is not finite at the starting point")
    prep.check_rank(theta0)
    x, f, g, it, ok = _bfgs_max(prep.loglik_grad, theta0)
    if not ok:
        x, f, g, extra = _newton_polish(prep.loglik_grad, prep.observed_info, x)
        it += extra
        ok = float(np.max(np.abs(g))) <= GRAD_TOL_REL * max(1.0, abs(f))
    state = prep.state(x)
    return FitResult(theta=x, loglik=f, state=state, converged=bool(ok),
                     iterations=it, grad_norm=float(np.max(np.abs(g))),
                     se=_se_from_expected(state))


def fit_restricted(model: ModelSpec, data: Dataset, hyp: HypothesisSpec,
                   init=None, prepared: Prepared | None = None) -> FitResult:
    """MLE with theta[hyp.param] fixed at hyp.null_value (coordinate removal)."""
    prep = prepared if prepared is not None else prepare(model, data)
    p = model.k + model.m
    if not 0 <= hyp.param < p:
        raise DataError(f"hypothesis parameter index {hyp.param} out of range for {p} parameters")
    free = np.array([i for i in range(p) if i != hyp.param])
    theta0 = np.asarray(init, dtype=float) if init is not None \
        else default_init(model, data)
    full0 = theta0.copy()
    full0[hyp.param] = hyp.null_value

    def embed(psi):
        th = full0.copy()
        th[free] = psi
        return th

    def fun_grad(psi):
        f, g = prep.loglik_grad(embed(psi))
        return (f, None) if g is None else (f, g[free])

    def hess(psi):
        J = prep.observed_info(embed(psi))
        return J[np.ix_(free, free)]

    f0, g0 = fun_grad(full0[free])
    if not np.isfinite(f0):
        raise EvaluationError("log-likelihood is not finite at the starting point")
    x, f, g, it, ok = _bfgs_max(fun_grad, full0[free])
    if not ok:
        x, f, g, extra = _newton_polish(fun_grad, hess, x)
        it += extra
        ok = float(np.max(np.abs(g))) <= GRAD_TOL_REL * max(1.0, abs(f))
    theta = embed(x)
    state = prep.state(theta)
    se = np.full(p, np.nan)
    try:
        cov = np.linalg.inv(state.expected[np.ix_(free, free)])
        d = np.diag(cov)
        with np.errstate(invalid="ignore"):
            se[free] = np.sqrt(np.where(d > 0, d, np.nan))
    except np.linalg.LinAlgError:
        pass
    return FitResult(theta=theta, loglik=f, state=state, converged=bool(ok),
                     iterations=it, grad_norm=float(np.max(np.abs(g))),
                     se=se, restricted_to=(hyp.param, hyp.null_value))
