"""Orthogonal reparameterization and the DiCiccio-Martin statistic.

For a location-block interest parameter beta_r, the nuisance parameters are
shifted by constant multiples of beta_r,

    beta_(r) = kappa - beta_r * A',     gamma = tau - beta_r * B',

with (A | B) = I_{nu,psi} I_{psi,psi}^{-1} built from the expected
information blocks at an anchor point (the restricted MLE).  The map
theta = M vartheta is affine with unit determinant, and at the anchor the
reparameterized expected information has zero cross-block between beta_r
and (kappa, tau).

All reparameterized quantities are obtained by conjugating base-model
score/J/I with M, which is exact for an affine map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, EvregError, UnsupportedModelError
from .fit import FitResult, HypothesisSpec, fit_full, fit_restricted
from .inference import Prepared, prepare
from .model import Dataset, ModelSpec


@dataclass(frozen=True)
class OrthogonalizedModel:
    """Affine reparameterization vartheta = (beta_r, kappa, tau) of a model.

    ``mmap`` is d theta / d vartheta with the interest parameter first in
    the vartheta ordering; ``order`` lists the theta indices in vartheta
    order (interest, remaining location, dispersion).
    """

    base: ModelSpec
    interest: int
    anchor: np.ndarray
    a_row: np.ndarray       # length k-1
    b_row: np.ndarray       # length m
    mmap: np.ndarray        # (k+m) x (k+m), theta = mmap @ vartheta
    order: tuple

    def to_theta(self, vartheta) -> np.ndarray:
        return self.mmap @ np.asarray(vartheta, dtype=float)

    def to_vartheta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        ab = np.concatenate([self.a_row, self.b_row])
        out = np.empty_like(theta)
        out[0] = theta[self.interest]
        rest = [i for i in self.order if i != self.interest]
        out[1:] = theta[rest] + theta[self.interest] * ab
        return out


def orthogonalize(model: ModelSpec, data: Dataset, hyp: HypothesisSpec,
                  anchor, prepared: Prepared | None = None) -> OrthogonalizedModel:
    """Build the constant-matrix orthogonalizing map at ``anchor``."""
    prep = prepared if prepared is not None else prepare(model, data)
    k, m = prep.k, prep.m
    r = hyp.param
    if not 0 <= r < k:
        raise UnsupportedModelError(
            "orthogonalization requires the interest parameter in the location block")
    anchor = np.asarray(anchor, dtype=float)
    info = prep.expected_info(anchor)
    rest = [i for i in range(k + m) if i != r]
    i_nu_rest = info[r, rest]
    i_rest_rest = info[np.ix_(rest, rest)]
    try:
        ab = np.linalg.solve(i_rest_rest, i_nu_rest)
    except np.linalg.LinAlgError:
        raise ConditioningError("nuisance block of the expected information is singular")
    mmap = np.zeros((k + m, k + m))
    mmap[r, 0] = 1.0
    for col, i in enumerate(rest, start=1):
        mmap[i, col] = 1.0
        mmap[i, 0] = -ab[col - 1]
    order = (r,) + tuple(rest)
    return OrthogonalizedModel(base=model, interest=r, anchor=anchor,
                               a_row=ab[: k - 1], b_row=ab[k - 1:],
                               mmap=mmap, order=order)


def reparam_likelihood(om: OrthogonalizedModel, data: Dataset, vartheta,
                       prepared: Prepared | None = None):
    """(loglik, d loglik/d beta_r, observed info, expected interest info) at vartheta."""
    prep = prepared if prepared is not None else prepare(om.base, data)
    theta = om.to_theta(vartheta)
    state = prep.state(theta)
    mt = om.mmap.T
    score_star = mt @ state.score
    j_star = mt @ state.observed @ om.mmap
    i_star_nn = float(om.mmap[:, 0] @ state.expected @ om.mmap[:, 0])
    return state.loglik, float(score_star[0]), j_star, i_star_nn


def cross_block(om: OrthogonalizedModel, info: np.ndarray) -> np.ndarray:
    """Interest/nuisance cross-block of a conjugated information matrix."""
    istar = om.mmap.T @ info @ om.mmap
    return istar[0, 1:]


def r0_statistic(model: ModelSpec, data: Dataset, hyp: HypothesisSpec,
                 full: FitResult | None = None, restr: FitResult | None = None,
                 prepared: Prepared | None = None, diagnostics: dict | None = None,
                 return_u: bool = False):
    """DiCiccio-Martin adjusted statistic via the anchored orthogonal map.

    The affine map preserves the interest coordinate, so the vartheta-space
    MLEs are the exact images of theta_hat and theta_tilde; both mapped
    points are verified against the reparameterized score before use.
    """
    from .hots import NEAR_ZERO_R, adjust, signed_lr  # circular at import time

    diagnostics = diagnostics if diagnostics is not None else {}
    prep = prepared if prepared is not None else prepare(model, data)
    if full is None:
        full = fit_full(model, data, prepared=prep)
    if restr is None:
        warm = full.theta.copy()
        warm[hyp.param] = hyp.null_value
        restr = fit_restricted(model, data, hyp, init=warm, prepared=prep)
    R = signed_lr(full, restr, hyp)
    if abs(R) < NEAR_ZERO_R:
        return (R, 0.0) if return_u else R

    om = orthogonalize(model, data, hyp, anchor=restr.theta, prepared=prep)
    mt = om.mmap.T
    hat, til = full.state, restr.state

    # mapped optima; nuisance score must vanish there by invariance
    score_star_til = mt @ til.score
    gtol = 1e-6 * max(1.0, abs(til.loglik))
    if float(np.max(np.abs(score_star_til[1:]))) > gtol:
        raise EvregError("mapped restricted fit is not stationary in the orthogonal space")

    l_nu = float(score_star_til[0])
    j_star_til = mt @ til.observed @ om.mmap
    j_star_hat = mt @ hat.observed @ om.mmap
    i_star_hat_nn = float(om.mmap[:, 0] @ hat.expected @ om.mmap[:, 0])
    i_star_til_nn = float(om.mmap[:, 0] @ til.expected @ om.mmap[:, 0])
    if i_star_hat_nn <= 0 or i_star_til_nn <= 0:
        raise ConditioningError("reparameterized interest information is not positive",
                                diagnostics=dict(diagnostics))

    sign_h, ld_jhat = np.linalg.slogdet(j_star_hat)
    sign_t, ld_jtil_psi = np.linalg.slogdet(j_star_til[1:, 1:])
    diagnostics["det_sign:J_star_hat"] = float(sign_h)
    diagnostics["det_sign:J_star_tilde_psi_psi"] = float(sign_t)
    if sign_h <= 0 or sign_t <= 0:
        raise ConditioningError("observed information determinants are not positive",
                                diagnostics=dict(diagnostics))

    u0 = abs(l_nu) * np.exp(0.5 * (ld_jtil_psi + np.log(i_star_hat_nn)
                                   - ld_jhat - np.log(i_star_til_nn)))
    u0 = float(np.copysign(u0, R))  # sign convention: sgn(U0) = sgn(R)
    value = adjust(R, u0)
    return (value, u0) if return_u else value
