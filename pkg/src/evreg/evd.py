"""Gumbel (type I extreme value) distribution primitives.

Both tail orientations are supported: ``Tail.MAX`` is the standard Gumbel
for block maxima, ``Tail.MIN`` its reflection used for minima and
log-lifetimes.  Parameters may be scalars or arrays of matching shape, so
one ``GumbelParams`` can describe a whole vector of observations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import EvregError

EULER = float(-special.digamma(1.0))

# Saturation bounds for the quantile argument: values outside are clamped
# before taking logs.  This is deliberate saturation, not silent success --
# quantile(u) for u below 1e-300 returns the finite quantile at the bound.
_U_LO = 1e-300
_U_HI = 1.0 - 1e-16


class Tail(enum.Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class GumbelParams:
    """Location/dispersion/tail-orientation of an extreme value distribution."""

    mu: float | np.ndarray
    sigma: float | np.ndarray
    tail: Tail = Tail.MAX

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)):
            raise EvregError("GumbelParams requires finite mu and sigma")
        if not np.all(sigma > 0):
            raise EvregError("GumbelParams requires sigma > 0")
        if not isinstance(self.tail, Tail):
            raise EvregError(f"tail must be a Tail enum, got {self.tail!r}")


def _z(y, p: GumbelParams):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise EvregError("y must be finite")
    return (y - p.mu) / p.sigma


def log_density(y, p: GumbelParams):
    """Log density at ``y``.

    MAX: −ln σ − z − e^{−z};  MIN: −ln σ + z − e^{z}, with z = (y−μ)/σ.
    """
    z = _z(y, p)
    if p.tail is Tail.MAX:
        out = -np.log(p.sigma) - z - np.exp(-z)
    else:
        out = -np.log(p.sigma) + z - np.exp(z)
    return out if out.ndim else float(out)


def cdf(y, p: GumbelParams):
    """Distribution function; MAX: exp(−e^{−z}), MIN: 1 − exp(−e^{z})."""
    z = _z(y, p)
    if p.tail is Tail.MAX:
        out = np.exp(-np.exp(-z))
    else:
        out = 1.0 - np.exp(-np.exp(z))
    return out if out.ndim else float(out)


def quantile(u, p: GumbelParams):
    """Inverse distribution function.

    ``u`` must lie in the open interval (0, 1); it is clamped to
    [1e-300, 1-1e-16] before the logs to keep the result finite.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise EvregError("quantile requires 0 < u < 1")
    uc = np.clip(u, _U_LO, _U_HI)
    if p.tail is Tail.MAX:
        out = p.mu - p.sigma * np.log(-np.log(uc))
    else:
        out = p.mu + p.sigma * np.log(-np.log1p(-uc))
    return out if out.ndim else float(out)


def sample(rng: np.random.Generator, p: GumbelParams, size=None):
    """Draw via the inverse CDF, one uniform per draw.

    The RNG is caller-owned; with array-valued parameters and ``size=None``
    the draw shape follows the broadcast parameter shape.
    """
    if size is None:
        shape = np.broadcast(np.asarray(p.mu), np.asarray(p.sigma)).shape
        size = shape if shape else None
    u = rng.random(size)
    # rng.random may return exactly 0.0; quantile clamping needs u in (0,1)
    u = np.maximum(u, _U_LO) if size is not None else max(u, _U_LO)
    return quantile(u, p)


def mean(p: GumbelParams):
    """E(y) = μ + Eσ for MAX, μ − Eσ for MIN (E the Euler constant)."""
    s = 1.0 if p.tail is Tail.MAX else -1.0
    out = np.asarray(p.mu, dtype=float) + s * EULER * np.asarray(p.sigma, dtype=float)
    return out if out.ndim else float(out)


def variance(p: GumbelParams):
    """var(y) = σ²π²/6, identical for both tails."""
    out = np.asarray(p.sigma, dtype=float) ** 2 * (np.pi**2 / 6.0)
    return out if out.ndim else float(out)


def reflect(p: GumbelParams) -> GumbelParams:
    """Duality map: y ~ EV_min(μ, σ)  iff  −y ~ EV_max(−μ, σ)."""
    other = Tail.MIN if p.tail is Tail.MAX else Tail.MAX
    return GumbelParams(mu=-np.asarray(p.mu, dtype=float) if np.ndim(p.mu) else -p.mu,
                        sigma=p.sigma, tail=other)
