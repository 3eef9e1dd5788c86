"""Interpolation-inequality checks, the decay-exponent catalog, log-log rate
fitting, and weighted sup-norm verification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError
from .solver import _abs_pow


@dataclass(frozen=True)
class GNParams:
    """Hypotheses of the weighted interpolation inequality:
    a1 >= 0, a2 >= 1, 0 <= mu1 <= 1, mu2 >= -mu1."""

    a1: float
    a2: float
    mu1: float
    mu2: float
    p: float

    def __post_init__(self):
        if self.a1 < 0.0:
            raise ConfigError(f"a1 must be nonnegative, got {self.a1}")
        if self.a2 < 1.0:
            raise ConfigError(f"a2 must be at least 1, got {self.a2}")
        if not 0.0 <= self.mu1 <= 1.0:
            raise ConfigError(f"mu1 must lie in [0, 1], got {self.mu1}")
        if self.mu2 < -self.mu1:
            raise ConfigError(f"mu2 must be at least -mu1, got {self.mu2}")
        if self.p <= 1.0:
            raise ConfigError(f"p must exceed 1, got {self.p}")


def gn_check(t, g, gnp, gprime=None):
    """Evaluate both sides of the weighted interpolation inequality

        (t+a2)^{mu1+mu2} |g|^{p+3}
            <= C int (s+a2)^{mu2} |g|^{p+1} ds * int (s+a2)^{mu1} |g'|^2 ds

    on a uniformly sampled g.  Returns (max_lhs, rhs_product,
    implied_constant).  g' falls back to centered differences when no
    sampled derivative is supplied; traces should pass their tangential
    derivative to avoid compounding interpolation error.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    if t.size < 3:
        raise ConfigError("need at least 3 samples")
    if gprime is None:
        gprime = np.gradient(g, t)
    else:
        gprime = np.asarray(gprime, dtype=float)
    w = t + gnp.a2
    lhs = w ** (gnp.mu1 + gnp.mu2) * _abs_pow(g, gnp.p + 3.0)
    max_lhs = float(np.max(lhs))
    rhs1 = float(np.trapezoid(w**gnp.mu2 * _abs_pow(g, gnp.p + 1.0), t))
    rhs2 = float(np.trapezoid(w**gnp.mu1 * gprime * gprime, t))
    rhs_product = rhs1 * rhs2
    if rhs_product == 0.0:
        implied = 0.0 if max_lhs == 0.0 else np.inf
    else:
        implied = max_lhs / rhs_product
    return max_lhs, rhs_product, implied


def classical_gn_cap(p):
    """Provable constant for the classical interpolation inequality
    sup |g|^{p+3} <= C int |g|^{p+1} int |g'|^2 on the line: splitting the
    integral at the max point gives C = ((p+3)/4)^2."""
    return ((p + 3.0) / 4.0) ** 2


# ---------------------------------------------------------------------------
# Exponent catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentSet:
    """Decay exponents of the pointwise bounds, all positive as stored:
    the bounds read |phi| <= C (1+t+|x|)^{-e1} (1+|x|-t)^{-e2} outside the
    cone and |phi| <= C (1+t+|x|)^{-interior_t} (1+t-|x|)^{-interior_x}
    inside, with the uniform-in-x rate `uniform`."""

    exterior_pair: tuple
    interior_t: float
    interior_x: float
    uniform: float
    beta_half_consistent: bool
    symmetric_consistent: bool


def uniform_exponent(p):
    """(p-1)/((p+1)^2 + 4), the uniform time-decay rate."""
    return (p - 1.0) / ((p + 1.0) ** 2 + 4.0)


def exponent_catalog(params, mp):
    """Exponents implied by (p, alpha, beta) plus the two algebraic
    consistency checks: beta = 1/2 makes the interior time rate equal the
    uniform rate, and alpha = beta = (p+1)/(p+3) makes both interior rates
    equal (p-1)/(p+3)^2."""
    p = params.p
    ext = 1.0 / (p + 3.0)
    interior_t = (2.0 * mp.alpha - 1.0) / (p + 3.0)
    interior_x = (2.0 * mp.beta - 1.0) / (p + 3.0)
    uni = uniform_exponent(p)
    from .core import solve_alpha, symmetric_alpha

    beta_half = abs(
        (2.0 * solve_alpha(p, 0.5) - 1.0) / (p + 3.0) - uni
    ) < 1e-12
    sym = symmetric_alpha(p)
    symmetric = abs(
        (2.0 * sym - 1.0) / (p + 3.0) - (p - 1.0) / (p + 3.0) ** 2
    ) < 1e-12
    return ExponentSet(
        exterior_pair=(ext, ext),
        interior_t=interior_t,
        interior_x=interior_x,
        uniform=uni,
        beta_half_consistent=beta_half,
        symmetric_consistent=symmetric,
    )


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    t_lo: float
    t_hi: float
    slope: float
    intercept: float
    r_squared: float
    compared_exponent: float
    margin: float


def fit_loglog(t, values, window, compared_exponent=0.0):
    """Least squares of log(value) against log(1+t) on the window.

    margin = slope + compared_exponent is nonpositive when the series
    decays at least as fast as the comparison rate.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    t_lo, t_hi = window
    if not t_hi > t_lo >= 1.0:
        raise ConfigError(f"fit window must satisfy t_hi > t_lo >= 1, got {window}")
    m = (t >= t_lo - 1e-12) & (t <= t_hi + 1e-12)
    if int(np.sum(m)) < 20:
        raise ConfigError(f"fit window holds {int(np.sum(m))} points, need >= 20")
    if np.any(values[m] <= 0.0):
        raise ConfigError("fit requires positive values on the window")
    lx = np.log(1.0 + t[m])
    ly = np.log(values[m])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return RateFit(
        t_lo=float(t_lo),
        t_hi=float(t_hi),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        compared_exponent=float(compared_exponent),
        margin=float(slope) + float(compared_exponent),
    )


# ---------------------------------------------------------------------------
# Weighted sup bounds
# ---------------------------------------------------------------------------


def weighted_sup_slice(t, x, phi, exponents):
    """(exterior, interior) weighted sups of one time slice."""
    absx = np.abs(x)
    absphi = np.abs(phi)
    e1, e2 = exponents.exterior_pair
    ext_mask = absx >= t
    ext = 0.0
    if ext_mask.any():
        w = (1.0 + t + absx[ext_mask]) ** e1 * (1.0 + absx[ext_mask] - t) ** e2
        ext = float(np.max(absphi[ext_mask] * w))
    int_mask = ~ext_mask
    inner = 0.0
    if int_mask.any():
        w = (1.0 + t + absx[int_mask]) ** exponents.interior_t * (
            1.0 + t - absx[int_mask]
        ) ** exponents.interior_x
        inner = float(np.max(absphi[int_mask] * w))
    return ext, inner


def weighted_sup_bounds(snapshots, exponents):
    """Max of the weighted sups over an iterable of (t, x, phi) slices.
    Finiteness and stability under refinement stand in for the unknown
    constant in the pointwise decay bounds."""
    ext = 0.0
    inner = 0.0
    for t, x, phi in snapshots:
        e, i = weighted_sup_slice(t, np.asarray(x), np.asarray(phi), exponents)
        ext = max(ext, e)
        inner = max(inner, i)
    return ext, inner


class WeightedSupTracker:
    """Streaming version of weighted_sup_bounds for long runs."""

    def __init__(self, exponents):
        self.exponents = exponents
        self.exterior = 0.0
        self.interior = 0.0

    def update(self, frame):
        e, i = weighted_sup_slice(
            frame.t, frame.grid.x, frame.phi_0, self.exponents
        )
        self.exterior = max(self.exterior, e)
        self.interior = max(self.interior, i)
