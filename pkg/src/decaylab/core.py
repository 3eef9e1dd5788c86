"""Model parameters, grids, and initial-data families.

Everything in this module is a pure function of its inputs, so values can
be shared read-only across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

# Effective-support cutoff for rapidly decaying (non-compact) data.  Keeps
# Gaussian tails below quadrature noise when sizing domains.
TAIL_THRESHOLD = 1e-14
DEFAULT_PAD = 0.04
DEFAULT_CFL = 0.5
MAX_NODES = 1 << 25
MAX_RANDOM_BUMPS = 8

VALID_KINDS = ("gaussian", "bump", "packet", "table", "random_bumps")


class ConfigError(ValueError):
    """Invalid parameter, grid, or initial-data input."""


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Nonlinearity exponent; with the flag off the evolution is the free wave."""

    p: float
    nonlinearity_enabled: bool = True

    def __post_init__(self):
        if self.nonlinearity_enabled and not self.p > 1.0:
            raise ConfigError(f"nonlinearity exponent p must exceed 1, got {self.p}")


def multiplier_constraint_residual(p, alpha, beta):
    """(1/alpha - 1)(1/beta - 1) - 4/(p+1)^2; zero for admissible pairs."""
    return (1.0 / alpha - 1.0) * (1.0 / beta - 1.0) - 4.0 / (p + 1.0) ** 2


@dataclass(frozen=True)
class MultiplierParams:
    """Weight exponents of the decay estimates plus the scaling-field offset R."""

    alpha: float
    beta: float
    gamma: float = 1.0
    R: float = 1.0

    def __post_init__(self):
        if not 0.5 <= self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in [1/2, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if self.gamma < 0.0:
            raise ConfigError(f"gamma must be nonnegative, got {self.gamma}")
        if self.R <= 0.0:
            raise ConfigError(f"R must be positive, got {self.R}")


def solve_beta(p, alpha):
    """Solve the coupling (1/a-1)(1/b-1) = 4/(p+1)^2 for beta given alpha."""
    s = 1.0 / alpha - 1.0
    if s <= 0.0:
        raise ConfigError(f"alpha must be below 1 to solve for beta, got {alpha}")
    return 1.0 / (1.0 + 4.0 / ((p + 1.0) ** 2 * s))


def solve_alpha(p, beta):
    """Solve the coupling for alpha given beta; symmetric to solve_beta."""
    return solve_beta(p, beta)


def symmetric_alpha(p):
    """The alpha = beta solution of the coupling, (p+1)/(p+3)."""
    return (p + 1.0) / (p + 3.0)


def validate_params(raw):
    """Resolve a raw key/value mapping into (ModelParams, MultiplierParams).

    If exactly one of alpha/beta is given the other is solved from the
    coupling constraint.  With both absent (or cross-referenced, e.g.
    alpha: "beta") the symmetric solution alpha = beta = (p+1)/(p+3) is
    used.  Defaults: gamma = 1, R = 1.
    """
    if "p" not in raw or raw["p"] is None:
        raise ConfigError("missing required key: p")
    try:
        p = float(raw["p"])
    except (TypeError, ValueError):
        raise ConfigError(f"p must be a number, got {raw['p']!r}") from None
    nl = bool(raw.get("nonlinearity_enabled", True))
    params = ModelParams(p=p, nonlinearity_enabled=nl)

    alpha_raw = raw.get("alpha")
    beta_raw = raw.get("beta")
    cross = {"alpha", "beta"}
    if isinstance(alpha_raw, str) and alpha_raw not in cross:
        raise ConfigError(f"alpha must be a number or 'beta', got {alpha_raw!r}")
    if isinstance(beta_raw, str) and beta_raw not in cross:
        raise ConfigError(f"beta must be a number or 'alpha', got {beta_raw!r}")
    symmetric = (alpha_raw is None or alpha_raw == "beta") and (
        beta_raw is None or beta_raw == "alpha"
    )

    if symmetric and alpha_raw is None and beta_raw is None:
        alpha = beta = symmetric_alpha(p)
    elif symmetric:
        alpha = beta = symmetric_alpha(p)
    elif alpha_raw is None or alpha_raw == "beta":
        beta = float(beta_raw)
        if not 0.0 < beta < 1.0:
            raise ConfigError(f"beta must lie in (0, 1), got {beta}")
        alpha = solve_alpha(p, beta)
        if not 0.5 <= alpha < 1.0:
            raise ConfigError(
                f"alpha solved from beta={beta} is {alpha}, outside [1/2, 1)"
            )
    elif beta_raw is None or beta_raw == "alpha":
        alpha = float(alpha_raw)
        if not 0.5 <= alpha < 1.0:
            raise ConfigError(f"alpha must lie in [1/2, 1), got {alpha}")
        beta = solve_beta(p, alpha)
        if not 0.0 < beta < 1.0:
            raise ConfigError(
                f"beta solved from alpha={alpha} is {beta}, outside (0, 1)"
            )
    else:
        alpha = float(alpha_raw)
        beta = float(beta_raw)
        res = multiplier_constraint_residual(p, alpha, beta)
        if abs(res) > 1e-9:
            raise ConfigError(
                f"alpha={alpha}, beta={beta} violate the coupling constraint "
                f"by {res:.3e} (tolerance 1e-9); omit one to have it solved"
            )

    gamma = float(raw.get("gamma", 1.0))
    R = float(raw.get("R", 1.0))
    mp = MultiplierParams(alpha=alpha, beta=beta, gamma=gamma, R=R)
    return params, mp


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid with the run clock (t, step_index) attached."""

    x_min: float
    dx: float
    n: int
    dt: float
    t: float = 0.0
    step_index: int = 0
    n_pad: int = 4

    def __post_init__(self):
        if self.dx <= 0.0 or self.dt <= 0.0:
            raise ConfigError("dx and dt must be positive")
        if self.n < 5:
            raise ConfigError(f"grid needs at least 5 nodes, got {self.n}")

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def x_max(self):
        return self.x_min + self.dx * (self.n - 1)

    @property
    def cfl(self):
        return self.dt / self.dx

    def advanced(self, steps=1):
        """Clock moved forward; t recomputed from the step count so repeated
        runs agree bitwise."""
        k = self.step_index + steps
        return replace(self, t=k * self.dt, step_index=k)


def build_grid(spec, t_end, dx, cfl=DEFAULT_CFL, pad=None, max_nodes=MAX_NODES):
    """Size a grid so the light cone of the data never reaches the pad band.

    The domain covers [-(D0 + t_end + pad), D0 + t_end + pad] where D0 is
    the data's support radius about the origin; n is odd so x = 0 is a node.
    """
    if t_end < 0.0:
        raise ConfigError(f"t_end must be nonnegative, got {t_end}")
    if dx <= 0.0:
        raise ConfigError(f"dx must be positive, got {dx}")
    if not 0.0 < cfl <= 1.0:
        raise ConfigError(f"cfl must lie in (0, 1], got {cfl}")
    if pad is None:
        pad = max(DEFAULT_PAD, 4.0 * dx)
    if pad < 4.0 * dx - 1e-12:
        raise ConfigError(f"pad must be at least 4*dx = {4 * dx}, got {pad}")
    half = domain_radius(spec) + t_end + pad
    m = int(math.ceil(half / dx - 1e-9))
    n = 2 * m + 1
    if n > max_nodes:
        raise ConfigError(f"grid of {n} nodes exceeds the cap of {max_nodes}")
    n_pad = max(4, int(round(pad / dx - 1e-9)))
    return Grid1D(x_min=-m * dx, dx=dx, n=n, dt=cfl * dx, n_pad=n_pad)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialDataSpec:
    """Parametric family generating the initial position and velocity.

    kinds:
      gaussian     phi0 = A exp(-(x-c)^2 / (2 w^2)),      phi1 = 0
      bump         compactly supported C^inf bump on [c-w, c+w], phi1 = 0
      packet       gaussian phi0 with phi1 = -v * phi0'; v = 1 gives an
                   exact right-mover for the free equation
      table        sampled (x, phi0, phi1) rows, monotone cubic interpolation
      random_bumps seed-deterministic sum of at most 8 disjoint bumps
    """

    kind: str
    amplitude: float = 1.0
    width: float = 1.0
    center: float = 0.0
    velocity: float = 0.0
    seed: int = 0
    table: tuple = None

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ConfigError(f"unknown initial-data kind {self.kind!r}")
        if self.width <= 0.0:
            raise ConfigError(f"width must be positive, got {self.width}")
        if not -1.0 <= self.velocity <= 1.0:
            raise ConfigError(f"velocity must lie in [-1, 1], got {self.velocity}")
        if self.kind == "table":
            if not self.table:
                raise ConfigError("table kind requires table rows")
            xs = [row[0] for row in self.table]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ConfigError("table rows must be strictly increasing in x")


def table_from_arrays(x, phi0, phi1):
    """Pack sampled columns into the row tuple an InitialDataSpec expects."""
    return tuple(
        (float(a), float(b), float(c)) for a, b, c in zip(x, phi0, phi1)
    )


def _bump_profile(s):
    """exp(1 - 1/(1-s^2)) inside |s| < 1, exactly zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out


def _bump_profile_deriv(s):
    """d/ds of the bump profile; zero outside the support."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    q = 1.0 - si * si
    out[inside] = np.exp(1.0 - 1.0 / q) * (-2.0 * si / (q * q))
    return out


def _random_bump_set(spec):
    """Deterministic list of (amplitude, center, half_width) sub-bumps.

    At most MAX_RANDOM_BUMPS bumps confined to disjoint slots of
    [center - width, center + width].
    """
    rng = np.random.default_rng(spec.seed)
    count = int(rng.integers(1, MAX_RANDOM_BUMPS + 1))
    slots = np.sort(rng.choice(MAX_RANDOM_BUMPS, size=count, replace=False))
    slot_width = 2.0 * spec.width / MAX_RANDOM_BUMPS
    bumps = []
    for slot in slots:
        left = spec.center - spec.width + slot * slot_width
        half = 0.5 * slot_width * rng.uniform(0.35, 0.85)
        jitter = rng.uniform(-1.0, 1.0) * (0.5 * slot_width - half)
        ctr = left + 0.5 * slot_width + jitter
        amp = spec.amplitude * rng.uniform(0.3, 1.0) * rng.choice((-1.0, 1.0))
        bumps.append((amp, ctr, half))
    return bumps


def _table_interpolants(spec):
    xs = np.array([row[0] for row in spec.table])
    p0 = np.array([row[1] for row in spec.table])
    p1 = np.array([row[2] for row in spec.table])
    return xs, PchipInterpolator(xs, p0), PchipInterpolator(xs, p1)


def evaluate_initial(spec, x):
    """Nodewise (phi0, phi1) for the family at positions x."""
    x = np.asarray(x, dtype=float)
    a, w, c = spec.amplitude, spec.width, spec.center
    if spec.kind == "gaussian":
        phi0 = a * np.exp(-((x - c) ** 2) / (2.0 * w * w))
        return phi0, np.zeros_like(x)
    if spec.kind == "bump":
        return a * _bump_profile((x - c) / w), np.zeros_like(x)
    if spec.kind == "packet":
        phi0 = a * np.exp(-((x - c) ** 2) / (2.0 * w * w))
        dphi0 = -(x - c) / (w * w) * phi0
        return phi0, -spec.velocity * dphi0
    if spec.kind == "table":
        xs, f0, f1 = _table_interpolants(spec)
        inside = (x >= xs[0]) & (x <= xs[-1])
        phi0 = np.where(inside, f0(np.clip(x, xs[0], xs[-1])), 0.0)
        phi1 = np.where(inside, f1(np.clip(x, xs[0], xs[-1])), 0.0)
        return phi0, phi1
    # random_bumps
    phi0 = np.zeros_like(x)
    for amp, ctr, half in _random_bump_set(spec):
        phi0 += amp * _bump_profile((x - ctr) / half)
    return phi0, np.zeros_like(x)


def initial_derivative(spec, x):
    """Analytic d(phi0)/dx at positions x (table kind differentiates the
    interpolant)."""
    x = np.asarray(x, dtype=float)
    a, w, c = spec.amplitude, spec.width, spec.center
    if spec.kind in ("gaussian", "packet"):
        phi0 = a * np.exp(-((x - c) ** 2) / (2.0 * w * w))
        return -(x - c) / (w * w) * phi0
    if spec.kind == "bump":
        return (a / w) * _bump_profile_deriv((x - c) / w)
    if spec.kind == "table":
        xs, f0, _ = _table_interpolants(spec)
        inside = (x >= xs[0]) & (x <= xs[-1])
        return np.where(inside, f0.derivative()(np.clip(x, xs[0], xs[-1])), 0.0)
    out = np.zeros_like(x)
    for amp, ctr, half in _random_bump_set(spec):
        out += (amp / half) * _bump_profile_deriv((x - ctr) / half)
    return out


def support_radius(spec):
    """Smallest r with |phi0|, |phi1| below TAIL_THRESHOLD outside
    [center - r, center + r]; exact for compact kinds."""
    a = abs(spec.amplitude)
    if spec.kind == "bump":
        return spec.width if a > 0.0 else 0.0
    if spec.kind == "random_bumps":
        bumps = _random_bump_set(spec)
        if a == 0.0 or not bumps:
            return 0.0
        return max(abs(ctr - spec.center) + half for _, ctr, half in bumps)
    if spec.kind == "table":
        return max(abs(spec.table[0][0]), abs(spec.table[-1][0]))
    if a <= TAIL_THRESHOLD:
        return 0.0
    w = spec.width
    r = w * math.sqrt(2.0 * math.log(a / TAIL_THRESHOLD))
    if spec.kind == "gaussian" or spec.velocity == 0.0:
        return r
    # packet: phi1 = v (x-c)/w^2 phi0 has a slightly wider tail; grow r until
    # the envelope drops below threshold (monotone out there, few iterations)
    def tail(rr):
        return a * max(1.0, abs(spec.velocity) * rr / (w * w)) * math.exp(
            -rr * rr / (2.0 * w * w)
        )

    while tail(r) > TAIL_THRESHOLD:
        r += 0.0625 * w
    return r


def domain_radius(spec):
    """Smallest D with the data supported in [-D, D]."""
    if spec.kind == "table":
        return support_radius(spec)
    return abs(spec.center) + support_radius(spec)


def sample_initial_data(spec, grid):
    """Evaluate the family on the grid nodes; same spec and grid always
    produce identical arrays."""
    phi0, phi1 = evaluate_initial(spec, grid.x)
    return phi0, phi1


# ---------------------------------------------------------------------------
# Field state
# ---------------------------------------------------------------------------


@dataclass
class FieldState:
    """Two time levels of the field: phi_curr at grid.t, phi_prev at
    grid.t - grid.dt.  window, when set, is the inclusive index span of
    the (exactly tracked) support."""

    phi_prev: np.ndarray
    phi_curr: np.ndarray
    grid: Grid1D
    window: tuple = None

    def __post_init__(self):
        if len(self.phi_prev) != self.grid.n or len(self.phi_curr) != self.grid.n:
            raise ConfigError("field arrays must match the grid node count")


def active_window(phi_prev, phi_curr):
    """Inclusive index span where either level is nonzero, or None."""
    nz = np.nonzero((phi_prev != 0.0) | (phi_curr != 0.0))[0]
    if nz.size == 0:
        return None
    return int(nz[0]), int(nz[-1])


def boundary_band_max(state):
    """Largest |phi| over the outermost pad band, both levels."""
    k = state.grid.n_pad
    return max(
        float(np.max(np.abs(state.phi_curr[:k]))),
        float(np.max(np.abs(state.phi_curr[-k:]))),
        float(np.max(np.abs(state.phi_prev[:k]))),
        float(np.max(np.abs(state.phi_prev[-k:]))),
    )
