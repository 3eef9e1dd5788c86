"""Stress-tensor fields, integral diagnostics, flux audits, and identity
residuals evaluated on the streaming solution.

All functions are pure consumers of immutable frames (three consecutive
time levels), so they can run in parallel across times, traces, and
multipliers.  Time derivatives are always reconstructed centered across
the frame's levels, keeping every diagnostic second order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Grid1D, evaluate_initial, initial_derivative
from .nullgeom import RegionSpec, cubic_sample, interval_weights, region_mask
from .solver import potential_density

MULTIPLIERS = ("dt", "scaling", "boost", "morawetz", "interior")
IDENTITIES = ("outgoing_null", "incoming_null", "morawetz", "interior")

# Fixed physical margin for the interior identity: its weights carry the
# negative powers u^(beta-2), v^(alpha-2), which amplify discretization
# error without bound as u, v -> 0.
INTERIOR_IDENTITY_MARGIN = 0.5


def _trapz(values, dx):
    return dx * (float(np.sum(values)) - 0.5 * float(values[0] + values[-1]))


# ---------------------------------------------------------------------------
# Stress tensor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StressRow:
    """Stress-tensor components and Q = box(phi^2) at one time level."""

    T00: np.ndarray
    T01: np.ndarray
    T11: np.ndarray
    Q: np.ndarray


def stress_fields(frame, params):
    """T00, T01, T11, Q from centered derivatives at the frame's middle
    level.  T00 - T11 equals twice the potential density and Q equals
    -2(L phi)(Lbar phi) + 2|phi|^{p+1} up to roundoff."""
    gt = frame.dtphi
    gx = frame.dxphi
    quad = 0.5 * (gt * gt + gx * gx)
    if params.nonlinearity_enabled:
        pot = potential_density(frame.phi_0, params.p)
    else:
        pot = np.zeros_like(frame.phi_0)
    return StressRow(
        T00=quad + pot,
        T01=gx * gt,
        T11=quad - pot,
        Q=-2.0 * gt * gt + 2.0 * gx * gx + 2.0 * (params.p + 1.0) * pot,
    )


def null_derivatives(frame):
    """(L phi, Lbar phi) arrays at the frame's middle level."""
    gt = frame.dtphi
    gx = frame.dxphi
    return gt + gx, gt - gx


# ---------------------------------------------------------------------------
# Per-slice norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    E_int: float
    E0_norm: float
    potential: float
    linf: float
    morawetz_inc: float
    morawetz_cum: float
    gn_ratio: float


DIAG_HEADER = "t,E_int,E0_norm,potential,linf,morawetz_inc,morawetz_cum,gn_ratio"


def norms_row(frame, params, morawetz_inc=0.0, morawetz_cum=0.0):
    """Energy integral, potential, sup norm, and the interpolation-inequality
    ratio at this slice.  E_int is the integral of T00, so twice its value
    plays the role of the conserved norm."""
    grid = frame.grid
    gt = frame.dtphi
    gx = frame.dxphi
    phi = frame.phi_0
    if params.nonlinearity_enabled:
        pot_density = (params.p + 1.0) * potential_density(phi, params.p)
    else:
        pot_density = np.zeros_like(phi)
    e_density = 0.5 * (gt * gt + gx * gx) + pot_density / (params.p + 1.0)
    e_int = _trapz(e_density, grid.dx)
    potential = _trapz(pot_density, grid.dx)
    grad2 = _trapz(gx * gx, grid.dx)
    linf = float(np.max(np.abs(phi)))
    denom = potential * grad2
    gn_ratio = linf ** (params.p + 3.0) / denom if denom > 0.0 else 0.0
    return DiagnosticsRow(
        t=frame.t,
        E_int=e_int,
        E0_norm=2.0 * e_int,
        potential=potential,
        linf=linf,
        morawetz_inc=morawetz_inc,
        morawetz_cum=morawetz_cum,
        gn_ratio=gn_ratio,
    )


def write_diagnostics_csv(path, rows, config_hash="", append=False):
    mode = "a" if append else "w"
    with open(path, mode) as fh:
        if not append:
            fh.write(f"# decaylab-diagnostics v1 config_hash={config_hash}\n")
            fh.write(DIAG_HEADER + "\n")
        for r in rows:
            fh.write(
                f"{r.t!r},{r.E_int!r},{r.E0_norm!r},{r.potential!r},"
                f"{r.linf!r},{r.morawetz_inc!r},{r.morawetz_cum!r},{r.gn_ratio!r}\n"
            )


def read_diagnostics_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("t,"):
                continue
            vals = [float(v) for v in line.split(",")]
            rows.append(DiagnosticsRow(*vals))
    return rows


# ---------------------------------------------------------------------------
# Weighted initial energy
# ---------------------------------------------------------------------------


def weighted_initial_energy(spec, grid, gamma, params):
    """Weighted norm of the initial data,

        int (1+|x|)^gamma (|phi0'|^2 + |phi1|^2 + 2|phi0|^{p+1}/(p+1)) dx,

    with the analytic derivative of the data family, so the trapezoid sum
    converges at quadrature accuracy rather than finite-difference accuracy.
    """
    x = grid.x
    phi0, phi1 = evaluate_initial(spec, x)
    d0 = initial_derivative(spec, x)
    if params.nonlinearity_enabled:
        pot = 2.0 * potential_density(phi0, params.p)
    else:
        pot = np.zeros_like(phi0)
    integrand = (1.0 + np.abs(x)) ** gamma * (d0 * d0 + phi1 * phi1 + pot)
    return _trapz(integrand, grid.dx)


# ---------------------------------------------------------------------------
# Morawetz and averaged potential
# ---------------------------------------------------------------------------


def morawetz_integral(frame, params):
    """Spatial integral of ((t+1)^2 - x^2) |phi|^{p+1} / (t+1)^3 over the
    cone slice |x| <= t + 1."""
    grid = frame.grid
    ts = frame.t + 1.0
    w = interval_weights(grid, -ts, ts)
    x = grid.x
    weight = np.maximum(ts * ts - x * x, 0.0) / (ts * ts * ts)
    dens = (params.p + 1.0) * potential_density(frame.phi_0, params.p)
    return float(np.sum(w * weight * dens))


def morawetz_step(frame, params, dt_eff, cumulative):
    """One accumulation step of the cone-weighted potential integral;
    nonnegative by construction, so the cumulative value is nondecreasing."""
    if not params.nonlinearity_enabled:
        return 0.0, cumulative
    inc = dt_eff * morawetz_integral(frame, params)
    return inc, cumulative + inc


def potential_in_cone(frame, params, R):
    """Integral of |phi|^{p+1} over |x| <= t + R at the frame's time."""
    w = interval_weights(frame.grid, -frame.t - R, frame.t + R)
    dens = (params.p + 1.0) * potential_density(frame.phi_0, params.p)
    return float(np.sum(w * dens))


def averaged_potential(times, cone_values, T):
    """(1/T) times the time integral of the cone-restricted potential up
    to T, by trapezoid over the sampled series."""
    times = np.asarray(times)
    cone_values = np.asarray(cone_values)
    if T <= 0.0:
        raise ConfigError("averaging horizon must be positive")
    if times[-1] < T - 1e-9:
        raise ConfigError(f"history covers t <= {times[-1]}, need T = {T}")
    m = times <= T + 1e-12
    return float(np.trapezoid(cone_values[m], times[m])) / T


# ---------------------------------------------------------------------------
# Null-line flux estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxReport:
    """Truncated flux integral against its bound (5% quadrature slack)."""

    value: float
    bound: float
    satisfied: bool
    slack: float = 0.05


def null_flux_exterior(trace, params, bound, variant="weighted"):
    """Accumulate the flux integral along an exterior null line.

    variant 'weighted' integrates
        2(a+1)/(p+1) |phi|^{p+1} + (2t + a + 1) |Dphi|^2
    whose bound is the weight-1 initial norm; variant 'energy' integrates
        |Dphi|^2 / 2 + |phi|^{p+1}/(p+1)
    whose bound is half the conserved norm.
    """
    t = trace.times
    phi = trace.phi
    dphi = trace.dphi
    p = params.p
    if params.nonlinearity_enabled:
        pot = (p + 1.0) * potential_density(phi, p)
    else:
        pot = np.zeros_like(phi)
    if variant == "weighted":
        integrand = 2.0 * (trace.a + 1.0) / (p + 1.0) * pot + (
            2.0 * t + trace.a + 1.0
        ) * dphi * dphi
    elif variant == "energy":
        integrand = 0.5 * dphi * dphi + pot / (p + 1.0)
    else:
        raise ConfigError(f"unknown flux variant {variant!r}")
    value = float(np.trapezoid(integrand, t))
    return FluxReport(value=value, bound=bound, satisfied=value <= bound * 1.05)


@dataclass(frozen=True)
class InteriorFluxReport:
    a: float
    grad_part: float
    potential_part: float

    @property
    def total(self):
        return self.grad_part + self.potential_part


def interior_flux(trace, params, mp):
    """Weighted flux along an interior outgoing line x = t - a for t >= a:

        int (a+1)^{beta-1} (t+1)^alpha (L phi)^2
          + (a+1)^{beta}   (t+1)^{alpha-1} |phi|^{p+1} dt

    Uniform boundedness of the reported sums across offsets is the claim
    under audit; no sharp constant is attached.
    """
    if trace.direction != "interior_outgoing":
        raise ConfigError("interior flux needs an interior_outgoing trace")
    t = trace.times
    a = trace.a
    wgrad = (a + 1.0) ** (mp.beta - 1.0) * (t + 1.0) ** mp.alpha
    wpot = (a + 1.0) ** mp.beta * (t + 1.0) ** (mp.alpha - 1.0)
    pot = (params.p + 1.0) * potential_density(trace.phi, params.p)
    grad_part = float(np.trapezoid(wgrad * trace.dphi * trace.dphi, t))
    pot_part = float(np.trapezoid(wpot * pot, t))
    return InteriorFluxReport(a=a, grad_part=grad_part, potential_part=pot_part)


# ---------------------------------------------------------------------------
# Frame histories
# ---------------------------------------------------------------------------


class StateHistory:
    """Uniformly spaced frames, possibly restricted to an x window."""

    def __init__(self, frames):
        if len(frames) < 3:
            raise ConfigError("history needs at least 3 frames (5 time levels)")
        self.frames = frames
        self.times = np.array([f.t for f in frames])
        steps = np.diff(self.times)
        if steps.size and (np.max(steps) - np.min(steps)) > 1e-9:
            raise ConfigError("history frames must be uniformly spaced")
        self.spacing = float(steps[0]) if steps.size else 0.0

    @property
    def grid(self):
        return self.frames[0].grid


class HistoryCollector:
    """Accumulates frames restricted to [x_lo, x_hi] every `cadence` steps
    within [t_start, t_end]."""

    def __init__(self, grid, t_start, t_end, cadence=1, x_lo=None, x_hi=None):
        self.t_start = t_start
        self.t_end = t_end
        self.cadence = cadence
        x_lo = grid.x_min if x_lo is None else x_lo
        x_hi = grid.x_max if x_hi is None else x_hi
        self.j_lo = max(int(np.ceil((x_lo - grid.x_min) / grid.dx - 1e-9)), 0)
        self.j_hi = min(
            int(np.floor((x_hi - grid.x_min) / grid.dx + 1e-9)), grid.n - 1
        )
        if self.j_hi - self.j_lo + 1 < 8:
            raise ConfigError("history x window too narrow")
        self.frames = []

    def update(self, frame, step_index):
        from .solver import Frame

        if step_index % self.cadence:
            return
        if frame.t < self.t_start - 1e-9 or frame.t > self.t_end + 1e-9:
            return
        g = frame.grid
        sub = Grid1D(
            x_min=g.x_min + self.j_lo * g.dx,
            dx=g.dx,
            n=self.j_hi - self.j_lo + 1,
            dt=g.dt,
            t=frame.t,
            step_index=g.step_index,
            n_pad=g.n_pad,
        )
        sl = slice(self.j_lo, self.j_hi + 1)
        self.frames.append(
            Frame(sub, frame.t, frame.phi_m[sl].copy(), frame.phi_0[sl].copy(),
                  frame.phi_p[sl].copy())
        )

    def history(self):
        return StateHistory(self.frames)


# ---------------------------------------------------------------------------
# Multiplier flux audits
# ---------------------------------------------------------------------------


def _safe_pow(base, expo):
    """base**expo for positive base, zero where base <= 0 (keeps the
    fractional-power weights from poisoning masked-out nodes with NaN)."""
    positive = base > 0.0
    out = np.zeros_like(base)
    out[positive] = base[positive] ** expo
    return out


def multiplier_currents(multiplier, frame, params, mp):
    """Current components (J0, J1) and analytic bulk source S with
    dt J0 - dx J1 = S on solutions, for each cataloged multiplier."""
    if multiplier not in MULTIPLIERS:
        raise ConfigError(f"unknown multiplier {multiplier!r}")
    p = params.p
    s = stress_fields(frame, params)
    x = frame.grid.x
    t = frame.t
    if multiplier == "dt":
        return s.T00, s.T01, np.zeros_like(s.T00)
    if multiplier == "scaling":
        w = t + mp.R
        J0 = w * s.T00 + x * s.T01
        J1 = w * s.T01 + x * s.T11
        return J0, J1, s.T00 - s.T11
    if multiplier == "boost":
        J0 = (x + 1.0) * s.T00 + t * s.T01
        J1 = (x + 1.0) * s.T01 + t * s.T11
        return J0, J1, np.zeros_like(J0)
    lphi, lbphi = null_derivatives(frame)
    if params.nonlinearity_enabled:
        pot = potential_density(frame.phi_0, p)
    else:
        pot = np.zeros_like(frame.phi_0)
    u = t + 1.0 - x
    v = t + 1.0 + x
    if multiplier == "morawetz":
        ts = t + 1.0
        P3 = (u * u * lbphi * lbphi + 2.0 * v * v * pot) / (ts * ts)
        P4 = (v * v * lphi * lphi + 2.0 * u * u * pot) / (ts * ts)
        cross = u * lbphi - v * lphi
        # |phi|^{p+1}/(p+1) is pot, so the 4(p-1)/(p+1)|phi|^{p+1} term
        # reduces to 4(p-1) pot
        S = (
            2.0 * u * v * s.Q / ts**3
            - 2.0 * cross * cross / ts**3
            - 4.0 * (p - 1.0) * u * v * pot / ts**3
        )
        return P3 + P4, P4 - P3, S
    # interior weighted field
    a, b = mp.alpha, mp.beta
    ub = _safe_pow(u, b)
    ubm1 = _safe_pow(u, b - 1.0)
    ubm2 = _safe_pow(u, b - 2.0)
    va = _safe_pow(v, a)
    vam1 = _safe_pow(v, a - 1.0)
    vam2 = _safe_pow(v, a - 2.0)
    P1 = ub * vam1 * lbphi * lbphi / b + 2.0 * ubm1 * va * pot / a
    P2 = ubm1 * va * lphi * lphi / a + 2.0 * ub * vam1 * pot / b
    cross = np.sqrt((1.0 - b) / a) * v * lphi - np.sqrt((1.0 - a) / b) * u * lbphi
    S = (
        4.0 / (p + 1.0) * ubm1 * vam1 * s.Q
        - 2.0 * ubm2 * vam2 * cross * cross
    )
    return P1 + P2, P2 - P1, S


@dataclass(frozen=True)
class FluxAuditReport:
    """Stokes closure of a multiplier identity on a region: the boundary
    fluxes must balance the analytic bulk source."""

    multiplier: str
    region: RegionSpec
    bulk_source: float
    bulk_divergence: float
    segment_fluxes: dict
    boundary_total: float
    residual: float
    scale: float


def _time_weight_grid(times):
    return Grid1D(x_min=float(times[0]), dx=float(times[1] - times[0]),
                  n=len(times), dt=1.0)


def _frame_pair_at(times, tau):
    """Indices and linear weights of the frames bracketing time tau."""
    if tau <= times[0] + 1e-12:
        return [(0, 1.0)]
    if tau >= times[-1] - 1e-12:
        return [(len(times) - 1, 1.0)]
    k = int(np.searchsorted(times, tau - 1e-12)) - 1
    k = min(max(k, 0), len(times) - 2)
    theta = (tau - times[k]) / (times[k + 1] - times[k])
    if theta < 1e-9:
        return [(k, 1.0)]
    if theta > 1.0 - 1e-9:
        return [(k + 1, 1.0)]
    return [(k, 1.0 - theta), (k + 1, theta)]


def multiplier_flux_audit(history, multiplier, region, params, mp):
    """Integrate the discrete divergence, the analytic source, and the
    boundary fluxes of a multiplier identity over a region; the closure
    residual |boundary - bulk source| converges at second order."""
    frames = history.frames
    times = history.times
    h = history.spacing
    grid = history.grid
    t0, t1 = region.t_span()
    if t0 < times[0] - 1e-9 or t1 > times[-1] + 1e-9:
        raise ConfigError(
            f"region spans t in [{t0}, {t1}] but history covers "
            f"[{times[0]}, {times[-1]}]"
        )
    margin = 2.0 * grid.dx
    for tau in np.linspace(t0, t1, 17):
        section = region.cross_section(min(max(tau, t0), t1))
        if section is None:
            continue
        if section[0] < grid.x_min + margin or section[1] > grid.x_max - margin:
            raise ConfigError("region exits the history's x window")

    currents = [multiplier_currents(multiplier, f, params, mp) for f in frames]
    tw = interval_weights(_time_weight_grid(times), t0, t1)
    contributing = np.nonzero(tw)[0]

    bulk_source = 0.0
    bulk_div = 0.0
    scale = 0.0
    k_lo, k_hi = contributing[0], contributing[-1]
    for k in contributing:
        mask = region_mask(grid, times[k], region)
        J0, J1, S = currents[k]
        bulk_source += tw[k] * float(np.sum(mask * S))
        scale += tw[k] * float(np.sum(mask * np.abs(S)))
        if k == 0:
            dtJ0 = (-3.0 * J0 + 4.0 * currents[1][0] - currents[2][0]) / (2.0 * h)
        elif k == len(frames) - 1:
            dtJ0 = (3.0 * J0 - 4.0 * currents[k - 1][0] + currents[k - 2][0]) / (
                2.0 * h
            )
        else:
            dtJ0 = (currents[k + 1][0] - currents[k - 1][0]) / (2.0 * h)
        dxJ1 = np.zeros_like(J1)
        dxJ1[1:-1] = (J1[2:] - J1[:-2]) / (2.0 * grid.dx)
        bulk_div += tw[k] * float(np.sum(mask * (dtJ0 - dxJ1)))

    segment_fluxes = {}
    for name, kind, sign, payload in region.segments():
        if kind == "tslice":
            (tau,) = payload
            mask = region_mask(grid, min(max(tau, t0), t1), region)
            val = 0.0
            for k, wk in _frame_pair_at(times, tau):
                val += wk * float(np.sum(mask * currents[k][0]))
            segment_fluxes[name] = sign * val
            continue
        const, s0, s1 = payload
        seg_w = interval_weights(_time_weight_grid(times), s0, s1)
        val = 0.0
        for k in np.nonzero(seg_w)[0]:
            tk = times[k]
            if kind == "outgoing":
                xq = tk + const
            elif kind == "incoming":
                xq = const - tk
            else:
                xq = const
            J0, J1, _ = currents[k]
            j0 = cubic_sample(J0, grid.x_min, grid.dx, xq)
            j1 = cubic_sample(J1, grid.x_min, grid.dx, xq)
            if kind == "outgoing":
                val += seg_w[k] * (j0 + j1)
            elif kind == "incoming":
                val += seg_w[k] * (j0 - j1)
            else:
                val += seg_w[k] * j1
        segment_fluxes[name] = sign * val

    boundary_total = sum(segment_fluxes.values())
    residual = abs(boundary_total - bulk_source)
    scale = max(scale, abs(boundary_total), 1e-30)
    return FluxAuditReport(
        multiplier=multiplier,
        region=region,
        bulk_source=bulk_source,
        bulk_divergence=bulk_div,
        segment_fluxes=segment_fluxes,
        boundary_total=boundary_total,
        residual=residual,
        scale=scale,
    )


# ---------------------------------------------------------------------------
# Pointwise identity residuals
# ---------------------------------------------------------------------------


def _identity_pair(identity, frame, params, mp):
    """Per-frame fields (A, B, extra) whose null derivatives enter the
    identity; see pointwise_identity_residual."""
    p = params.p
    lphi, lbphi = null_derivatives(frame)
    if params.nonlinearity_enabled:
        pot = potential_density(frame.phi_0, p)
    else:
        pot = np.zeros_like(frame.phi_0)
    if identity == "outgoing_null":
        return lbphi * lbphi, (p + 1.0) * pot
    if identity == "incoming_null":
        return lphi * lphi, (p + 1.0) * pot
    # P-combination identities share their currents with the audits
    which = "morawetz" if identity == "morawetz" else "interior"
    J0, J1, S = multiplier_currents(which, frame, params, mp)
    # recover P_a = (J0 - J1)/2 (coefficient of L) and P_b = (J0 + J1)/2
    return 0.5 * (J0 - J1), 0.5 * (J0 + J1), S


def _null_deriv_of(fields, k, h, dx, sign):
    """(dt +- dx) of a per-frame field list at interior frame k."""
    dt_f = (fields[k + 1] - fields[k - 1]) / (2.0 * h)
    dx_f = np.zeros_like(fields[k])
    dx_f[1:-1] = (fields[k][2:] - fields[k][:-2]) / (2.0 * dx)
    return dt_f + sign * dx_f


def pointwise_identity_residual(history, identity, params, mp=None):
    """Max |LHS - RHS| of a null-frame identity over the history window.

    identities:
      outgoing_null   L (Lbar phi)^2 + 2/(p+1) Lbar |phi|^{p+1} = 0
      incoming_null   Lbar (L phi)^2 + 2/(p+1) L |phi|^{p+1} = 0
      morawetz        L P3 + Lbar P4 = S  (cone-weighted combination,
                      evaluated on |x| <= t + 1)
      interior        L P1 + Lbar P2 = S  (evaluated on u, v >= 1/2; the
                      weights are singular as u, v -> 0)
    Both sides are formed with centered differences on the numerical
    solution, so the residual shrinks at the discretization order.
    """
    if identity not in IDENTITIES:
        raise ConfigError(f"unknown identity {identity!r}")
    frames = history.frames
    if len(frames) < 3:
        raise ConfigError("identity residual needs at least 3 frames")
    h = history.spacing
    grid = history.grid
    dx = grid.dx
    x = grid.x
    p = params.p

    per_frame = [_identity_pair(identity, f, params, mp) for f in frames]
    worst = 0.0
    for k in range(1, len(frames) - 1):
        t = frames[k].t
        if identity == "outgoing_null":
            A = [pf[0] for pf in per_frame]
            B = [pf[1] for pf in per_frame]
            res = _null_deriv_of(A, k, h, dx, +1.0) + (2.0 / (p + 1.0)) * (
                _null_deriv_of(B, k, h, dx, -1.0)
            )
            mask = np.ones_like(x, dtype=bool)
        elif identity == "incoming_null":
            A = [pf[0] for pf in per_frame]
            B = [pf[1] for pf in per_frame]
            res = _null_deriv_of(A, k, h, dx, -1.0) + (2.0 / (p + 1.0)) * (
                _null_deriv_of(B, k, h, dx, +1.0)
            )
            mask = np.ones_like(x, dtype=bool)
        else:
            Pa = [pf[0] for pf in per_frame]
            Pb = [pf[1] for pf in per_frame]
            S = per_frame[k][2]
            res = (
                _null_deriv_of(Pa, k, h, dx, +1.0)
                + _null_deriv_of(Pb, k, h, dx, -1.0)
                - S
            )
            if identity == "morawetz":
                mask = np.abs(x) <= t + 1.0
            else:
                u = t + 1.0 - x
                v = t + 1.0 + x
                mask = (u >= INTERIOR_IDENTITY_MARGIN) & (
                    v >= INTERIOR_IDENTITY_MARGIN
                )
        mask[:2] = False
        mask[-2:] = False
        if mask.any():
            worst = max(worst, float(np.max(np.abs(res[mask]))))
    return worst


def interior_identity_rhs(history, params, mp):
    """The interior combination's right-hand side on the evaluation region;
    minus a square times positive weights, so never positive."""
    out = []
    for frame in history.frames:
        lphi, lbphi = null_derivatives(frame)
        x = frame.grid.x
        u = frame.t + 1.0 - x
        v = frame.t + 1.0 + x
        a, b = mp.alpha, mp.beta
        cross = np.sqrt((1.0 - b) / a) * v * lphi - np.sqrt((1.0 - a) / b) * u * lbphi
        rhs = -2.0 * _safe_pow(u, b - 2.0) * _safe_pow(v, a - 2.0) * cross * cross
        mask = (u >= INTERIOR_IDENTITY_MARGIN) & (v >= INTERIOR_IDENTITY_MARGIN)
        out.append(rhs[mask])
    return np.concatenate(out)
