"""Null coordinates, characteristic traces, and spacetime region bookkeeping.

The null coordinates are u = t + 1 - x and v = t + 1 + x, with the null
frame derivatives L = dt + dx (outgoing) and Lbar = dt - dx (incoming).
Characteristic traces sample the field and its tangential derivative along
lines x = t + a, x = -t - a, or x = t - a, one sample per time step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError

DIRECTIONS = ("outgoing", "incoming", "interior_outgoing")
REGION_KINDS = ("sigma", "exterior_D", "interior_R", "rect")


@dataclass(frozen=True)
class NullPoint:
    u: float
    v: float
    t: float
    x: float


def null_coords(t, x):
    """Null coordinates of an event; u + v = 2(t+1) and v - u = 2x hold
    exactly because both are formed from the same two additions."""
    return NullPoint(u=t + 1.0 - x, v=t + 1.0 + x, t=t, x=x)


# ---------------------------------------------------------------------------
# Interpolation
# ---------------------------------------------------------------------------


def cubic_sample(values, x_min, dx, xq):
    """Four-point Lagrange interpolation at xq; exact for polynomials of
    degree at most three in x."""
    n = len(values)
    pos = (xq - x_min) / dx
    j0 = int(np.floor(pos)) - 1
    j0 = min(max(j0, 0), n - 4)
    s = pos - j0
    w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0
    w1 = s * (s - 2.0) * (s - 3.0) / 2.0
    w2 = -s * (s - 1.0) * (s - 3.0) / 2.0
    w3 = s * (s - 1.0) * (s - 2.0) / 6.0
    return (
        w0 * values[j0]
        + w1 * values[j0 + 1]
        + w2 * values[j0 + 2]
        + w3 * values[j0 + 3]
    )


# ---------------------------------------------------------------------------
# Characteristic traces
# ---------------------------------------------------------------------------


class CharacteristicTrace:
    """Samples of (t, phi, Dphi) along a null line.

    Dphi is the derivative tangent to the traced line: L phi for outgoing
    and interior_outgoing lines, Lbar phi for incoming ones.  Samples are
    appended once per consumed frame, so their spacing is the run's dt.
    """

    def __init__(self, a, direction):
        if a < 0.0:
            raise ConfigError(f"trace offset must be nonnegative, got {a}")
        if direction not in DIRECTIONS:
            raise ConfigError(f"unknown trace direction {direction!r}")
        self.a = float(a)
        self.direction = direction
        self._t = []
        self._phi = []
        self._dphi = []

    def position(self, t):
        if self.direction == "outgoing":
            return t + self.a
        if self.direction == "incoming":
            return -t - self.a
        return t - self.a

    def active(self, t):
        """interior_outgoing lines enter the sampled region at t = a."""
        if self.direction == "interior_outgoing":
            return t >= self.a - 1e-12
        return True

    def update(self, frame):
        t = frame.t
        if not self.active(t):
            return
        xq = self.position(t)
        grid = frame.grid
        if xq < grid.x_min + 2.0 * grid.dx or xq > grid.x_max - 2.0 * grid.dx:
            raise ConfigError(
                f"traced point x={xq:.3f} exits the grid at t={t:.3f}"
            )
        phi = cubic_sample(frame.phi_0, grid.x_min, grid.dx, xq)
        dt_s = cubic_sample(frame.dtphi, grid.x_min, grid.dx, xq)
        dx_s = cubic_sample(frame.dxphi, grid.x_min, grid.dx, xq)
        dphi = dt_s - dx_s if self.direction == "incoming" else dt_s + dx_s
        self._t.append(float(t))
        self._phi.append(float(phi))
        self._dphi.append(float(dphi))

    @property
    def times(self):
        return np.asarray(self._t)

    @property
    def phi(self):
        return np.asarray(self._phi)

    @property
    def dphi(self):
        return np.asarray(self._dphi)

    def __len__(self):
        return len(self._t)

    def write_csv(self, path):
        lines = [f"# decaylab-trace a={self.a!r} direction={self.direction}"]
        lines.append("t,phi,Dphi")
        lines.extend(
            f"{t!r},{p!r},{d!r}"
            for t, p, d in zip(self._t, self._phi, self._dphi)
        )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def read_csv(cls, path):
        with open(path) as fh:
            head = fh.readline().strip().lstrip("# ").split()
            meta = dict(item.partition("=")[::2] for item in head[1:])
            fh.readline()
            trace = cls(float(meta["a"]), meta["direction"])
            for line in fh:
                t_s, p_s, d_s = line.strip().split(",")
                trace._t.append(float(t_s))
                trace._phi.append(float(p_s))
                trace._dphi.append(float(d_s))
        return trace

    def truncate_after(self, t_max):
        """Drop samples with t > t_max (used when resuming a run)."""
        keep = sum(1 for t in self._t if t <= t_max + 1e-12)
        del self._t[keep:], self._phi[keep:], self._dphi[keep:]


def trace_characteristic(frame_iter, a, direction):
    """Build a trace by consuming a stream of frames."""
    trace = CharacteristicTrace(a, direction)
    for frame in frame_iter:
        trace.update(frame)
    return trace


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionSpec:
    """Spacetime region for flux audits.

    kinds and parameters:
      sigma       |x| <= t + R, 0 <= t <= T
      exterior_D  t >= 0, t - x <= -a, t + x <= b  (triangle, a < b)
      interior_R  0 <= t - x <= a, 0 <= t + x <= b (diamond, a, b > 0)
      rect        0 <= t <= T, x1 <= x <= x2
    """

    kind: str
    a: float = None
    b: float = None
    R: float = None
    T: float = None
    x1: float = None
    x2: float = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ConfigError(f"unknown region kind {self.kind!r}")
        if self.kind == "sigma":
            if self.R is None or self.T is None or self.R <= 0 or self.T <= 0:
                raise ConfigError("sigma region needs R > 0 and T > 0")
        elif self.kind == "exterior_D":
            if self.a is None or self.b is None or not self.a < self.b:
                raise ConfigError("exterior_D region needs a < b")
        elif self.kind == "interior_R":
            if self.a is None or self.b is None or self.a <= 0 or self.b <= 0:
                raise ConfigError("interior_R region needs a > 0 and b > 0")
        else:
            if self.T is None or self.x1 is None or self.x2 is None:
                raise ConfigError("rect region needs T, x1, x2")
            if self.T <= 0 or not self.x1 < self.x2:
                raise ConfigError("rect region needs T > 0 and x1 < x2")

    def t_span(self):
        if self.kind == "sigma" or self.kind == "rect":
            return 0.0, self.T
        if self.kind == "exterior_D":
            return 0.0, 0.5 * (self.b - self.a)
        return 0.0, 0.5 * (self.a + self.b)

    def cross_section(self, t):
        """x interval of the region at fixed time, or None when empty."""
        t0, t1 = self.t_span()
        if t < t0 - 1e-12 or t > t1 + 1e-12:
            return None
        if self.kind == "sigma":
            return -t - self.R, t + self.R
        if self.kind == "rect":
            return self.x1, self.x2
        if self.kind == "exterior_D":
            lo, hi = t + self.a, self.b - t
        else:
            lo, hi = max(t - self.a, -t), min(t, self.b - t)
        if hi <= lo:
            return None
        return lo, hi

    def segments(self):
        """Boundary segments with outward-flux recipes.

        Each segment is (name, kind, sign, payload):
          tslice   payload (t,)             flux = sign * int J0 dx
          outgoing payload (c, t0, t1)      x = t + c, flux = sign * int (J0+J1) dt
          incoming payload (c, t0, t1)      x = c - t, flux = sign * int (J0-J1) dt
          vertical payload (x, t0, t1)      flux = sign * int J1 dt
        Signs encode outward normals so the fluxes sum to the integral of
        dt J0 - dx J1 over the region.
        """
        if self.kind == "rect":
            return [
                ("bottom", "tslice", -1.0, (0.0,)),
                ("top", "tslice", 1.0, (self.T,)),
                ("left", "vertical", 1.0, (self.x1, 0.0, self.T)),
                ("right", "vertical", -1.0, (self.x2, 0.0, self.T)),
            ]
        if self.kind == "sigma":
            return [
                ("bottom", "tslice", -1.0, (0.0,)),
                ("top", "tslice", 1.0, (self.T,)),
                ("right_null", "outgoing", -1.0, (self.R, 0.0, self.T)),
                ("left_null", "incoming", -1.0, (-self.R, 0.0, self.T)),
            ]
        if self.kind == "exterior_D":
            apex = 0.5 * (self.b - self.a)
            return [
                ("bottom", "tslice", -1.0, (0.0,)),
                ("outgoing_side", "outgoing", 1.0, (self.a, 0.0, apex)),
                ("incoming_side", "incoming", 1.0, (self.b, 0.0, apex)),
            ]
        half_a, half_b = 0.5 * self.a, 0.5 * self.b
        apex = half_a + half_b
        return [
            ("lower_right", "outgoing", -1.0, (0.0, 0.0, half_b)),
            ("upper_right", "incoming", 1.0, (self.b, half_b, apex)),
            ("upper_left", "outgoing", 1.0, (-self.a, half_a, apex)),
            ("lower_left", "incoming", -1.0, (0.0, 0.0, half_a)),
        ]


def interval_weights(grid, xa, xb):
    """Trapezoid quadrature weights for the x interval [xa, xb].

    Interior nodes get composite-trapezoid weights; a boundary falling
    between nodes contributes a partial cell integrated with linear
    interpolation, so constants and linear functions integrate exactly.
    """
    n = grid.n
    w = np.zeros(n)
    if xb <= xa:
        return w
    pos_a = (xa - grid.x_min) / grid.dx
    pos_b = (xb - grid.x_min) / grid.dx
    ja = int(np.ceil(pos_a - 1e-9))
    jb = int(np.floor(pos_b + 1e-9))
    ja = max(ja, 0)
    jb = min(jb, n - 1)
    dx = grid.dx
    if ja > jb:
        # both endpoints inside a single cell
        j = min(max(int(np.floor(pos_a)), 0), n - 2)
        length = xb - xa
        sa = pos_a - j
        sb = pos_b - j
        w[j] += 0.5 * length * (1.0 - sa) + 0.5 * length * (1.0 - sb)
        w[j + 1] += 0.5 * length * sa + 0.5 * length * sb
        return w
    if jb > ja:
        w[ja : jb + 1] = dx
        w[ja] -= 0.5 * dx
        w[jb] -= 0.5 * dx
    left = pos_a - (ja - 1)  # fraction of the cell [ja-1, ja] covered from xa
    if ja > 0 and left < 1.0 - 1e-12:
        length = (1.0 - left) * dx
        s = left  # position of xa in the cell
        w[ja - 1] += 0.5 * length * (1.0 - s)
        w[ja] += 0.5 * length * (1.0 + s)
    right = pos_b - jb
    if jb < n - 1 and right > 1e-12:
        length = right * dx
        s = right
        w[jb] += 0.5 * length * (2.0 - s)
        w[jb + 1] += 0.5 * length * s
    return w


def region_mask(grid, t, region):
    """Per-node quadrature weights of the region's cross section at time t;
    all zeros when the slice is empty."""
    section = region.cross_section(t)
    if section is None:
        return np.zeros(grid.n)
    return interval_weights(grid, section[0], section[1])
