"""Parametric evaluation tracks and tabulated geometry with preview access.

A track is described by six channels tabulated over the arc length p:
yaw angle and its spatial derivative, superelevation (cant) angle and its
derivative, and inclination angle and its derivative.  Angle channels are
interpolated with cubic Hermite polynomials built from the tabulated
derivatives, which is exact for the piecewise-quadratic geometry of
straight / clothoid / constant-radius segments; derivative channels are
interpolated linearly.  Time rates are obtained by scaling the spatial
derivatives with the running speed (dp/dt is approximated by xdot).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

G_ACCEL = 9.81  # m/s^2

#: Tabulation step used by the track builder [m].
TABLE_STEP = 0.5

#: Cant ramp rate cap used to size clothoids when no length is given [m/s].
CANT_RAMP_RATE = 0.035


class TrackRangeError(ValueError):
    """Arc length outside the tabulated track."""


@dataclass(frozen=True)
class TrackSpec:
    """Construction parameters of an evaluation track.

    shape: "straight" or "straight-clothoid-curve"
    design_velocity: speed the curve is laid out for [m/s]
    design_lateral_accel: unbalanced lateral acceleration at that speed [m/s^2]
    curve_radius: constant-radius section radius [m] (inf for straight)
    clothoid_length: transition length [m]; None sizes it from the cant ramp
        rate cap at the design velocity
    lead_in: straight length before the clothoid [m]
    total_length: tabulated length [m]; the curve section fills the remainder
    gauge: lateral rail distance used for cant height [m]
    """

    shape: str = "straight"
    design_velocity: float = 0.0
    design_lateral_accel: float = 0.0
    curve_radius: float = math.inf
    clothoid_length: float | None = None
    lead_in: float = 25.0
    total_length: float = 2500.0
    gauge: float = 1.5

    def __post_init__(self):
        if self.shape not in ("straight", "straight-clothoid-curve"):
            raise ValueError(f"unknown track shape {self.shape!r}")
        if self.total_length <= 0.0:
            raise ValueError("total_length must be positive")
        if self.shape == "straight-clothoid-curve":
            if not self.curve_radius > 0.0:
                raise ValueError("curve_radius must be positive")
            if self.clothoid_length is not None and self.clothoid_length <= 0.0:
                raise ValueError("clothoid_length must be positive")
            if self.lead_in <= 0.0:
                raise ValueError("lead_in must be positive")


@dataclass(frozen=True)
class TrackSample:
    """Track frame angles and rates at one arc position."""

    psi: float        # yaw angle [rad]
    psi_rate: float   # yaw rate [rad/s]
    phi: float        # superelevation angle [rad]
    phi_rate: float   # superelevation rate [rad/s]
    eps: float        # inclination angle [rad]
    eps_rate: float   # inclination rate [rad/s]


@dataclass(frozen=True)
class TrackGeometry:
    """Tabulated track channels over arc length with preview access."""

    p: np.ndarray       # knots, strictly increasing [m]
    psi: np.ndarray     # yaw angle [rad]
    dpsi: np.ndarray    # d(psi)/dp [rad/m]
    phi: np.ndarray     # superelevation angle [rad]
    dphi: np.ndarray    # d(phi)/dp [rad/m]
    eps: np.ndarray     # inclination angle [rad]
    deps: np.ndarray    # d(eps)/dp [rad/m]
    gauge: float = 1.5
    _dpsi_slope: np.ndarray = field(repr=False, default=None)
    _dphi_slope: np.ndarray = field(repr=False, default=None)
    _scalars: object = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.p.ndim != 1 or self.p.size < 2:
            raise ValueError("track table needs at least two knots")
        if np.any(np.diff(self.p) <= 0.0):
            raise ValueError("track knots must be strictly increasing")
        h = np.diff(self.p)
        # Segment slopes of the derivative channels double as second
        # spatial derivatives of the angle channels.
        object.__setattr__(self, "_dpsi_slope", np.diff(self.dpsi) / h)
        object.__setattr__(self, "_dphi_slope", np.diff(self.dphi) / h)

    @property
    def total_length(self) -> float:
        return float(self.p[-1])

    # ------------------------------------------------------------------
    # vectorized channel accessors (clamped to the table range)
    # ------------------------------------------------------------------

    def _locate(self, p):
        p = np.clip(p, self.p[0], self.p[-1])
        i = np.clip(np.searchsorted(self.p, p, side="right") - 1, 0, self.p.size - 2)
        h = self.p[i + 1] - self.p[i]
        t = (p - self.p[i]) / h
        return i, h, t

    def _hermite(self, y, d, p):
        i, h, t = self._locate(p)
        t2 = t * t
        t3 = t2 * t
        return (
            (2.0 * t3 - 3.0 * t2 + 1.0) * y[i]
            + (t3 - 2.0 * t2 + t) * h * d[i]
            + (-2.0 * t3 + 3.0 * t2) * y[i + 1]
            + (t3 - t2) * h * d[i + 1]
        )

    def _linear(self, d, p):
        i, _, t = self._locate(p)
        return d[i] + (d[i + 1] - d[i]) * t

    def _slope(self, slopes, p):
        i, _, _ = self._locate(p)
        return slopes[i]

    def channels_at(self, p):
        """All dynamics-relevant channels with a single table lookup.

        Returns (psi, dpsi, ddpsi, phi, dphi, ddphi) at p.
        """
        i, h, t = self._locate(p)
        t2 = t * t
        t3 = t2 * t
        h00 = 2.0 * t3 - 3.0 * t2 + 1.0
        h10 = (t3 - 2.0 * t2 + t) * h
        h01 = -2.0 * t3 + 3.0 * t2
        h11 = (t3 - t2) * h
        psi = h00 * self.psi[i] + h10 * self.dpsi[i] \
            + h01 * self.psi[i + 1] + h11 * self.dpsi[i + 1]
        phi = h00 * self.phi[i] + h10 * self.dphi[i] \
            + h01 * self.phi[i + 1] + h11 * self.dphi[i + 1]
        dpsi = self.dpsi[i] + (self.dpsi[i + 1] - self.dpsi[i]) * t
        dphi = self.dphi[i] + (self.dphi[i + 1] - self.dphi[i]) * t
        return psi, dpsi, self._dpsi_slope[i], phi, dphi, self._dphi_slope[i]

    def psi_pair_at(self, p):
        """(psi, dpsi) with a single table lookup (rear-gear sample)."""
        i, h, t = self._locate(p)
        t2 = t * t
        t3 = t2 * t
        psi = (2.0 * t3 - 3.0 * t2 + 1.0) * self.psi[i] \
            + (t3 - 2.0 * t2 + t) * h * self.dpsi[i] \
            + (-2.0 * t3 + 3.0 * t2) * self.psi[i + 1] \
            + (t3 - t2) * h * self.dpsi[i + 1]
        return psi, self.dpsi[i] + (self.dpsi[i + 1] - self.dpsi[i]) * t

    def psi_at(self, p):
        return self._hermite(self.psi, self.dpsi, p)

    def dpsi_at(self, p):
        return self._linear(self.dpsi, p)

    def ddpsi_at(self, p):
        return self._slope(self._dpsi_slope, p)

    def phi_at(self, p):
        return self._hermite(self.phi, self.dphi, p)

    def dphi_at(self, p):
        return self._linear(self.dphi, p)

    def ddphi_at(self, p):
        return self._slope(self._dphi_slope, p)

    def eps_at(self, p):
        return self._hermite(self.eps, self.deps, p)

    def deps_at(self, p):
        return self._linear(self.deps, p)

    def export_csv(self, path) -> None:
        """Write the tabulated channels as CSV (p, psi, dpsi_dp, ...)."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("p,psi,dpsi_dp,phi,dphi_dp,eps,deps_dp\n")
            for k in range(self.p.size):
                fh.write(
                    f"{self.p[k]:.6f},{self.psi[k]:.12g},{self.dpsi[k]:.12g},"
                    f"{self.phi[k]:.12g},{self.dphi[k]:.12g},"
                    f"{self.eps[k]:.12g},{self.deps[k]:.12g}\n"
                )

    def scalars(self) -> "TrackScalars":
        """Pure-float accessor for hot per-step loops (built lazily)."""
        if self._scalars is None:
            object.__setattr__(self, "_scalars", TrackScalars(self))
        return self._scalars


class TrackScalars:
    """Plain-float view of a track table for tight integration loops.

    Evaluates the same Hermite/linear interpolants as the array accessors
    but without per-call numpy overhead.
    """

    __slots__ = ("knots", "psi", "dpsi", "phi", "dphi", "dpsi_slope",
                 "dphi_slope", "p_min", "p_max", "n")

    def __init__(self, geo: TrackGeometry):
        self.knots = geo.p.tolist()
        self.psi = geo.psi.tolist()
        self.dpsi = geo.dpsi.tolist()
        self.phi = geo.phi.tolist()
        self.dphi = geo.dphi.tolist()
        self.dpsi_slope = geo._dpsi_slope.tolist()
        self.dphi_slope = geo._dphi_slope.tolist()
        self.p_min = self.knots[0]
        self.p_max = self.knots[-1]
        self.n = len(self.knots)

    def _locate(self, p: float):
        if p <= self.p_min:
            p = self.p_min
        elif p >= self.p_max:
            p = self.p_max
        i = bisect_right(self.knots, p) - 1
        if i > self.n - 2:
            i = self.n - 2
        elif i < 0:
            i = 0
        h = self.knots[i + 1] - self.knots[i]
        return i, (p - self.knots[i]) / h, h

    @staticmethod
    def _hermite(y0, y1, d0, d1, t, h):
        t2 = t * t
        t3 = t2 * t
        return ((2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0
                + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1)

    def channels(self, p: float):
        """(psi, dpsi, ddpsi, phi, dphi, ddphi) at arc length p."""
        i, t, h = self._locate(p)
        psi = self._hermite(self.psi[i], self.psi[i + 1],
                            self.dpsi[i], self.dpsi[i + 1], t, h)
        dpsi = self.dpsi[i] + (self.dpsi[i + 1] - self.dpsi[i]) * t
        phi = self._hermite(self.phi[i], self.phi[i + 1],
                            self.dphi[i], self.dphi[i + 1], t, h)
        dphi = self.dphi[i] + (self.dphi[i + 1] - self.dphi[i]) * t
        return psi, dpsi, self.dpsi_slope[i], phi, dphi, self.dphi_slope[i]

    def psi_pair(self, p: float):
        """(psi, dpsi) only, for the rear-gear sample."""
        i, t, h = self._locate(p)
        psi = self._hermite(self.psi[i], self.psi[i + 1],
                            self.dpsi[i], self.dpsi[i + 1], t, h)
        return psi, self.dpsi[i] + (self.dpsi[i + 1] - self.dpsi[i]) * t


# ----------------------------------------------------------------------
# design relations
# ----------------------------------------------------------------------

def cant_angle_from_design(v: float, radius: float, a: float, g: float = G_ACCEL) -> float:
    """Superelevation angle that leaves unbalanced acceleration a at speed v."""
    ratio = (v * v / radius - a) / g
    if abs(ratio) >= 1.0:
        raise ValueError(f"cant angle undefined: (v^2/R - a)/g = {ratio:.3f} outside (-1, 1)")
    return math.asin(ratio)


def superelevation_from_design(
    v: float, radius: float, a: float, gauge: float, g: float = G_ACCEL
) -> float:
    """Superelevation height for a curve laid out at speed v [m].

    The height is the rail-top level difference gauge*sin(phi) with the
    cant angle phi = arcsin((v^2/R - a)/g).
    """
    return gauge * math.sin(cant_angle_from_design(v, radius, a, g))


# ----------------------------------------------------------------------
# builder
# ----------------------------------------------------------------------

def _segment_grid(p0: float, p1: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil((p1 - p0) / step)))
    return np.linspace(p0, p1, n + 1)


def build_track(spec: TrackSpec) -> TrackGeometry:
    """Tabulate a track from its construction parameters.

    Curved shapes ramp the curvature linearly from zero to 1/R over the
    clothoid while the cant angle ramps linearly to its design value;
    segment boundaries coincide with table knots so the interpolants
    reproduce the geometry exactly.
    """
    if spec.shape == "straight":
        p = _segment_grid(0.0, spec.total_length, TABLE_STEP)
        z = np.zeros_like(p)
        return TrackGeometry(p, z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy(),
                             gauge=spec.gauge)

    v = spec.design_velocity
    radius = spec.curve_radius
    phi_end = cant_angle_from_design(v, radius, spec.design_lateral_accel)
    l_sup = spec.gauge * math.sin(phi_end)
    cl_len = spec.clothoid_length
    if cl_len is None:
        # Length needed to keep the cant ramp below the rate cap at speed v.
        cl_len = max(v * abs(l_sup) / CANT_RAMP_RATE, 10.0 * TABLE_STEP)
    p1 = spec.lead_in
    p2 = p1 + cl_len
    if p2 >= spec.total_length:
        raise ValueError(
            f"total_length {spec.total_length} m leaves no constant-radius "
            f"section (clothoid ends at {p2:.1f} m)"
        )

    g_a = _segment_grid(0.0, p1, TABLE_STEP)
    g_b = _segment_grid(p1, p2, TABLE_STEP)
    g_c = _segment_grid(p2, spec.total_length, TABLE_STEP)

    p = np.concatenate([g_a, g_b[1:], g_c[1:]])
    psi = np.zeros_like(p)
    dpsi = np.zeros_like(p)
    phi = np.zeros_like(p)
    dphi = np.zeros_like(p)

    on_cl = (p >= p1) & (p <= p2)
    s = p[on_cl] - p1
    dpsi[on_cl] = s / (radius * cl_len)
    psi[on_cl] = s * s / (2.0 * radius * cl_len)
    phi[on_cl] = phi_end * s / cl_len
    dphi[on_cl] = phi_end / cl_len

    on_cu = p > p2
    s = p[on_cu] - p2
    dpsi[on_cu] = 1.0 / radius
    psi[on_cu] = cl_len / (2.0 * radius) + s / radius
    phi[on_cu] = phi_end
    dphi[on_cu] = 0.0

    # The shared knots at segment boundaries take the smooth-side value of
    # the derivative channels; angle channels are continuous anyway.
    z = np.zeros_like(p)
    return TrackGeometry(p, psi, dpsi, phi, dphi, z, z.copy(), gauge=spec.gauge)


#: Evaluation track catalogue: (design velocity [km/h], unbalanced lateral
#: acceleration [m/s^2], curve radius [m]).
STANDARD_TRACKS = {
    "T1": (40.0, 0.0, 175.0),
    "T2": (160.0, 0.2167, 1500.0),
    "T3": (280.0, 0.4333, 4250.0),
    "T4": (400.0, 0.6500, 8500.0),
    "T5": None,
}


def standard_track_spec(track_id: str, total_length: float = 2500.0,
                        gauge: float = 1.5) -> TrackSpec:
    """Spec of one of the named evaluation tracks T1..T5."""
    try:
        row = STANDARD_TRACKS[track_id]
    except KeyError:
        raise ValueError(f"unknown track id {track_id!r}") from None
    if row is None:
        return TrackSpec(shape="straight", total_length=total_length, gauge=gauge)
    v_kmh, a, radius = row
    return TrackSpec(
        shape="straight-clothoid-curve",
        design_velocity=v_kmh / 3.6,
        design_lateral_accel=a,
        curve_radius=radius,
        total_length=total_length,
        gauge=gauge,
    )


# ----------------------------------------------------------------------
# sampling
# ----------------------------------------------------------------------

def sample(track: TrackGeometry, p: float, xdot: float) -> TrackSample:
    """Angles and rates at arc length p when running at xdot."""
    if p < track.p[0] or p > track.p[-1]:
        raise TrackRangeError(f"p = {p:.2f} m outside track [0, {track.total_length:.2f}]")
    return TrackSample(
        psi=float(track.psi_at(p)),
        psi_rate=float(track.dpsi_at(p)) * xdot,
        phi=float(track.phi_at(p)),
        phi_rate=float(track.dphi_at(p)) * xdot,
        eps=float(track.eps_at(p)),
        eps_rate=float(track.deps_at(p)) * xdot,
    )


def car_body_yaw(track: TrackGeometry, p: float, xdot: float, l_cb: float):
    """Car body yaw angle and rate as the mean over both running gears.

    The rear gear position p - l_cb is clamped to the track start, which is
    exact for runs beginning on the straight lead-in.
    """
    p_rear = max(p - l_cb, 0.0)
    psi_cb = 0.5 * (float(track.psi_at(p)) + float(track.psi_at(p_rear)))
    rate_cb = 0.5 * (float(track.dpsi_at(p)) + float(track.dpsi_at(p_rear))) * xdot
    return psi_cb, rate_cb


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def frame_rotations(smp: TrackSample, psi_trax: float, phi_trax: float):
    """Rotation matrices world<-track and track<-axle.

    The track orientation composes yaw, inclination and superelevation;
    the axle offset composes relative yaw and roll.
    """
    r_0tr = _rot_z(smp.psi) @ _rot_y(smp.eps) @ _rot_x(smp.phi)
    r_trax = _rot_z(psi_trax) @ _rot_x(phi_trax)
    return r_0tr, r_trax
