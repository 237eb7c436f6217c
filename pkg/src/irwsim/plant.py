"""Medium-fidelity truth model for closed-loop evaluation.

Extends the control model with independent wheel-spin states and a
nonlinear adhesion-slip contact law that the controllers never see.  The
eight states are the six gear states plus the two wheel spins (positive
when rolling forward).  Longitudinal contact forces drive both the gear
and the spin dynamics; lateral adhesion is drawn from the same lumped
curve over the combined slip so that curving demand eats into the
available longitudinal adhesion (traction ellipse).

Torque inputs are drive-positive: positive torque accelerates the gear
forward.  Slip outputs use s = (xdot - omega r) / xdot, so traction shows
up as negative slip while the corresponding adhesion f = F_x / F_N is
positive.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .model import ControlInput, GearState, ScalarParams, VehicleParams, accel_scalar
from .track import TrackGeometry

SPEED_FLOOR = 0.1

#: Largest adhesion fraction the lateral-demand inversion may request.
_LAT_DEMAND_CAP = 0.98

#: Target per-substep stiffness number for the wheel-spin dynamics.
_SUBSTEP_LAMBDA = 1.2


@dataclass(frozen=True)
class AdhesionCurveParams:
    """Lumped adhesion-slip characteristic of one rail condition.

    f_max: peak adhesion coefficient, reached exactly at s_peak
    k_0: initial slope df/ds (lumped contact-patch stiffness)
    s_peak: slip magnitude at the peak
    post_peak_level: fraction of f_max the unstable branch decays towards
    post_peak_rate: decay rate of the unstable branch in units of s/s_peak

    The rising branch is kappa*(sigma - sigma^(a+1)/(a+1)) with
    sigma = s/s_peak, kappa = k_0 s_peak / f_max and a = 1/(kappa - 1):
    strictly concave, exact initial slope k_0 and exact peak value f_max.
    kappa is restricted to (1, 1.62] so the curve stays within 1 % of
    k_0 s for |s| <= 0.1 s_peak.
    """

    f_max: float
    k_0: float
    s_peak: float
    post_peak_level: float = 0.75
    post_peak_rate: float = 0.15
    _scalar: object = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if min(self.f_max, self.k_0, self.s_peak) <= 0.0:
            raise ValueError("f_max, k_0 and s_peak must be positive")
        if not 0.0 < self.post_peak_level < 1.0:
            raise ValueError("post_peak_level must lie in (0, 1)")
        kap = self.kappa
        if not 1.0 < kap <= 1.62:
            raise ValueError(
                f"k_0 s_peak / f_max = {kap:.3f} outside (1, 1.62]; the curve "
                "cannot hit the peak with a near-linear micro-slip regime"
            )

    @property
    def kappa(self) -> float:
        return self.k_0 * self.s_peak / self.f_max

    @property
    def a_exp(self) -> float:
        return 1.0 / (self.kappa - 1.0)

    def scalar(self) -> "_CurveScalar":
        if self._scalar is None:
            object.__setattr__(self, "_scalar", _CurveScalar(self))
        return self._scalar


GOOD_ADHESION = AdhesionCurveParams(f_max=0.35, k_0=56.0, s_peak=0.01)
POOR_ADHESION = AdhesionCurveParams(f_max=0.10, k_0=8.0, s_peak=0.02)

ADHESION_PRESETS = {"good": GOOD_ADHESION, "poor": POOR_ADHESION}


class _CurveScalar:
    """Plain-float curve evaluation plus a tabulated rising-branch inverse."""

    __slots__ = ("f_max", "s_peak", "kappa", "a", "level", "rate",
                 "inv_f", "inv_s")

    def __init__(self, pars: AdhesionCurveParams):
        self.f_max = pars.f_max
        self.s_peak = pars.s_peak
        self.kappa = pars.kappa
        self.a = pars.a_exp
        self.level = pars.post_peak_level
        self.rate = pars.post_peak_rate
        sig = np.linspace(0.0, 1.0, 129)
        f = pars.f_max * self.kappa * (sig - sig ** (self.a + 1.0) / (self.a + 1.0))
        self.inv_f = f.tolist()
        self.inv_s = (sig * pars.s_peak).tolist()

    def mag(self, s_abs: float) -> float:
        sig = s_abs / self.s_peak
        if sig <= 1.0:
            return self.f_max * self.kappa * (sig - sig ** (self.a + 1.0) / (self.a + 1.0))
        return self.f_max * (self.level + (1.0 - self.level)
                             * math.exp(-self.rate * (sig - 1.0)))

    def inverse(self, f_abs: float) -> float:
        """Rising-branch slip that produces adhesion f_abs (clamped)."""
        if f_abs <= 0.0:
            return 0.0
        if f_abs >= self.inv_f[-1]:
            return self.s_peak
        i = bisect_right(self.inv_f, f_abs) - 1
        f0, f1 = self.inv_f[i], self.inv_f[i + 1]
        t = (f_abs - f0) / (f1 - f0)
        return self.inv_s[i] + t * (self.inv_s[i + 1] - self.inv_s[i])


def adhesion_curve(s, params: AdhesionCurveParams):
    """Odd adhesion-slip characteristic f(s); accepts scalars or arrays."""
    sig = np.abs(np.asarray(s, dtype=float)) / params.s_peak
    a = params.a_exp
    rising = params.f_max * params.kappa * (sig - sig ** (a + 1.0) / (a + 1.0))
    falling = params.f_max * (params.post_peak_level
                              + (1.0 - params.post_peak_level)
                              * np.exp(-params.post_peak_rate * (sig - 1.0)))
    out = np.where(sig <= 1.0, rising, falling) * np.sign(s)
    return float(out) if np.isscalar(s) or np.ndim(s) == 0 else out


def slip(xdot: float, omega: float, r: float) -> float:
    """Longitudinal slip (xdot - omega r) / xdot; omega positive forward.

    Traction (wheel overspeed) gives negative slip, braking positive.
    """
    if xdot < SPEED_FLOOR:
        raise ValueError("slip undefined at standstill")
    return (xdot - omega * r) / xdot


@dataclass(frozen=True)
class AdhesionSchedule:
    """Rail condition as a function of arc length.

    Segments are (start position, curve parameters); each segment extends
    to the next start, the last one to infinity, so the track is covered
    without overlap by construction.
    """

    starts: tuple
    curves: tuple

    def __post_init__(self):
        if len(self.starts) != len(self.curves) or not self.starts:
            raise ValueError("schedule needs matching starts and curves")
        if list(self.starts) != sorted(self.starts):
            raise ValueError("segment starts must be increasing")
        if self.starts[0] > 0.0:
            raise ValueError("first segment must start at or before p = 0")

    @staticmethod
    def uniform(curve: AdhesionCurveParams) -> "AdhesionSchedule":
        return AdhesionSchedule(starts=(0.0,), curves=(curve,))

    @staticmethod
    def from_intervals(intervals) -> "AdhesionSchedule":
        """Build from contiguous (p_start, p_end, curve) triples."""
        ivs = sorted(intervals, key=lambda iv: iv[0])
        starts, curves = [], []
        for k, (p0, p1, cur) in enumerate(ivs):
            if p1 <= p0:
                raise ValueError("empty schedule interval")
            if k + 1 < len(ivs) and not math.isclose(p1, ivs[k + 1][0]):
                raise ValueError("schedule intervals must be contiguous")
            starts.append(p0)
            curves.append(cur)
        return AdhesionSchedule(starts=tuple(starts), curves=tuple(curves))

    def at(self, p: float) -> AdhesionCurveParams:
        i = bisect_right(self.starts, p) - 1
        return self.curves[max(i, 0)]


@dataclass(frozen=True)
class PlantState:
    """Plant state: gear states, wheel spins and contact outputs."""

    x: float
    psi_ax: float
    xdot: float
    psidot_ax: float
    y_trax: float
    psi_trax: float
    omega_le: float     # wheel spin, positive rolling forward [rad/s]
    omega_ri: float
    f_n_le: float = 0.0  # normal loads [N]
    f_n_ri: float = 0.0
    s_x_le: float = 0.0  # longitudinal slips (traction negative)
    s_x_ri: float = 0.0
    f_x_le: float = 0.0  # longitudinal adhesion (traction positive)
    f_x_ri: float = 0.0
    s_y: float = 0.0     # lateral slip shared by both contacts
    f_y: float = 0.0     # lateral adhesion (mean over contacts)
    unstable_contact: bool = False

    def gear_state(self) -> GearState:
        return GearState(self.x, self.psi_ax, self.xdot, self.psidot_ax,
                         self.y_trax, self.psi_trax)


@dataclass(frozen=True)
class Measurements:
    """Direct plant outputs fed back to the controllers (no noise)."""

    gear: GearState
    f_x_ri: float
    f_x_le: float
    s_x_ri: float
    s_x_le: float


def measure(state: PlantState) -> Measurements:
    """Exact pass-through of the feedback quantities."""
    return Measurements(
        gear=state.gear_state(),
        f_x_ri=state.f_x_ri,
        f_x_le=state.f_x_le,
        s_x_ri=state.s_x_ri,
        s_x_le=state.s_x_le,
    )


def initial_plant_state(track: TrackGeometry, v0: float,
                        params: VehicleParams, p0: float = 0.0) -> PlantState:
    """Centered coasting state at ideal rolling."""
    sp = ScalarParams(params, params.m_cb)
    fn = 0.5 * sp.m_x * sp.g
    return PlantState(
        x=p0, psi_ax=float(track.psi_at(p0)), xdot=v0, psidot_ax=0.0,
        y_trax=0.0, psi_trax=0.0,
        omega_le=v0 / params.r_0, omega_ri=v0 / params.r_0,
        f_n_le=fn, f_n_ri=fn,
    )


# ----------------------------------------------------------------------
# stepping
# ----------------------------------------------------------------------

def _contact(z, tc, sp: ScalarParams, cur: _CurveScalar):
    """Contact quantities at one plant state.

    Returns (fn_le, fn_ri, s_le, s_ri, fx_le, fx_ri, s_y, fy_le, fy_ri,
    r_le, r_ri, y_le, y_ri, k1).
    """
    x, _, xd, _, y, _, om_le, om_ri = z
    _, k1, _, phi_tr, _, _ = tc.channels(x)
    phi_ax = -sp.gam * y + phi_tr
    r_ri = sp.r0 + sp.t0 * y
    r_le = sp.r0 - sp.t0 * y
    y_ri = sp.b2 - y
    y_le = sp.b2 + y

    xd_eff = xd if xd > SPEED_FLOOR else SPEED_FLOOR
    s_ri = (xd - om_ri * r_ri) / xd_eff
    s_le = (xd - om_le * r_le) / xd_eff

    # Static load split with the superelevation-induced lateral component.
    sphi = math.sin(phi_ax)
    cphi = math.cos(phi_ax)
    a_unbal = xd * xd * k1 - sp.g * sphi
    fn_tot = sp.m_x * sp.g * cphi
    dfn = -sp.m_x * a_unbal * sp.r0 / (2.0 * sp.b2)
    fn_ri = max(0.5 * fn_tot + dfn, 1e3)
    fn_le = max(0.5 * fn_tot - dfn, 1e3)

    # Curving demand expressed as an equivalent lateral slip; the contacts
    # must slip opposite to the force they are asked to produce.
    f_y_req = sp.m_x * a_unbal / (fn_ri + fn_le)
    mag = cur.inverse(min(abs(f_y_req), _LAT_DEMAND_CAP * cur.f_max))
    s_y = -mag if f_y_req > 0.0 else mag

    def forces(s_x):
        s_tot = math.hypot(s_x, s_y)
        if s_tot < 1e-14:
            return 0.0, 0.0
        f_tot = cur.mag(s_tot)
        return -f_tot * s_x / s_tot, -f_tot * s_y / s_tot

    fx_le, fy_le = forces(s_le)
    fx_ri, fy_ri = forces(s_ri)
    return (fn_le, fn_ri, s_le, s_ri, fx_le, fx_ri, s_y, fy_le, fy_ri,
            r_le, r_ri, y_le, y_ri, k1)


def _rhs(z, tau_ri, tau_le, tc, sp: ScalarParams, cur: _CurveScalar,
         j_wy: float):
    (fn_le, fn_ri, _, _, fx_le, fx_ri, _, _, _,
     r_le, r_ri, y_le, y_ri, k1) = _contact(z, tc, sp, cur)
    fxl = fn_le * fx_le
    fxr = fn_ri * fx_ri
    f1 = fxl + fxr
    f2 = y_le * fxl - y_ri * fxr
    x, psi_ax, xd, psid, y, psit, om_le, om_ri = z
    xdd, psidd, _, s = accel_scalar(tc, sp, x, psi_ax, xd, psid, y, psit,
                                    f1, f2, 0.0)
    return (
        xd, psid, xdd, psidd, xd * s, psid - k1 * xd,
        (tau_le - r_le * fxl) / j_wy,
        (tau_ri - r_ri * fxr) / j_wy,
    )


def _substeps(state: PlantState, cur: _CurveScalar, sp: ScalarParams,
              j_wy: float, dt: float) -> int:
    """Substep count keeping the spin dynamics inside the RK4 stability
    region; the relaxation rate scales with contact stiffness over speed."""
    xd = max(state.xdot, SPEED_FLOOR)
    rate = sp.r0 * sp.r0 * (0.5 * sp.m_x * sp.g) * cur.kappa * cur.f_max \
        / (cur.s_peak * j_wy * xd)
    return max(1, min(600, int(math.ceil(dt * rate / _SUBSTEP_LAMBDA))))


def plant_step(state: PlantState, u: ControlInput, track: TrackGeometry,
               schedule: AdhesionSchedule, params: VehicleParams, dt: float,
               clamp_slips: bool = False) -> PlantState:
    """Advance the plant by one control period (RK4, drive-positive torques).

    The rail condition is frozen at the entry position for the step.  With
    clamp_slips the control model's ideal-rolling assumption is enforced:
    slips are zero, spins follow the gear kinematics and adhesion comes
    from the torque balance.
    """
    if dt > 1.0e-3 + 1e-12:
        raise ValueError("plant steps at the fast control rate (dt <= 1 ms)")
    tc = track.scalars()
    sp = ScalarParams(params, params.m_cb)
    cur = schedule.at(state.x).scalar()
    j_wy = params.j_w_y

    if clamp_slips:
        return _step_ideal(state, u, tc, sp, params, dt)

    z = (state.x, state.psi_ax, state.xdot, state.psidot_ax, state.y_trax,
         state.psi_trax, state.omega_le, state.omega_ri)
    n = _substeps(state, cur, sp, j_wy, dt)
    h = dt / n
    tau_ri, tau_le = u.tau_ri, u.tau_le
    for _ in range(n):
        k1v = _rhs(z, tau_ri, tau_le, tc, sp, cur, j_wy)
        z1 = tuple(z[i] + 0.5 * h * k1v[i] for i in range(8))
        k2v = _rhs(z1, tau_ri, tau_le, tc, sp, cur, j_wy)
        z2 = tuple(z[i] + 0.5 * h * k2v[i] for i in range(8))
        k3v = _rhs(z2, tau_ri, tau_le, tc, sp, cur, j_wy)
        z3 = tuple(z[i] + h * k3v[i] for i in range(8))
        k4v = _rhs(z3, tau_ri, tau_le, tc, sp, cur, j_wy)
        z = tuple(z[i] + (h / 6.0) * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
                  for i in range(8))

    (fn_le, fn_ri, s_le, s_ri, fx_le, fx_ri, s_y, fy_le, fy_ri,
     *_rest) = _contact(z, tc, sp, cur)
    return PlantState(
        x=z[0], psi_ax=z[1], xdot=z[2], psidot_ax=z[3], y_trax=z[4],
        psi_trax=z[5], omega_le=z[6], omega_ri=z[7],
        f_n_le=fn_le, f_n_ri=fn_ri,
        s_x_le=s_le, s_x_ri=s_ri, f_x_le=fx_le, f_x_ri=fx_ri,
        s_y=s_y, f_y=0.5 * (fy_le + fy_ri),
        unstable_contact=max(abs(s_le), abs(s_ri)) > 1.0,
    )


def _step_ideal(state: PlantState, u: ControlInput, tc, sp: ScalarParams,
                params: VehicleParams, dt: float) -> PlantState:
    """Gear step under the control model's own assumptions (zero slip)."""
    from .model import dynamics_scalar

    z = (state.x, state.psi_ax, state.xdot, state.psidot_ax,
         state.y_trax, state.psi_trax)
    # The control model's torque convention is frame-consistent; negate the
    # drive-positive command at this boundary.
    tau_ri, tau_le = -u.tau_ri, -u.tau_le

    def f(zz):
        return dynamics_scalar(tc, sp, zz, tau_ri, tau_le)

    k1v = f(z)
    z1 = tuple(z[i] + 0.5 * dt * k1v[i] for i in range(6))
    k2v = f(z1)
    z2 = tuple(z[i] + 0.5 * dt * k2v[i] for i in range(6))
    k3v = f(z2)
    z3 = tuple(z[i] + dt * k3v[i] for i in range(6))
    k4v = f(z3)
    z = tuple(z[i] + (dt / 6.0) * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
              for i in range(6))

    x, psi_ax, xd, psid, y, psit = z
    _, k1, _, _, _, _ = tc.channels(x)
    r_ri = sp.r0 + sp.t0 * y
    r_le = sp.r0 - sp.t0 * y
    yaw = k1 * xd + psid
    fn = 0.5 * sp.m_x * sp.g
    return PlantState(
        x=x, psi_ax=psi_ax, xdot=xd, psidot_ax=psid, y_trax=y, psi_trax=psit,
        omega_le=(xd + (sp.b2 + y) * yaw) / r_le,
        omega_ri=(xd - (sp.b2 - y) * yaw) / r_ri,
        f_n_le=fn, f_n_ri=fn,
        s_x_le=0.0, s_x_ri=0.0,
        f_x_le=u.tau_le / (r_le * fn), f_x_ri=u.tau_ri / (r_ri * fn),
        s_y=0.0, f_y=0.0,
    )
