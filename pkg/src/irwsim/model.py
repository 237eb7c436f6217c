"""Control-oriented running gear model.

Reduced Lagrangian dynamics of a single running gear with independently
rotating wheels.  Generalized coordinates are the arc position x and the
absolute axle yaw angle psi_ax; the lateral offset y_trax and relative yaw
psi_trax ride along as auxiliary states driven by the track curvature and
the running speed.  Ideal rolling couples the wheel spins to (xdot,
psidot), conic wheels on line-shaped rails slave the vertical offset and
the roll angle to (y_trax, psi_trax).

Sign conventions follow the frame with x forward, y toward the right rail
and z down: forward rolling means negative wheel spin, and a positive
motor torque input decelerates the gear.  Controllers that think in
drive-positive torques must negate at this boundary.

The equations of motion are assembled in closed form.  Every velocity-level
quantity is linear in qdot = [xdot, psidot_ax], so the kinetic energy is an
exact quadratic form qdot' M qdot; M and its partial derivatives with
respect to the configuration variables (p, psi_trax, y_trax) are built from
small coefficient vectors with hand-derived partials.

Reduction convention: the auxiliary lateral states (y_trax, psi_trax) are
exogenous parameters under coordinate variations - only their rates couple
into the generalized velocities - while track channels sampled at p vary
with the arc coordinate.  Treating psi_trax as co-varying with the yaw
coordinate instead would manufacture a yaw moment growing as m xdot^2,
which no realizable yaw binding can dominate at top speed while still
permitting curving; independently rotating wheels have no such
self-excitation.  Correctness of the assembly under this convention is
enforced by a numeric Euler-Lagrange oracle in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .track import TrackGeometry

GRAVITY = 9.81

#: Below this forward speed the model is not considered valid (standstill).
SPEED_FLOOR = 0.1


@dataclass(frozen=True)
class VehicleParams:
    """Static running gear parameters.

    The numeric defaults are plausible high-speed train magnitudes chosen
    for stable straight running; they are not measured values.
    """

    m: float = 3000.0        # wheel carrier + wheels [kg]
    m_cb: float = 32000.0    # car body [kg]
    j_ax_x: float = 1200.0   # residual roll inertia of the gear [kg m^2]
    j_ax_z: float = 1500.0   # residual yaw inertia of the gear [kg m^2]
    j_w_x: float = 30.0      # wheel inertia about the roll axis [kg m^2]
    j_w_y: float = 60.0      # wheel inertia about the spin axis [kg m^2]
    j_w_z: float = 30.0      # wheel inertia about the yaw axis [kg m^2]
    # Secondary yaw binding: steady curving rotates the gear against the
    # car body by about l_cb/(2R), so the spring moment must stay within
    # the differential-torque authority on the evaluation curves, while
    # the damper (free in steady curving) suppresses the creep-lag yaw
    # oscillation that appears at high speed.
    k_s_x: float = 1.0e6     # roll spring [N m/rad]
    k_s_z: float = 1.0e6     # yaw spring to the car body [N m/rad]
    k_d_x: float = 1.0e4     # roll damper [N m s/rad]
    k_d_z: float = 4.0e5     # yaw damper to the car body [N m s/rad]
    r_0: float = 0.46        # nominal wheel radius [m]
    delta_0: float = 0.025   # wheel cone angle [rad]
    gauge: float = 1.5       # lateral rail distance b [m]
    l_cb: float = 17.0       # distance between front and rear gear [m]
    g: float = GRAVITY       # gravitational acceleration [m/s^2]
    tau_max: float = 12000.0   # wheel motor torque limit [N m]
    tau_min: float = -12000.0

    def __post_init__(self):
        for name in ("m", "m_cb", "j_ax_x", "j_ax_z", "j_w_x", "j_w_y", "j_w_z", "r_0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.gauge / 2.0 <= self.r_0 * math.tan(self.delta_0):
            raise ValueError("conic geometry requires b/2 > r_0 tan(delta_0)")
        if not self.tau_min < 0.0 < self.tau_max:
            raise ValueError("torque limits must straddle zero")

    @property
    def m_x(self) -> float:
        """Longitudinal mass including half the car body [kg]."""
        return self.m + 0.5 * self.m_cb

    @property
    def gamma(self) -> float:
        """Conic coupling tan(d0) / (b/2 - r0 tan(d0)) [1/m]."""
        t0 = math.tan(self.delta_0)
        return t0 / (self.gauge / 2.0 - self.r_0 * t0)

@dataclass(frozen=True)
class GearState:
    """Six-element control model state."""

    x: float            # arc position [m]
    psi_ax: float       # absolute axle yaw [rad]
    xdot: float         # forward speed [m/s]
    psidot_ax: float    # yaw rate [rad/s]
    y_trax: float       # lateral offset from track center [m]
    psi_trax: float     # yaw relative to track [rad]

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.psi_ax, self.xdot, self.psidot_ax,
                         self.y_trax, self.psi_trax])

    @staticmethod
    def from_array(v) -> "GearState":
        return GearState(*(float(c) for c in v))


@dataclass(frozen=True)
class ControlInput:
    """Wheel motor torque pair.

    The model operations interpret torques in the frame-consistent sign
    (positive decelerates); the plant takes drive-positive commands.
    """

    tau_ri: float  # [N m]
    tau_le: float  # [N m]

    def as_array(self) -> np.ndarray:
        return np.array([self.tau_ri, self.tau_le])


@dataclass(frozen=True)
class ModelTheta:
    """Varying model parameters: track table reference and car body mass."""

    track: TrackGeometry
    m_cb: float

    @staticmethod
    def from_params(track: TrackGeometry, params: VehicleParams) -> "ModelTheta":
        return ModelTheta(track=track, m_cb=params.m_cb)


@dataclass(frozen=True)
class DependentGeometry:
    """Quantities slaved to the lateral state by the conic-wheel constraint."""

    phi_trax: float  # axle roll angle [rad]
    z_trax: float    # vertical offset of the axle center [m] (down positive)
    r_le: float      # left wheel rolling radius [m]
    r_ri: float      # right wheel rolling radius [m]
    y_le: float      # axle center to left rail [m]
    y_ri: float      # axle center to right rail [m]


def dependent_geometry(y_trax: float, psi_trax: float, phi_tr: float,
                       params: VehicleParams) -> DependentGeometry:
    """Roll angle, vertical offset and wheel geometry for a lateral state."""
    if abs(psi_trax) >= math.pi / 2.0:
        raise ValueError("relative yaw must stay below pi/2")
    t0 = math.tan(params.delta_0)
    gam = params.gamma
    return DependentGeometry(
        phi_trax=-gam * y_trax + phi_tr,
        z_trax=(params.delta_0 * params.gauge / 2.0)
        * (1.0 / math.cos(psi_trax) - 1.0)
        - gam * y_trax * y_trax - params.r_0,
        r_le=params.r_0 - t0 * y_trax,
        r_ri=params.r_0 + t0 * y_trax,
        y_le=params.gauge / 2.0 + y_trax,
        y_ri=params.gauge / 2.0 - y_trax,
    )


def wheel_speeds(state: GearState, psi_rate_tr: float,
                 geom: DependentGeometry) -> tuple[float, float]:
    """Ideal-rolling wheel spins (right, left); negative when running forward."""
    yaw = psi_rate_tr + state.psidot_ax
    omega_ri = -(state.xdot - geom.y_ri * yaw) / geom.r_ri
    omega_le = -(state.xdot + geom.y_le * yaw) / geom.r_le
    return omega_ri, omega_le


def generalized_forces(u: ControlInput, geom: DependentGeometry) -> np.ndarray:
    """Motor torques mapped onto the reduced coordinates [force, yaw moment]."""
    return -np.array([
        u.tau_le / geom.r_le + u.tau_ri / geom.r_ri,
        geom.y_le * u.tau_le / geom.r_le - geom.y_ri * u.tau_ri / geom.r_ri,
    ])


# ----------------------------------------------------------------------
# vectorized core
# ----------------------------------------------------------------------
#
# All arrays broadcast over a leading batch shape.  States are (..., 6) in
# the order [x, psi_ax, xdot, psidot_ax, y_trax, psi_trax]; inputs are
# (..., 2) as (tau_ri, tau_le).


def gear_accelerations(x: np.ndarray, f_gen: np.ndarray, track: TrackGeometry,
                       params: VehicleParams, m_cb: float) -> np.ndarray:
    """Solve the reduced Lagrange equations for (xddot, psiddot_ax)."""
    return _gear_accelerations_k1(x, f_gen, track, params, m_cb)[0]


def _gear_accelerations_k1(x: np.ndarray, f_gen: np.ndarray,
                           track: TrackGeometry, params: VehicleParams,
                           m_cb: float):
    """Accelerations plus the sampled curvature (shared table lookup).

    f_gen supplies the generalized forces on [x, psi_ax]; callers pass the
    ideal-rolling torque map or explicit contact forces.  Every
    velocity-level quantity is linear in qdot = [xdot, psidot_ax], written
    as a . qdot with small coefficient vectors; the mass matrix and its
    configuration partials (w.r.t. p, psi_trax, y_trax, hand-derived from
    the same constraint relations) are assembled from them.  This is the
    array twin of accel_scalar.
    """
    p = x[..., 0]
    psi_ax = x[..., 1]
    xd = x[..., 2]
    psid = x[..., 3]
    y = x[..., 4]
    psit = x[..., 5]

    b2 = params.gauge / 2.0
    t0 = math.tan(params.delta_0)
    gam = params.gamma
    m = params.m
    m_x = m + 0.5 * m_cb
    j_yaw = params.j_ax_z + 4.0 * params.j_w_z
    j_roll = params.j_ax_x + 4.0 * params.j_w_x
    j_spin = params.j_w_y

    psi_tr, k1, k1p, phi_tr, k2, k2p = track.channels_at(p)

    p_rear = np.maximum(p - params.l_cb, 0.0)
    psi_rear, k1_rear = track.psi_pair_at(p_rear)
    psi_cb = 0.5 * (psi_tr + psi_rear)
    k1_cb = 0.5 * (k1 + k1_rear)
    # d(psi_cb)/dx: the rear term is constant while the clamp is active.
    k1_cb_dx = 0.5 * (k1 + np.where(p > params.l_cb, k1_rear, 0.0))

    s = np.sin(psit)
    c = np.cos(psit)
    cc = c * c
    amp = params.delta_0 * b2        # z-constraint prefactor
    A = amp * s / cc                 # dz/dpsi_trax
    Ad = amp * (1.0 + s * s) / (cc * c)

    r_ri = params.r_0 + t0 * y
    r_le = params.r_0 - t0 * y
    y_ri = b2 - y
    y_le = b2 + y

    az0 = -A * k1 - 2.0 * gam * y * s
    az1 = A
    ap0 = -gam * s + k2
    sp0 = (y_ri * k1 - 1.0) / r_ri - (1.0 + y_le * k1) / r_le
    sp1 = y_ri / r_ri - y_le / r_le

    m00 = m_x + m * (s * s + az0 * az0) + j_roll * ap0 * ap0 + j_spin * sp0 * sp0
    m01 = m * az0 * az1 + j_spin * sp0 * sp1
    m11 = m * az1 * az1 + j_yaw + j_spin * sp1 * sp1

    v_y = s * xd
    v_z = az0 * xd + az1 * psid
    v_phi = ap0 * xd
    v_spin = sp0 * xd + sp1 * psid

    # partials w.r.t. p (through the tabulated derivative channels)
    dz0_p = -A * k1p
    dsp0_p = y_ri * k1p / r_ri - y_le * k1p / r_le
    dv_z_p = dz0_p * xd
    dv_phi_p = k2p * xd
    dv_spin_p = dsp0_p * xd
    quad_p = 2.0 * (m * dv_z_p * v_z + j_roll * dv_phi_p * v_phi
                    + j_spin * dv_spin_p * v_spin)
    mp_q0 = m * (dz0_p * v_z + az0 * dv_z_p) \
        + j_roll * (k2p * v_phi + ap0 * dv_phi_p) \
        + j_spin * (dsp0_p * v_spin + sp0 * dv_spin_p)
    mp_q1 = m * az1 * dv_z_p + j_spin * sp1 * dv_spin_p

    # partials w.r.t. psi_trax
    dz0_s = -Ad * k1 - 2.0 * gam * y * c
    dphi0_s = -gam * c
    dv_y_s = c * xd
    dv_z_s = dz0_s * xd + Ad * psid
    dv_phi_s = dphi0_s * xd
    ms_q0 = m * (c * v_y + s * dv_y_s) + m * (dz0_s * v_z + az0 * dv_z_s) \
        + j_roll * (dphi0_s * v_phi + ap0 * dv_phi_s)
    ms_q1 = m * (Ad * v_z + az1 * dv_z_s)

    # partials w.r.t. y_trax (wheel radii and rail distances shift)
    dz0_y = -2.0 * gam * s
    dsp0_y = (-k1 * r_ri - (y_ri * k1 - 1.0) * t0) / (r_ri * r_ri) \
        - (k1 * r_le + (1.0 + y_le * k1) * t0) / (r_le * r_le)
    dsp1_y = (-r_ri - y_ri * t0) / (r_ri * r_ri) - (r_le + y_le * t0) / (r_le * r_le)
    dv_z_y = dz0_y * xd
    dv_spin_y = dsp0_y * xd + dsp1_y * psid
    my_q0 = m * (dz0_y * v_z + az0 * dv_z_y) + j_spin * (dsp0_y * v_spin + sp0 * dv_spin_y)
    my_q1 = m * az1 * dv_z_y + j_spin * (dsp1_y * v_spin + sp1 * dv_spin_y)

    psit_rate = psid - k1 * xd
    mdotq0 = mp_q0 * xd + ms_q0 * psit_rate + my_q0 * v_y
    mdotq1 = mp_q1 * xd + ms_q1 * psit_rate + my_q1 * v_y

    # dE_T/dq: the auxiliary lateral states are exogenous under coordinate
    # variations, so only the arc dependence of the track channels remains
    g_t0 = 0.5 * quad_p

    phi_trax = -gam * y + phi_tr
    yaw_err = psi_ax - psi_cb
    g_v0 = -params.k_s_z * yaw_err * k1_cb_dx + params.k_s_x * phi_trax * k2
    g_v1 = params.k_s_z * yaw_err

    yaw_rate_err = psid - k1_cb * xd
    q_d0 = -params.k_d_z * yaw_rate_err * k1_cb + params.k_d_x * v_phi * ap0
    q_d1 = params.k_d_z * yaw_rate_err

    rhs0 = f_gen[..., 0] - mdotq0 + g_t0 - g_v0 - q_d0
    rhs1 = f_gen[..., 1] - mdotq1 - g_v1 - q_d1
    det = m00 * m11 - m01 * m01
    xdd = (m11 * rhs0 - m01 * rhs1) / det
    psidd = (m00 * rhs1 - m01 * rhs0) / det
    return np.stack([xdd, psidd], axis=-1), k1


def torque_generalized_forces(x: np.ndarray, u: np.ndarray,
                              params: VehicleParams) -> np.ndarray:
    """Ideal-rolling torque map onto the reduced coordinates (vectorized)."""
    y = x[..., 4]
    t0 = math.tan(params.delta_0)
    b2 = params.gauge / 2.0
    r_ri = params.r_0 + t0 * y
    r_le = params.r_0 - t0 * y
    y_ri = b2 - y
    y_le = b2 + y
    tau_ri = u[..., 0]
    tau_le = u[..., 1]
    return -np.stack([
        tau_le / r_le + tau_ri / r_ri,
        y_le * tau_le / r_le - y_ri * tau_ri / r_ri,
    ], axis=-1)


def dynamics_array(x: np.ndarray, u: np.ndarray, track: TrackGeometry,
                   params: VehicleParams, m_cb: float) -> np.ndarray:
    """State derivative f(x, u) for one or many states."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    f_gen = torque_generalized_forces(x, u, params)
    acc, k1 = _gear_accelerations_k1(x, f_gen, track, params, m_cb)
    xd = x[..., 2]
    psid = x[..., 3]
    return np.stack([
        xd,
        psid,
        acc[..., 0],
        acc[..., 1],
        xd * np.sin(x[..., 5]),
        psid - k1 * xd,
    ], axis=-1)


def step_array(x: np.ndarray, u: np.ndarray, track: TrackGeometry,
               params: VehicleParams, m_cb: float, dt: float) -> np.ndarray:
    """Explicit Euler step of the control model."""
    return x + dt * dynamics_array(x, u, track, params, m_cb)


# FD perturbation sizes per state channel and for the torque inputs;
# chosen so rounding (scales with the position magnitude over the step)
# and truncation both stay below 1e-9 on the step Jacobian entries.
_FD_STATE_STEPS = np.array([1e-3, 1e-4, 1e-4, 1e-4, 1e-5, 1e-4])
_FD_INPUT_STEP = 0.5


def linearize_batch(x: np.ndarray, u: np.ndarray, track: TrackGeometry,
                    params: VehicleParams, m_cb: float, dt: float):
    """Central-difference Jacobians of the Euler step at many points.

    x: (N, 6), u: (N, 2) -> A: (N, 6, 6), B: (N, 6, 2).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n = x.shape[0]

    xs = np.broadcast_to(x[:, None, None, :], (n, 6, 2, 6)).copy()
    sign = np.array([1.0, -1.0])
    for j in range(6):
        xs[:, j, :, j] += sign * _FD_STATE_STEPS[j]
    us = np.broadcast_to(u[:, None, None, :], (n, 6, 2, 2))
    fx = step_array(xs.reshape(-1, 6), us.reshape(-1, 2), track, params, m_cb, dt)
    fx = fx.reshape(n, 6, 2, 6)
    a_mat = (fx[:, :, 0, :] - fx[:, :, 1, :]) / (2.0 * _FD_STATE_STEPS)[None, :, None]
    a_mat = np.swapaxes(a_mat, 1, 2)

    us2 = np.broadcast_to(u[:, None, None, :], (n, 2, 2, 2)).copy()
    for j in range(2):
        us2[:, j, :, j] += sign * _FD_INPUT_STEP
    xs2 = np.broadcast_to(x[:, None, None, :], (n, 2, 2, 6))
    fu = step_array(xs2.reshape(-1, 6), us2.reshape(-1, 2), track, params, m_cb, dt)
    fu = fu.reshape(n, 2, 2, 6)
    b_mat = (fu[:, :, 0, :] - fu[:, :, 1, :]) / (2.0 * _FD_INPUT_STEP)
    b_mat = np.swapaxes(b_mat, 1, 2)
    return a_mat, b_mat


# ----------------------------------------------------------------------
# public scalar operations
# ----------------------------------------------------------------------

def continuous_dynamics(state: GearState, u: ControlInput, theta: ModelTheta,
                        params: VehicleParams) -> np.ndarray:
    """Time derivative of the six-element state."""
    if state.xdot <= SPEED_FLOOR:
        raise ValueError(f"model valid only above {SPEED_FLOOR} m/s")
    return dynamics_array(state.as_array(), u.as_array(), theta.track,
                          params, theta.m_cb)


def discrete_step(state: GearState, u: ControlInput, theta: ModelTheta,
                  params: VehicleParams, dt: float) -> GearState:
    """Explicit Euler step returning a new state."""
    if dt <= 0.0:
        raise ValueError("step size must be positive")
    nxt = step_array(state.as_array(), u.as_array(), theta.track, params,
                     theta.m_cb, dt)
    return GearState.from_array(nxt)


def linearize(x_lin: GearState, u_lin: ControlInput, theta: ModelTheta,
              params: VehicleParams, dt: float):
    """Jacobians (A, B) of the Euler step at one linearization point."""
    a_mat, b_mat = linearize_batch(x_lin.as_array()[None, :],
                                   u_lin.as_array()[None, :],
                                   theta.track, params, theta.m_cb, dt)
    return a_mat[0], b_mat[0]


# ----------------------------------------------------------------------
# plain-float fast path
# ----------------------------------------------------------------------
#
# Sequential work (plant integration at 1 kHz, predictive rollouts) is
# dominated by per-call numpy overhead, so the same equations exist in a
# scalar form.  A test pins the two paths to each other.


class ScalarParams:
    """Precomputed plain-float parameter bundle for the scalar core."""

    __slots__ = ("m", "m_x", "j_yaw", "j_roll", "j_spin", "t0", "gam", "b2",
                 "amp", "k_s_x", "k_s_z", "k_d_x", "k_d_z", "r0", "l_cb", "g")

    def __init__(self, params: VehicleParams, m_cb: float):
        self.m = params.m
        self.m_x = params.m + 0.5 * m_cb
        self.j_yaw = params.j_ax_z + 4.0 * params.j_w_z
        self.j_roll = params.j_ax_x + 4.0 * params.j_w_x
        self.j_spin = params.j_w_y
        self.t0 = math.tan(params.delta_0)
        self.gam = params.gamma
        self.b2 = params.gauge / 2.0
        self.amp = params.delta_0 * self.b2
        self.k_s_x = params.k_s_x
        self.k_s_z = params.k_s_z
        self.k_d_x = params.k_d_x
        self.k_d_z = params.k_d_z
        self.r0 = params.r_0
        self.l_cb = params.l_cb
        self.g = params.g


def accel_scalar(tc, sp: ScalarParams, p, psi_ax, xd, psid, y, psit,
                 f1, f2, j_spin):
    """Scalar twin of gear_accelerations.

    tc is a track.TrackScalars cache; f1/f2 are the generalized forces and
    j_spin the ideal-rolling spin inertia (zero when the caller carries the
    wheel spins as independent states).  Returns (xdd, psidd, k1, sin_psit).
    """
    psi_t, k1, k1p, phi_tr, k2, k2p = tc.channels(p)
    p_rear = p - sp.l_cb
    if p_rear < 0.0:
        p_rear = 0.0
        rear_moving = 0.0
    else:
        rear_moving = 1.0
    psi_r, k1_r = tc.psi_pair(p_rear)
    psi_cb = 0.5 * (psi_t + psi_r)
    k1_cb = 0.5 * (k1 + k1_r)
    k1_cb_dx = 0.5 * (k1 + rear_moving * k1_r)

    s = math.sin(psit)
    c = math.cos(psit)
    cc = c * c
    A = sp.amp * s / cc
    Ad = sp.amp * (1.0 + s * s) / (cc * c)
    t0 = sp.t0
    gam = sp.gam
    r_ri = sp.r0 + t0 * y
    r_le = sp.r0 - t0 * y
    y_ri = sp.b2 - y
    y_le = sp.b2 + y

    az0 = -A * k1 - 2.0 * gam * y * s
    az1 = A
    ap0 = -gam * s + k2
    sp0 = (y_ri * k1 - 1.0) / r_ri - (1.0 + y_le * k1) / r_le
    sp1 = y_ri / r_ri - y_le / r_le

    m = sp.m
    m00 = sp.m_x + m * (s * s + az0 * az0) + sp.j_roll * ap0 * ap0 + j_spin * sp0 * sp0
    m01 = m * az0 * az1 + j_spin * sp0 * sp1
    m11 = m * az1 * az1 + sp.j_yaw + j_spin * sp1 * sp1

    v_y = s * xd
    v_z = az0 * xd + az1 * psid
    v_phi = ap0 * xd
    v_spin = sp0 * xd + sp1 * psid

    # partials w.r.t. p
    dz0_p = -A * k1p
    dphi0_p = k2p
    dsp0_p = y_ri * k1p / r_ri - y_le * k1p / r_le
    dv_z_p = dz0_p * xd
    dv_phi_p = dphi0_p * xd
    dv_spin_p = dsp0_p * xd
    quad_p = 2.0 * (m * dv_z_p * v_z + sp.j_roll * dv_phi_p * v_phi
                    + j_spin * dv_spin_p * v_spin)
    mp_q0 = m * (dz0_p * v_z + az0 * dv_z_p) \
        + sp.j_roll * (dphi0_p * v_phi + ap0 * dv_phi_p) \
        + j_spin * (dsp0_p * v_spin + sp0 * dv_spin_p)
    mp_q1 = m * az1 * dv_z_p + j_spin * sp1 * dv_spin_p

    # partials w.r.t. psi_trax
    dz0_s = -Ad * k1 - 2.0 * gam * y * c
    dz1_s = Ad
    dphi0_s = -gam * c
    dv_y_s = c * xd
    dv_z_s = dz0_s * xd + dz1_s * psid
    dv_phi_s = dphi0_s * xd
    ms_q0 = m * (c * v_y + s * dv_y_s) + m * (dz0_s * v_z + az0 * dv_z_s) \
        + sp.j_roll * (dphi0_s * v_phi + ap0 * dv_phi_s)
    ms_q1 = m * (dz1_s * v_z + az1 * dv_z_s)

    # partials w.r.t. y_trax
    dz0_y = -2.0 * gam * s
    dsp0_y = (-k1 * r_ri - (y_ri * k1 - 1.0) * t0) / (r_ri * r_ri) \
        - (k1 * r_le + (1.0 + y_le * k1) * t0) / (r_le * r_le)
    dsp1_y = (-r_ri - y_ri * t0) / (r_ri * r_ri) - (r_le + y_le * t0) / (r_le * r_le)
    dv_z_y = dz0_y * xd
    dv_spin_y = dsp0_y * xd + dsp1_y * psid
    my_q0 = m * (dz0_y * v_z + az0 * dv_z_y) + j_spin * (dsp0_y * v_spin + sp0 * dv_spin_y)
    my_q1 = m * az1 * dv_z_y + j_spin * (dsp1_y * v_spin + sp1 * dv_spin_y)

    psit_rate = psid - k1 * xd
    mdotq0 = mp_q0 * xd + ms_q0 * psit_rate + my_q0 * v_y
    mdotq1 = mp_q1 * xd + ms_q1 * psit_rate + my_q1 * v_y

    g_t0 = 0.5 * quad_p

    phi_trax = -gam * y + phi_tr
    yaw_err = psi_ax - psi_cb
    g_v0 = -sp.k_s_z * yaw_err * k1_cb_dx + sp.k_s_x * phi_trax * k2
    g_v1 = sp.k_s_z * yaw_err

    yaw_rate_err = psid - k1_cb * xd
    q_d0 = -sp.k_d_z * yaw_rate_err * k1_cb + sp.k_d_x * v_phi * ap0
    q_d1 = sp.k_d_z * yaw_rate_err

    rhs0 = f1 - mdotq0 + g_t0 - g_v0 - q_d0
    rhs1 = f2 - mdotq1 - g_v1 - q_d1
    det = m00 * m11 - m01 * m01
    xdd = (m11 * rhs0 - m01 * rhs1) / det
    psidd = (m00 * rhs1 - m01 * rhs0) / det
    return xdd, psidd, k1, s


def dynamics_scalar(tc, sp: ScalarParams, st, tau_ri, tau_le):
    """Scalar state derivative under the ideal-rolling torque map."""
    p, psi_ax, xd, psid, y, psit = st
    t0 = sp.t0
    r_ri = sp.r0 + t0 * y
    r_le = sp.r0 - t0 * y
    y_ri = sp.b2 - y
    y_le = sp.b2 + y
    f1 = -(tau_le / r_le + tau_ri / r_ri)
    f2 = -(y_le * tau_le / r_le - y_ri * tau_ri / r_ri)
    xdd, psidd, k1, s = accel_scalar(tc, sp, p, psi_ax, xd, psid, y, psit,
                                     f1, f2, sp.j_spin)
    return (xd, psid, xdd, psidd, xd * s, psid - k1 * xd)


def step_scalar(tc, sp: ScalarParams, st, tau_ri, tau_le, dt):
    """Scalar Euler step (matches step_array)."""
    d = dynamics_scalar(tc, sp, st, tau_ri, tau_le)
    return (st[0] + dt * d[0], st[1] + dt * d[1], st[2] + dt * d[2],
            st[3] + dt * d[3], st[4] + dt * d[4], st[5] + dt * d[5])


# ----------------------------------------------------------------------
# energies (shared definitions for validation and analysis)
# ----------------------------------------------------------------------

def energies(x: np.ndarray, track: TrackGeometry, params: VehicleParams,
             m_cb: float) -> tuple[float, float, float]:
    """Kinetic, potential and dissipation energies of one state.

    The same constraint substitutions as the dynamics are applied, so
    finite differences of these functions provide an independent
    Euler-Lagrange route to the accelerations.
    """
    x = np.asarray(x, dtype=float)
    p, psi_ax, xd, psid, y, psit = (float(x[i]) for i in range(6))

    b2 = params.gauge / 2.0
    t0 = math.tan(params.delta_0)
    gam = params.gamma
    m_x = params.m + 0.5 * m_cb

    k1 = float(track.dpsi_at(p))
    k2 = float(track.dphi_at(p))
    phi_tr = float(track.phi_at(p))
    p_rear = max(p - params.l_cb, 0.0)
    psi_cb = 0.5 * (float(track.psi_at(p)) + float(track.psi_at(p_rear)))
    k1_cb = 0.5 * (k1 + float(track.dpsi_at(p_rear)))

    s, c = math.sin(psit), math.cos(psit)
    psit_rate = psid - k1 * xd
    y_rate = xd * s
    z = params.delta_0 * b2 * (1.0 / c - 1.0) - gam * y * y - params.r_0
    z_rate = params.delta_0 * b2 * s / (c * c) * psit_rate - 2.0 * gam * y * y_rate
    phi_trax = -gam * y + phi_tr
    phi_rate = (-gam * s + k2) * xd

    r_ri = params.r_0 + t0 * y
    r_le = params.r_0 - t0 * y
    y_ri = b2 - y
    y_le = b2 + y
    yaw = k1 * xd + psid
    omega_ri = -(xd - y_ri * yaw) / r_ri
    omega_le = -(xd + y_le * yaw) / r_le

    # wheel angular velocity vectors in the axle frame: roll, spin, yaw
    w_sum = np.array([2.0 * phi_rate, omega_ri + omega_le, 2.0 * psid])
    j_w = np.array([params.j_w_x, params.j_w_y, params.j_w_z])

    e_t = 0.5 * (m_x * xd * xd + params.m * (y_rate ** 2 + z_rate ** 2)) \
        + 0.5 * (params.j_ax_z * psid ** 2 + params.j_ax_x * phi_rate ** 2) \
        + 0.5 * float(w_sum @ (j_w * w_sum))
    e_v = 0.5 * (params.k_s_z * (psi_ax - psi_cb) ** 2
                 + params.k_s_x * phi_trax ** 2) - params.m * params.g * z
    yaw_rate_cb = k1_cb * xd
    e_d = 0.5 * (params.k_d_z * (psid - yaw_rate_cb) ** 2
                 + params.k_d_x * phi_rate ** 2)
    return e_t, e_v, e_d
