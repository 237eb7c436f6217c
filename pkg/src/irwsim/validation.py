"""Independent numeric checks of the gear model.

The closed-form equations of motion are validated against a brute-force
Euler-Lagrange route: all derivatives of the energy functions are taken
numerically, with the same reduction conventions the model uses (the
auxiliary lateral states are exogenous under coordinate variations but
flow in time; track channels vary with the arc coordinate).  The kinetic
energy and the dissipation function are exact quadratics in the
generalized velocities, so their velocity gradients use wide exact
differences; the coordinate gradients use fourth-order stencils.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from . import model
from .model import VehicleParams
from .track import TrackGeometry, TrackSpec, build_track


def _perturbed_state(x6, track, dq=(0.0, 0.0), dqd=(0.0, 0.0)):
    """Apply a generalized-coordinate variation to the full state.

    The auxiliary lateral states (y_trax, psi_trax) stay fixed: they are
    exogenous parameters of the reduced Lagrangian.
    """
    x = np.array(x6, dtype=float)
    x[0] += dq[0]
    x[1] += dq[1]
    x[2] += dqd[0]
    x[3] += dqd[1]
    return x


def _d4(f, h):
    """Fourth-order central difference of a scalar function at 0."""
    return (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)


def euler_lagrange_accel(x6, u2, track: TrackGeometry, params: VehicleParams,
                         m_cb: float) -> np.ndarray:
    """(xddot, psiddot) from finite differences of the energy functions."""
    x6 = np.asarray(x6, dtype=float)

    def energies(x):
        return model.energies(x, track, params, m_cb)

    # mass matrix: exact second differences (kinetic energy is quadratic)
    hv = 1.0
    eye = np.eye(2)

    def e_t(dqd):
        return energies(_perturbed_state(x6, track, dqd=dqd))[0]

    m_mat = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ei, ej = eye[i] * hv, eye[j] * hv
            m_mat[i, j] = (e_t(ei + ej) - e_t(ei - ej) - e_t(-ei + ej)
                           + e_t(-ei - ej)) / (4.0 * hv * hv)

    # d/dt of dE_T/dqdot at frozen velocities isolates (dM/dt) qdot
    def grad_v(x):
        g = np.empty(2)
        for i in range(2):
            dv = np.zeros(6)
            dv[2 + i] = hv
            g[i] = (energies(x + dv)[0] - energies(x - dv)[0]) / (2.0 * hv)
        return g

    xd, psid = x6[2], x6[3]
    k1 = float(track.dpsi_at(x6[0]))
    flow = np.array([xd, psid, 0.0, 0.0, xd * math.sin(x6[5]), psid - k1 * xd])
    dt = 1e-4
    mdot_qdot = (grad_v(x6 - 2.0 * dt * flow) - 8.0 * grad_v(x6 - dt * flow)
                 + 8.0 * grad_v(x6 + dt * flow)
                 - grad_v(x6 + 2.0 * dt * flow)) / (12.0 * dt)

    # coordinate gradients of kinetic and potential energy
    hq = (1e-3, 1e-4)
    g_t = np.empty(2)
    g_v = np.empty(2)
    for i in range(2):
        def f_t(h, i=i):
            d = [0.0, 0.0]
            d[i] = h
            return energies(_perturbed_state(x6, track, dq=tuple(d)))[0]

        def f_v(h, i=i):
            d = [0.0, 0.0]
            d[i] = h
            return energies(_perturbed_state(x6, track, dq=tuple(d)))[1]

        g_t[i] = _d4(f_t, hq[i])
        g_v[i] = _d4(f_v, hq[i])

    # dissipation gradient (quadratic in the velocities as well)
    q_d = np.empty(2)
    for i in range(2):
        ei = eye[i] * hv
        q_d[i] = (energies(_perturbed_state(x6, track, dqd=tuple(ei)))[2]
                  - energies(_perturbed_state(x6, track, dqd=tuple(-ei)))[2]) / (2.0 * hv)

    # torque map onto the reduced coordinates
    t0 = math.tan(params.delta_0)
    b2 = params.gauge / 2.0
    y = x6[4]
    r_ri = params.r_0 + t0 * y
    r_le = params.r_0 - t0 * y
    f_gen = -np.array([
        u2[1] / r_le + u2[0] / r_ri,
        (b2 + y) * u2[1] / r_le - (b2 - y) * u2[0] / r_ri,
    ])

    rhs = f_gen - mdot_qdot + g_t - g_v - q_d
    return np.linalg.solve(m_mat, rhs)


def _mid_interval(p: float, step: float = 0.5) -> float:
    """Shift an arc position to the middle of its table interval so the
    finite-difference stencils never straddle a knot."""
    return (math.floor(p / step) + 0.5) * step


def lagrange_oracle_errors(track: TrackGeometry, params: VehicleParams,
                           n: int = 100, seed: int = 0) -> np.ndarray:
    """Relative deviations between the model and the numeric route."""
    rng = np.random.default_rng(seed)
    errs = np.empty(n)
    lo, hi = 30.0, track.total_length - 50.0
    for k in range(n):
        x6 = np.array([
            _mid_interval(rng.uniform(lo, hi)),
            0.0,
            rng.uniform(5.0, 90.0),
            rng.normal(0.0, 0.02),
            rng.uniform(-4e-3, 4e-3),
            rng.normal(0.0, 0.01),
        ])
        x6[1] = float(track.psi_at(x6[0])) + rng.normal(0.0, 2e-3)
        u2 = rng.uniform(-6000.0, 6000.0, 2)
        ref = euler_lagrange_accel(x6, u2, track, params, params.m_cb)
        got = model.dynamics_array(x6, u2, track, params, params.m_cb)[2:4]
        errs[k] = np.max(np.abs(got - ref)) / max(np.max(np.abs(ref)), 1e-2)
    return errs


def rk4_trajectory(x0, u2, track, params, m_cb, dt, n_steps):
    """Reference integration of the control model (fixed-step RK4)."""
    out = np.empty((n_steps + 1, 6))
    out[0] = x0
    tc = track.scalars()
    sp = model.ScalarParams(params, m_cb)
    tau_ri, tau_le = float(u2[0]), float(u2[1])
    x = tuple(float(v) for v in x0)
    for k in range(n_steps):
        k1 = model.dynamics_scalar(tc, sp, x, tau_ri, tau_le)
        x1 = tuple(x[i] + 0.5 * dt * k1[i] for i in range(6))
        k2 = model.dynamics_scalar(tc, sp, x1, tau_ri, tau_le)
        x2 = tuple(x[i] + 0.5 * dt * k2[i] for i in range(6))
        k3 = model.dynamics_scalar(tc, sp, x2, tau_ri, tau_le)
        x3 = tuple(x[i] + dt * k3[i] for i in range(6))
        k4 = model.dynamics_scalar(tc, sp, x3, tau_ri, tau_le)
        x = tuple(x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                  for i in range(6))
        out[k + 1] = x
    return out


def energy_drift(params: VehicleParams, duration: float = 10.0,
                 dt: float = 1e-3) -> float:
    """Relative drift of E_T + E_V on a straight coast with dampers off."""
    par = replace(params, k_d_x=0.0, k_d_z=0.0)
    track = build_track(TrackSpec(shape="straight", total_length=3000.0))
    x0 = np.array([50.0, 1e-3, 20.0, 0.0, 1e-3, 1e-3])
    n = int(round(duration / dt))
    traj = rk4_trajectory(x0, np.zeros(2), track, par, par.m_cb, dt, n)
    e0 = sum(model.energies(traj[0], track, par, par.m_cb)[:2])
    drift = 0.0
    for k in range(0, n + 1, max(1, n // 100)):
        e = sum(model.energies(traj[k], track, par, par.m_cb)[:2])
        drift = max(drift, abs(e - e0))
    return drift / abs(e0)


def _jacobian_reference(x6, u2, track, params, m_cb, dt):
    """Fourth-order step Jacobians; pairwise differences are formed first
    so channels untouched by a perturbation cancel exactly."""
    def col(f, h):
        d1 = f(1.0) - f(-1.0)
        d2 = f(2.0) - f(-2.0)
        return (8.0 * d1 - d2) / (12.0 * h)

    a_ref = np.empty((6, 6))
    steps = (2e-3, 2e-4, 2e-4, 2e-4, 2e-5, 2e-4)
    for j in range(6):
        dv = np.zeros(6)
        dv[j] = steps[j]

        def f(a, dv=dv):
            return model.step_array(x6 + a * dv, u2, track, params, m_cb, dt)

        a_ref[:, j] = col(f, steps[j])
    b_ref = np.empty((6, 2))
    for j in range(2):
        du = np.zeros(2)
        du[j] = 1.0

        def f(a, du=du):
            return model.step_array(x6, u2 + a * du, track, params, m_cb, dt)

        b_ref[:, j] = col(f, 1.0)
    return a_ref, b_ref


def _entry_relative(got, ref):
    """Entry-wise relative error; entries below 1 % of their column's
    dominant magnitude are measured against that floor instead."""
    col_scale = np.max(np.abs(ref), axis=0, keepdims=True)
    scale = np.maximum(np.abs(ref), np.maximum(0.01 * col_scale, 1e-12))
    return float(np.max(np.abs(got - ref) / scale))


def linearize_fd_errors(track: TrackGeometry, params: VehicleParams,
                        n: int = 20, dt: float = 0.01, seed: int = 1) -> float:
    """Worst relative mismatch of linearize against an independent stencil."""
    rng = np.random.default_rng(seed)
    theta = model.ModelTheta.from_params(track, params)
    worst = 0.0
    for _ in range(n):
        x6 = np.array([
            _mid_interval(rng.uniform(30.0, track.total_length - 50.0)),
            rng.normal(0.0, 2e-3),
            rng.uniform(5.0, 90.0),
            rng.normal(0.0, 0.02),
            rng.uniform(-4e-3, 4e-3),
            rng.normal(0.0, 0.01),
        ])
        u2 = rng.uniform(-6000.0, 6000.0, 2)
        a_mat, b_mat = model.linearize(model.GearState.from_array(x6),
                                       model.ControlInput(*u2), theta, params, dt)
        a_ref, b_ref = _jacobian_reference(x6, u2, track, params, params.m_cb, dt)
        worst = max(worst, _entry_relative(a_mat, a_ref),
                    _entry_relative(b_mat, b_ref))
    return worst


def model_check(verbose: bool = True) -> bool:
    """Run the model validation suites; returns overall pass/fail."""
    params = VehicleParams()
    track = build_track(TrackSpec(
        shape="straight-clothoid-curve", design_velocity=77.78,
        design_lateral_accel=0.4333, curve_radius=4250.0, total_length=1500.0))
    checks = []
    errs = lagrange_oracle_errors(track, params, n=40)
    checks.append(("euler-lagrange oracle (40 pts)", float(np.max(errs)), 1e-6))
    checks.append(("energy drift (10 s, dampers off)", energy_drift(params), 1e-6))
    checks.append(("step jacobians vs reference stencil",
                   linearize_fd_errors(track, params, n=10), 1e-6))
    ok = True
    for name, value, tol in checks:
        passed = value <= tol
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.3e} (tol {tol:.0e})")
    return ok
