"""Predictive lateral guidance.

Two controllers share one transcription: the decision variables are the
differential torques over the horizon, the base torque sequence enters as
known data, and both wheel commands are reconstructed through the same
saturation-aware blending rule that the torque integration stage applies
at runtime, so predictions match what the motors will actually see.

The nonlinear controller iterates Gauss-Newton steps around the rolled-out
trajectory (exact constraint linearization, least-squares Hessian of the
tracking cost) until the projected-gradient residual is small.  The
linear time-varying variant linearizes once per solve around a centered
riding position at forecast track positions and condenses into a single
bound-constrained QP.  State boxes are softened with one-sided quadratic
penalties; input boxes are hard.

Commanded torques are drive-positive; the model boundary negates them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import model
from .integration import TorqueLimits, integrate
from .model import GearState, ModelTheta, ScalarParams, VehicleParams

SPEED_FLOOR = 0.1


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, weights, constraint boxes and solver contract."""

    # The internal Euler step must resolve the yaw mode (about 180 rad/s
    # at low speed with the default binding); 5 ms keeps it contractive.
    # The long horizon and heavy terminal weight preserve lateral authority
    # at low running speeds, where little set-point distance fits into H.
    steps: int = 100              # L
    step_dt: float = 0.005        # T [s]
    q_diag: tuple = (0.0, 0.0, 1.0, 10.0, 5.0e8, 1.0e5)
    r_weight: float = 1.0e-5      # differential torque weight
    q_term: float = 1000.0        # terminal weight factor on the lateral pair
    y_lim: float = 0.007          # |y_trax| soft box [m]
    psi_lim: float = 0.05         # |psi_trax| soft box [rad]
    du_max: float = 12000.0       # hard |du| box [N m]
    soft_weight: float = 1.0e6    # state box penalty weight
    kkt_tol: float = 1.0e-6
    kkt_tol_ltv: float = 1.0e-8
    max_iters: int = 30
    control_period: float = 0.01  # closed-loop recompute period [s]
    use_preview: bool = True      # ablation switch: freeze set point / track

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("horizon needs at least one step")
        if self.r_weight <= 0.0:
            raise ValueError("input weight must be positive")
        if any(q < 0.0 for q in self.q_diag) or len(self.q_diag) != 6:
            raise ValueError("q_diag must be six nonnegative weights")

    @property
    def horizon(self) -> float:
        return self.steps * self.step_dt

    @staticmethod
    def from_horizon(horizon: float, steps: int, **kw) -> "MpcConfig":
        return MpcConfig(steps=steps, step_dt=horizon / steps, **kw)

    def terminal_diag(self) -> np.ndarray:
        out = np.zeros(6)
        out[4] = self.q_term * self.q_diag[4]
        out[5] = self.q_term * self.q_diag[5]
        return out


@dataclass(frozen=True)
class PreviewInputs:
    """Everything the lateral solve sees at one control instant."""

    y_star: Callable[[np.ndarray], np.ndarray]  # set point by position [m -> m]
    u_d_seq: np.ndarray                         # base torque over horizon (L,)
    theta: ModelTheta
    x_hat: np.ndarray                           # current state estimate (6,)


@dataclass
class MpcSolution:
    du: np.ndarray          # (L,)
    x_pred: np.ndarray      # (L+1, 6)
    cost: float             # tracking cost (penalties excluded)
    kkt: float              # projected-gradient residual at return
    iters: int
    solve_time: float       # wall time [s]; never drives control flow
    flag: str = ""

    def shifted(self) -> np.ndarray:
        """Warm start for the next solve: drop the first move, repeat the last."""
        return np.concatenate([self.du[1:], self.du[-1:]])


class ModelDynamics:
    """Drive-positive command adapter around the gear model."""

    def __init__(self, theta: ModelTheta, params: VehicleParams, dt: float):
        self.theta = theta
        self.params = params
        self.dt = dt
        self._tc = theta.track.scalars()
        self._sp = ScalarParams(params, theta.m_cb)

    def step(self, x, tau_ri: float, tau_le: float):
        return model.step_scalar(self._tc, self._sp, x, -tau_ri, -tau_le, self.dt)

    def step_batch(self, x: np.ndarray, u_cmd: np.ndarray) -> np.ndarray:
        return model.step_array(x, -u_cmd, self.theta.track, self.params,
                                self.theta.m_cb, self.dt)

    def linearize_seq(self, x: np.ndarray, u_cmd: np.ndarray):
        a_mat, b_mat = model.linearize_batch(x, -u_cmd, self.theta.track,
                                             self.params, self.theta.m_cb, self.dt)
        return a_mat, -b_mat


# ----------------------------------------------------------------------
# preview
# ----------------------------------------------------------------------

def desired_sequence(preview: PreviewInputs, params: VehicleParams,
                     cfg: MpcConfig) -> tuple[np.ndarray, bool]:
    """Desired state sequence (L+1, 6) over the horizon plus a clamp flag.

    Future positions and speeds extrapolate from the current estimate under
    the known base torque; the set point and track values are read at those
    positions.  The desired relative yaw follows from the set point slope,
    differenced centrally along the horizon.  With use_preview off, the set
    point and track values are frozen at the current position.
    """
    x_hat = preview.x_hat
    if x_hat[2] <= SPEED_FLOOR:
        raise ValueError("preview needs forward motion")
    L = cfg.steps
    T = cfg.step_dt
    track = preview.theta.track
    m_x = params.m + 0.5 * preview.theta.m_cb

    u_d = np.asarray(preview.u_d_seq, dtype=float)
    if u_d.shape != (L,):
        raise ValueError(f"base torque sequence must have length {L}")
    u_ext = np.concatenate([u_d, u_d[-1:]])
    tk = T * np.arange(L + 1)
    acc = u_ext / (params.r_0 * m_x)
    x_d = x_hat[0] + x_hat[2] * tk + 0.5 * acc * tk * tk
    xd_d = np.maximum(x_hat[2] + acc * tk, SPEED_FLOOR)

    clamped = bool(x_d[-1] > track.total_length)
    lookup = x_d if cfg.use_preview else np.full(L + 1, x_hat[0])

    y_d = np.asarray(preview.y_star(lookup), dtype=float)
    ydot_d = np.empty(L + 1)
    ydot_d[1:-1] = (y_d[2:] - y_d[:-2]) / (2.0 * T)
    ydot_d[0] = (y_d[1] - y_d[0]) / T
    ydot_d[-1] = (y_d[-1] - y_d[-2]) / T
    psi_trax_d = ydot_d / xd_d

    psid_trax_d = np.empty(L + 1)
    psid_trax_d[1:-1] = (psi_trax_d[2:] - psi_trax_d[:-2]) / (2.0 * T)
    psid_trax_d[0] = (psi_trax_d[1] - psi_trax_d[0]) / T
    psid_trax_d[-1] = (psi_trax_d[-1] - psi_trax_d[-2]) / T

    psi_tr = track.psi_at(lookup)
    psid_tr = track.dpsi_at(lookup) * xd_d

    des = np.stack([
        x_d,
        psi_trax_d + psi_tr,
        xd_d,
        psid_trax_d + psid_tr,
        y_d,
        psi_trax_d,
    ], axis=-1)
    return des, clamped


# ----------------------------------------------------------------------
# cost
# ----------------------------------------------------------------------

def cost_eval(x_pred: np.ndarray, du: np.ndarray, x_des: np.ndarray,
              cfg: MpcConfig) -> float:
    """Horizon tracking cost with the terminal lateral term."""
    L = cfg.steps
    if x_pred.shape[0] != L + 1 or x_des.shape[0] != L + 1 or du.shape[0] != L:
        raise ValueError("inconsistent sequence lengths")
    q = np.asarray(cfg.q_diag)
    err = x_pred - x_des
    stage = np.einsum("ki,i,ki->", err[:L], q, err[:L])
    term = float(err[L] @ (cfg.terminal_diag() * err[L]))
    return cfg.step_dt * (stage + cfg.r_weight * float(du @ du) + term)


def _soft_penalty(x_pred: np.ndarray, cfg: MpcConfig) -> float:
    y_v = np.maximum(np.abs(x_pred[:, 4]) - cfg.y_lim, 0.0)
    p_v = np.maximum(np.abs(x_pred[:, 5]) - cfg.psi_lim, 0.0)
    return cfg.step_dt * cfg.soft_weight * float(y_v @ y_v + p_v @ p_v)


def _blend_grad(u_d: float, du: float, lim: TorqueLimits):
    """Wheel commands for (u_d, du) and their derivatives w.r.t. du.

    Away from saturation the commands are u_d +/- du; once the blending
    shaves the common mode, one wheel pins to the limit and the other moves
    at twice the rate.
    """
    tau_ri, tau_le, _ = integrate(u_d, du, lim)
    if u_d > 0.0:
        if u_d <= lim.tau_max - abs(du):
            return tau_ri, tau_le, 1.0, -1.0
        if du >= 0.0:
            return tau_ri, tau_le, 0.0, -2.0
        return tau_ri, tau_le, 2.0, 0.0
    if u_d >= lim.tau_min + abs(du):
        return tau_ri, tau_le, 1.0, -1.0
    if du >= 0.0:
        return tau_ri, tau_le, 2.0, 0.0
    return tau_ri, tau_le, 0.0, -2.0


# ----------------------------------------------------------------------
# bound-constrained QP (projected Newton)
# ----------------------------------------------------------------------

def solve_box_qp(h_mat: np.ndarray, g_vec: np.ndarray, lo: np.ndarray,
                 hi: np.ndarray, tol: float, max_iter: int = 100) -> np.ndarray:
    """min 1/2 d'Hd + g'd subject to lo <= d <= hi, H positive definite."""
    d = np.clip(np.zeros_like(g_vec), lo, hi)
    for _ in range(max_iter):
        grad = h_mat @ d + g_vec
        pg = d - np.clip(d - grad, lo, hi)
        if np.max(np.abs(pg)) <= tol:
            break
        at_lo = (d <= lo + 1e-14) & (grad > 0.0)
        at_hi = (d >= hi - 1e-14) & (grad < 0.0)
        free = ~(at_lo | at_hi)
        if not np.any(free):
            break
        hf = h_mat[np.ix_(free, free)]
        try:
            step_f = np.linalg.solve(hf, -grad[free])
        except np.linalg.LinAlgError:
            step_f = -grad[free] / np.maximum(np.diag(hf), 1e-12)
        step = np.zeros_like(d)
        step[free] = step_f
        # backtrack on the quadratic objective after projection
        obj0 = 0.5 * d @ h_mat @ d + g_vec @ d
        alpha = 1.0
        for _bt in range(30):
            cand = np.clip(d + alpha * step, lo, hi)
            obj = 0.5 * cand @ h_mat @ cand + g_vec @ cand
            if obj < obj0 - 1e-15 * max(abs(obj0), 1.0) or np.array_equal(cand, d):
                break
            alpha *= 0.5
        if np.array_equal(cand, d):
            break
        d = cand
    return d


# ----------------------------------------------------------------------
# shared transcription pieces
# ----------------------------------------------------------------------

def _du_bounds(cfg: MpcConfig, lim: TorqueLimits, L: int):
    cap = min(cfg.du_max, 0.5 * (lim.tau_max - lim.tau_min))
    return np.full(L, -cap), np.full(L, cap)


def _commands(u_d: np.ndarray, du: np.ndarray, lim: TorqueLimits):
    """Blended wheel commands and per-step du gradients."""
    L = u_d.shape[0]
    cmds = np.empty((L, 2))
    grads = np.empty((L, 2))
    for k in range(L):
        tau_ri, tau_le, g_ri, g_le = _blend_grad(float(u_d[k]), float(du[k]), lim)
        cmds[k, 0], cmds[k, 1] = tau_ri, tau_le
        grads[k, 0], grads[k, 1] = g_ri, g_le
    return cmds, grads


def _rollout(dyn: ModelDynamics, x0: np.ndarray, cmds: np.ndarray) -> np.ndarray:
    L = cmds.shape[0]
    out = np.empty((L + 1, 6))
    out[0] = x0
    st = tuple(float(v) for v in x0)
    for k in range(L):
        st = dyn.step(st, cmds[k, 0], cmds[k, 1])
        out[k + 1] = st
    return out


def _sensitivities(a_seq: np.ndarray, b_du: np.ndarray) -> np.ndarray:
    """Forward sensitivities S[k] = dx_k/d(du), shape (L+1, 6, L)."""
    L = b_du.shape[0]
    s_all = np.zeros((L + 1, 6, L))
    s_k = np.zeros((6, L))
    for k in range(L):
        s_k = a_seq[k] @ s_k
        s_k[:, k] += b_du[k]
        s_all[k + 1] = s_k
    return s_all


def _quadratic_terms(x_pred, x_des, du, s_all, cfg: MpcConfig):
    """Gauss-Newton Hessian, gradient and objective of the penalized cost."""
    L = cfg.steps
    T = cfg.step_dt
    err = x_pred - x_des
    w = np.tile(np.asarray(cfg.q_diag), (L + 1, 1))
    w[L] = cfg.terminal_diag()

    # active one-sided state box penalties add weight and shift the target
    viol = np.zeros_like(err)
    for idx, limit in ((4, cfg.y_lim), (5, cfg.psi_lim)):
        over = x_pred[:, idx] - limit
        under = -limit - x_pred[:, idx]
        viol[:, idx] = np.where(over > 0.0, over, np.where(under > 0.0, -under, 0.0))

    grad_states = 2.0 * T * (w * err)
    w_pen = w
    if viol.any():
        grad_states[:, 4] += 2.0 * T * cfg.soft_weight * viol[:, 4]
        grad_states[:, 5] += 2.0 * T * cfg.soft_weight * viol[:, 5]
        w_pen = w.copy()
        w_pen[:, 4] += cfg.soft_weight * (viol[:, 4] != 0.0)
        w_pen[:, 5] += cfg.soft_weight * (viol[:, 5] != 0.0)

    s_flat = s_all.reshape(-1, L)
    grad = s_flat.T @ grad_states.reshape(-1) + 2.0 * T * cfg.r_weight * du
    h_mat = 2.0 * T * (s_flat.T @ (w_pen.reshape(-1)[:, None] * s_flat))
    h_mat[np.diag_indices_from(h_mat)] += 2.0 * T * cfg.r_weight
    obj = cost_eval(x_pred, du, x_des, cfg) + _soft_penalty(x_pred, cfg)
    return h_mat, grad, obj


# ----------------------------------------------------------------------
# solvers
# ----------------------------------------------------------------------

def solve_nmpc(x_hat: GearState | np.ndarray, preview: PreviewInputs,
               params: VehicleParams, cfg: MpcConfig,
               warm: Optional[MpcSolution] = None,
               limits: Optional[TorqueLimits] = None,
               dynamics=None) -> MpcSolution:
    """Gauss-Newton SQP solve of the nonlinear horizon problem.

    dynamics defaults to the gear model; anything with the ModelDynamics
    interface (step / step_batch / linearize_seq) can stand in.
    """
    t_start = time.perf_counter()
    x0 = x_hat.as_array() if isinstance(x_hat, GearState) else np.asarray(x_hat, float)
    lim = limits or TorqueLimits(params.tau_max, params.tau_min)
    dyn = dynamics or ModelDynamics(preview.theta, params, cfg.step_dt)
    L = cfg.steps
    u_d = np.asarray(preview.u_d_seq, dtype=float)
    x_des, clamped = desired_sequence(preview, params, cfg)
    lo, hi = _du_bounds(cfg, lim, L)

    du = np.clip(warm.shifted(), lo, hi) if warm is not None else np.zeros(L)
    cmds, grads = _commands(u_d, du, lim)
    x_pred = _rollout(dyn, x0, cmds)

    kkt = math.inf
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        a_seq, b_seq = dyn.linearize_seq(x_pred[:L], cmds)
        b_du = b_seq[:, :, 0] * grads[:, :1] + b_seq[:, :, 1] * grads[:, 1:]
        s_all = _sensitivities(a_seq, b_du)
        h_mat, grad, obj = _quadratic_terms(x_pred, x_des, du, s_all, cfg)

        kkt = float(np.max(np.abs(du - np.clip(du - grad, lo, hi))))
        if kkt <= cfg.kkt_tol:
            break

        step = solve_box_qp(h_mat, grad, lo - du, hi - du, tol=0.1 * cfg.kkt_tol)
        alpha = 1.0
        improved = False
        for _bt in range(12):
            du_try = np.clip(du + alpha * step, lo, hi)
            cmds_try, grads_try = _commands(u_d, du_try, lim)
            x_try = _rollout(dyn, x0, cmds_try)
            obj_try = cost_eval(x_try, du_try, x_des, cfg) + _soft_penalty(x_try, cfg)
            if obj_try < obj:
                du, cmds, grads, x_pred = du_try, cmds_try, grads_try, x_try
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break

    flag = "suboptimal" if kkt > cfg.kkt_tol else ""
    if clamped:
        flag = (flag + ",preview_clamped").strip(",")
    return MpcSolution(
        du=du, x_pred=x_pred,
        cost=cost_eval(x_pred, du, x_des, cfg),
        kkt=kkt, iters=iters,
        solve_time=time.perf_counter() - t_start, flag=flag,
    )


def solve_ltv_mpc(x_hat: GearState | np.ndarray, preview: PreviewInputs,
                  params: VehicleParams, cfg: MpcConfig,
                  warm: Optional[MpcSolution] = None,
                  limits: Optional[TorqueLimits] = None,
                  dynamics=None) -> MpcSolution:
    """Condensed QP solve around a centered riding position."""
    t_start = time.perf_counter()
    x0 = x_hat.as_array() if isinstance(x_hat, GearState) else np.asarray(x_hat, float)
    lim = limits or TorqueLimits(params.tau_max, params.tau_min)
    dyn = dynamics or ModelDynamics(preview.theta, params, cfg.step_dt)
    L = cfg.steps
    u_d = np.asarray(preview.u_d_seq, dtype=float)
    x_des, clamped = desired_sequence(preview, params, cfg)
    lo, hi = _du_bounds(cfg, lim, L)

    # centered linearization points at the forecast positions
    x_lin = np.zeros((L, 6))
    x_lin[:, 0] = x_des[:L, 0]
    x_lin[:, 2] = x_des[:L, 2]
    u_lin = np.stack([u_d, u_d], axis=-1)
    a_seq, b_seq = dyn.linearize_seq(x_lin, u_lin)
    f_lin = dyn.step_batch(x_lin, u_lin)
    c_seq = f_lin - np.einsum("kij,kj->ki", a_seq, x_lin) \
        - np.einsum("kij,kj->ki", b_seq, u_lin)

    # affine base trajectory under du = 0 and sensitivities
    base = np.empty((L + 1, 6))
    base[0] = x0
    for k in range(L):
        base[k + 1] = a_seq[k] @ base[k] + b_seq[k] @ u_lin[k] + c_seq[k]
    b_du = b_seq[:, :, 0] - b_seq[:, :, 1]
    s_all = _sensitivities(a_seq, b_du)

    def predict(d):
        return base + s_all.reshape(-1, L).dot(d).reshape(L + 1, 6)

    def activity(xp):
        return np.concatenate([np.abs(xp[:, 4]) > cfg.y_lim,
                               np.abs(xp[:, 5]) > cfg.psi_lim])

    du = np.clip(warm.shifted(), lo, hi) if warm is not None else np.zeros(L)
    x_pred = predict(du)
    h_mat, grad, _obj = _quadratic_terms(x_pred, x_des, du, s_all, cfg)
    active = activity(x_pred)
    kkt = math.inf
    iters = 0
    # the gradient is affine in du while the penalty active set is fixed,
    # so the Hessian is rebuilt only when the active set changes
    for iters in range(1, 6):
        kkt = float(np.max(np.abs(du - np.clip(du - grad, lo, hi))))
        if kkt <= cfg.kkt_tol_ltv:
            break
        du_new = np.clip(du + solve_box_qp(h_mat, grad, lo - du, hi - du,
                                           tol=0.1 * cfg.kkt_tol_ltv), lo, hi)
        x_new = predict(du_new)
        active_new = activity(x_new)
        if np.array_equal(active_new, active):
            grad = grad + h_mat @ (du_new - du)
            du, x_pred = du_new, x_new
        else:
            du, x_pred = du_new, x_new
            h_mat, grad, _obj = _quadratic_terms(x_pred, x_des, du, s_all, cfg)
            active = active_new

    flag = "suboptimal" if kkt > cfg.kkt_tol_ltv else ""
    if clamped:
        flag = (flag + ",preview_clamped").strip(",")
    return MpcSolution(
        du=du, x_pred=x_pred,
        cost=cost_eval(x_pred, du, x_des, cfg),
        kkt=kkt, iters=iters,
        solve_time=time.perf_counter() - t_start, flag=flag,
    )
