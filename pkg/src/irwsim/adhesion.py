"""Model-free longitudinal adhesion controller.

Incremental sliding-mode law running at the fast control rate.  The
operating point on the (unknown) adhesion-slip characteristic is
classified from the product of the filtered adhesion and slip derivatives:
while the point climbs the stable branch the product is positive and the
base torque approaches the demanded adhesion with the regular gain; a
negative product means the unstable branch has been entered and the torque
retreats with the (larger) maximum-seeking gain.  A tolerance corridor
around the setpoint suppresses oscillations; braking is the exact odd
mirror of traction.

Inputs are expected sign-aligned: adhesion positive under traction, slip
oriented so that adhesion and slip grow together on the stable branch
(wheel overspeed positive).  The controller deliberately has no dependency
on any contact model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class AdhesionConfig:
    """Gains and filtering of the incremental adhesion law."""

    p1: float = 15.0          # maximum-seeking retreat gain [N m / step]
    p2: float = 10.0          # regular approach gain [N m / step]
    tol_f: float = 0.005      # setpoint corridor half width [-]
    filter_tau: float = 0.005  # derivative estimation time constant [s]
    period: float = 1.0e-3    # control period [s]
    tau_max: float = 12000.0  # output clamp [N m]
    tau_min: float = -12000.0

    def __post_init__(self):
        if not self.p1 > self.p2 > 0.0:
            raise ValueError("gains must satisfy p1 > p2 > 0 (retreat dominates)")
        if self.tol_f <= 0.0:
            raise ValueError("tolerance corridor must be positive")
        if self.filter_tau < self.period:
            raise ValueError("filter slower than the control period required")


@dataclass(frozen=True)
class AdhesionCtrlState:
    """Controller memory between fast ticks."""

    u_d: float = 0.0        # last commanded base torque [N m]
    f_filt: float = 0.0     # low-passed adhesion
    s_filt: float = 0.0     # low-passed slip
    f_deriv: float = 0.0    # filtered adhesion derivative [1/s]
    s_deriv: float = 0.0    # filtered slip derivative [1/s]
    segment: str = "II"     # active decision branch
    primed: bool = False    # filters seeded with the first sample
    fault: bool = False     # non-finite input seen on the last step


def force_to_adhesion_setpoint(f_x_dem: float, f_n: float) -> float:
    """Demanded adhesion per contact from a gear force demand.

    f_n is the total normal load of the running gear; the demand is split
    equally across the two contacts, so the per-contact setpoint is the
    gear force over the total load.  Sign is preserved (braking negative).
    """
    if f_n <= 0.0:
        raise ValueError("normal load must be positive")
    return f_x_dem / f_n


def switching_function(f_deriv: float, s_deriv: float) -> float:
    """Product of the filtered derivatives; positive on the stable branch."""
    return f_deriv * s_deriv


def adhesion_step(f_set: float, f_hat: float, s_hat: float,
                  ctrl: AdhesionCtrlState, cfg: AdhesionConfig):
    """One fast-rate update; returns (base torque, new controller state).

    Decision table for the traction orientation (braking is mirrored):
    inside the corridor hold; below it approach with +p2 while the stable
    branch is active; retreat with p1 toward zero torque the moment the
    unstable branch shows; above the corridor back off with p2.
    """
    if not (math.isfinite(f_set) and math.isfinite(f_hat) and math.isfinite(s_hat)):
        return ctrl.u_d, replace(ctrl, fault=True)

    dt = cfg.period
    alpha = dt / cfg.filter_tau
    if ctrl.primed:
        f_filt = ctrl.f_filt + alpha * (f_hat - ctrl.f_filt)
        s_filt = ctrl.s_filt + alpha * (s_hat - ctrl.s_filt)
        f_deriv = ctrl.f_deriv + alpha * ((f_filt - ctrl.f_filt) / dt - ctrl.f_deriv)
        s_deriv = ctrl.s_deriv + alpha * ((s_filt - ctrl.s_filt) / dt - ctrl.s_deriv)
    else:
        f_filt, s_filt = f_hat, s_hat
        f_deriv = s_deriv = 0.0

    sigma = switching_function(f_deriv, s_deriv)

    # Odd mirror: evaluate the table on sign-flipped quantities for braking.
    mirror = 1.0 if f_set >= 0.0 else -1.0
    err = mirror * f_set - mirror * f_filt
    u_prev_m = mirror * ctrl.u_d

    if abs(err) <= cfg.tol_f:
        delta, segment = 0.0, "II"
    elif err > 0.0 and sigma >= 0.0:
        delta, segment = cfg.p2, "I"
    elif sigma < 0.0:
        step_sign = 1.0 if u_prev_m > 0.0 else (-1.0 if u_prev_m < 0.0 else 0.0)
        delta, segment = -cfg.p1 * step_sign, "III"
    else:
        delta, segment = -cfg.p2, "D"

    u_d = mirror * (u_prev_m + delta)
    u_d = min(max(u_d, cfg.tau_min), cfg.tau_max)

    return u_d, AdhesionCtrlState(
        u_d=u_d, f_filt=f_filt, s_filt=s_filt,
        f_deriv=f_deriv, s_deriv=s_deriv,
        segment=segment, primed=True, fault=False,
    )


class AdhesionController:
    """Stateful wrapper for closed-loop use; one instance per running gear."""

    def __init__(self, cfg: AdhesionConfig):
        self.cfg = cfg
        self.state = AdhesionCtrlState()

    def step(self, f_set: float, f_hat: float, s_hat: float) -> float:
        u_d, self.state = adhesion_step(f_set, f_hat, s_hat, self.state, self.cfg)
        return u_d
