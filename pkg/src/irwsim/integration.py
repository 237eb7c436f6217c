"""Combining base and differential torque under saturation, and the
fast/slow rate interplay between the adhesion controller and the lateral
optimizer.

The blending rule gives the differential torque priority: the common-mode
torque is pulled back just enough that both wheel commands stay inside the
motor limits, so the commanded yaw authority survives even when the
longitudinal demand saturates the actuators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .adhesion import AdhesionConfig, AdhesionController


@dataclass(frozen=True)
class TorqueLimits:
    tau_max: float = 12000.0  # [N m]
    tau_min: float = -12000.0

    def __post_init__(self):
        if not self.tau_min < 0.0 < self.tau_max:
            raise ValueError("torque limits must straddle zero")


class TorqueCommand(NamedTuple):
    tau_ri: float
    tau_le: float
    du_clipped: bool


def integrate(u_d: float, du: float, lim: TorqueLimits) -> TorqueCommand:
    """Blend base torque u_d and differential torque du into wheel commands.

    The differential torque is delivered exactly whenever
    |du| <= (tau_max - tau_min) / 2; beyond that it is clamped and flagged.
    """
    du_lim = 0.5 * (lim.tau_max - lim.tau_min)
    clipped = abs(du) > du_lim
    if clipped:
        du = math.copysign(du_lim, du)
    if u_d > 0.0:
        tau_long = min(u_d, lim.tau_max - abs(du))
    else:
        tau_long = max(u_d, lim.tau_min + abs(du))
    return TorqueCommand(tau_long + du, tau_long - du, clipped)


@dataclass(frozen=True)
class RateConfig:
    fast_period: float = 1.0e-3  # adhesion control [s]
    slow_period: float = 1.0e-2  # lateral optimizer [s]

    def __post_init__(self):
        ratio = self.slow_period / self.fast_period
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("slow period must be an integer multiple of fast")

    @property
    def ticks_per_solve(self) -> int:
        return round(self.slow_period / self.fast_period)


class RateScheduler:
    """Owns the controller states within one closed-loop run.

    Every fast tick the adhesion law updates the base torque; the lateral
    solve runs once per slow tick through the injected callback and its
    first differential torque is held (zero-order) across the intervening
    fast ticks.  Deadline misses are injected deterministically via
    miss_every_n (wall time never influences control flow, which keeps
    replays byte-identical): a missed solve leaves the previous
    differential torque in place for one extra slow period.
    """

    def __init__(self, rates: RateConfig, adhesion_cfg: AdhesionConfig,
                 lateral_solve: Callable[[int, float], float],
                 limits: TorqueLimits, miss_every_n: int = 0):
        self.rates = rates
        self.adhesion = AdhesionController(adhesion_cfg)
        self.lateral_solve = lateral_solve
        self.limits = limits
        self.miss_every_n = miss_every_n
        self.held_du = 0.0
        self.solve_count = 0
        self.miss_count = 0
        self.du_clip_count = 0

    def step(self, tick: int, f_set: float, f_hat: float, s_hat: float):
        """One fast tick; returns (TorqueCommand, diagnostics dict)."""
        u_d = self.adhesion.step(f_set, f_hat, s_hat)
        missed = False
        if tick % self.rates.ticks_per_solve == 0:
            self.solve_count += 1
            du_new = self.lateral_solve(tick, u_d)
            if self.miss_every_n and self.solve_count % self.miss_every_n == 0:
                self.miss_count += 1
                missed = True
            else:
                self.held_du = du_new
        cmd = integrate(u_d, self.held_du, self.limits)
        if cmd.du_clipped:
            self.du_clip_count += 1
        return cmd, {
            "u_d": u_d,
            "du": self.held_du,
            "segment": self.adhesion.state.segment,
            "deadline_miss": missed,
        }
