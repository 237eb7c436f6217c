"""Scenario definition, closed-loop execution, metrics and tuning.

A scenario couples one evaluation track, a lateral set-point signal, a
longitudinal force demand and a rail-condition schedule with a controller
selection.  Runs execute the plant and the rate scheduler at the fast
rate, are deterministic for a given spec and seed, and can stream a CSV
log with a fixed column schema.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import mpc as mpc_mod
from .adhesion import AdhesionConfig, force_to_adhesion_setpoint
from .integration import RateConfig, RateScheduler, TorqueLimits
from .model import ControlInput, ModelTheta, VehicleParams
from .mpc import MpcConfig, PreviewInputs
from .plant import (
    ADHESION_PRESETS,
    AdhesionSchedule,
    initial_plant_state,
    measure,
    plant_step,
)
from .track import TrackGeometry, TrackSpec, build_track, standard_track_spec

SPEED_FLOOR = 0.1

#: CSV columns, fixed order.
CSV_COLUMNS = (
    "t", "p", "x", "psi_Ax", "xdot", "psidot_Ax", "y_TrAx", "psi_TrAx",
    "omega_le", "omega_ri", "s_le", "s_ri", "f_le", "f_ri",
    "u_d", "delta_u", "tau_le", "tau_ri",
    "segment", "solver_iters", "solver_time", "flags",
)

#: Columns excluded from determinism comparisons (wall-clock readings).
TIMING_COLUMNS = ("solver_time",)


# ----------------------------------------------------------------------
# position-based signals
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SignalSpec:
    """Set-point signal over arc position.

    kinds: constant (value); sine (amplitude, period, from p_start);
    sweep (amplitude, period linearly narrowing from period to period_end
    between p_start and p_end); step (value_before until p_start, value
    after).
    """

    kind: str = "constant"
    value: float = 0.0
    value_before: float = 0.0
    amplitude: float = 0.0
    period: float = 150.0
    period_end: float = 50.0
    p_start: float = 0.0
    p_end: float = 1000.0

    def __post_init__(self):
        if self.kind not in ("constant", "sine", "sweep", "step"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind in ("sine", "sweep") and self.period <= 0.0:
            raise ValueError("period must be positive")
        if self.kind == "sweep" and (self.period_end <= 0.0
                                     or self.p_end <= self.p_start):
            raise ValueError("sweep needs positive periods and p_end > p_start")

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "constant":
            out = np.full_like(p, self.value)
        elif self.kind == "step":
            out = np.where(p >= self.p_start, self.value, self.value_before)
        elif self.kind == "sine":
            out = np.where(
                p >= self.p_start,
                self.amplitude * np.sin(2.0 * np.pi * (p - self.p_start) / self.period),
                0.0,
            )
        else:
            out = self.amplitude * np.sin(2.0 * np.pi * self._sweep_phase(p))
        return out if out.ndim else float(out)

    def _sweep_phase(self, p):
        lam0, lam1 = self.period, self.period_end
        p0, p1 = self.p_start, self.p_end
        pc = np.clip(p, p0, p1)
        if math.isclose(lam0, lam1):
            phase = (pc - p0) / lam0
        else:
            lam = lam0 + (lam1 - lam0) * (pc - p0) / (p1 - p0)
            phase = (p1 - p0) / (lam1 - lam0) * np.log(lam / lam0)
        # continue with the final wavelength beyond the sweep window
        phase = phase + np.maximum(p - p1, 0.0) / lam1
        return np.where(p < p0, 0.0, phase)


# ----------------------------------------------------------------------
# scenario
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    """Everything one closed-loop run needs; value object, reusable."""

    name: str = "run"
    track_id: str = "T5"
    track_spec: Optional[TrackSpec] = None   # overrides track_id when set
    v0: float = 44.44                        # initial speed [m/s]
    distance: float = 450.0                  # run length along the track [m]
    max_time: float = 180.0                  # hard stop [s]
    y_star: SignalSpec = SignalSpec()
    f_x_star: SignalSpec = SignalSpec()
    adhesion_intervals: tuple = ((0.0, "good"),)  # (start, preset or params)
    controller: str = "nmpc"                 # nmpc | ltvmpc
    mpc: MpcConfig = MpcConfig()
    adhesion_cfg: AdhesionConfig = AdhesionConfig()
    rates: RateConfig = RateConfig()
    params: VehicleParams = VehicleParams()
    seed: int = 0
    miss_every_n: int = 0

    def __post_init__(self):
        if self.controller not in ("nmpc", "ltvmpc"):
            raise ValueError("controller must be nmpc or ltvmpc")
        if self.v0 <= SPEED_FLOOR:
            raise ValueError("initial speed must exceed the standstill floor")
        amp = self.y_star.amplitude if self.y_star.kind in ("sine", "sweep") \
            else abs(self.y_star.value)
        if amp > self.mpc.y_lim:
            raise ValueError("set-point amplitude exceeds the lateral bound")

    def build_track(self) -> TrackGeometry:
        margin = 250.0 + self.v0 * self.mpc.horizon
        if self.track_spec is not None:
            spec = self.track_spec
            if spec.total_length < self.distance + margin:
                spec = replace(spec, total_length=self.distance + margin)
            return build_track(spec)
        return build_track(standard_track_spec(
            self.track_id, total_length=self.distance + margin,
            gauge=self.params.gauge))

    def build_schedule(self) -> AdhesionSchedule:
        starts, curves = [], []
        for start, cur in self.adhesion_intervals:
            starts.append(float(start))
            curves.append(ADHESION_PRESETS[cur] if isinstance(cur, str) else cur)
        return AdhesionSchedule(starts=tuple(starts), curves=tuple(curves))


@dataclass
class RunResult:
    """Time series and summary metrics of one closed-loop run."""

    spec: ScenarioSpec
    data: dict                      # column name -> np.ndarray (fast rate)
    segments: list                  # adhesion segment label per tick
    flags: list                     # per-tick flag strings
    rmse: float                     # lateral tracking error [m]
    braking_distance: Optional[float]
    standstill: bool
    unstable: bool
    solve_times: np.ndarray
    solve_iters: np.ndarray
    deadline_misses: int
    wall_time: float
    previews: list = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        return self.data[name]


def metric_rmse(y: np.ndarray, y_ref: np.ndarray) -> float:
    """Root of the mean squared difference of two equal-length series."""
    y = np.asarray(y, dtype=float)
    y_ref = np.asarray(y_ref, dtype=float)
    if y.shape != y_ref.shape or y.size == 0:
        raise ValueError("series must be equal-length and non-empty")
    return float(np.sqrt(np.mean((y - y_ref) ** 2)))


def estimate_lag(p: np.ndarray, y: np.ndarray, y_star: Callable,
                 max_lag: float = 40.0, step: float = 0.05) -> float:
    """Spatial lag of y behind its set point, by scanning shifted references."""
    lags = np.arange(0.0, max_lag, step)
    best_lag, best_err = 0.0, math.inf
    for lag in lags:
        err = float(np.mean((y - y_star(p - lag)) ** 2))
        if err < best_err:
            best_err, best_lag = err, lag
    return best_lag


# ----------------------------------------------------------------------
# closed loop
# ----------------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(v, ".10g")


def run_scenario(spec: ScenarioSpec, csv_path=None,
                 record_previews: bool = False) -> RunResult:
    """Execute one scenario at the fast rate; deterministic per spec/seed."""
    t_wall = time.perf_counter()
    track = spec.build_track()
    schedule = spec.build_schedule()
    params = spec.params
    theta = ModelTheta.from_params(track, params)
    limits = TorqueLimits(params.tau_max, params.tau_min)
    solver = mpc_mod.solve_nmpc if spec.controller == "nmpc" else mpc_mod.solve_ltv_mpc
    L = spec.mpc.steps
    dt = spec.rates.fast_period

    state = initial_plant_state(track, spec.v0, params)
    meas_box = {"meas": measure(state)}
    warm_box: dict = {"warm": None, "iters": 0, "time": 0.0, "flag": ""}
    previews = []

    def lateral_solve(tick: int, u_d: float) -> float:
        m = meas_box["meas"]
        x_hat = m.gear.as_array()
        preview = PreviewInputs(
            y_star=spec.y_star,
            u_d_seq=np.full(L, u_d),
            theta=theta,
            x_hat=x_hat,
        )
        if record_previews:
            previews.append((x_hat.copy(), u_d))
        sol = solver(x_hat, preview, params, spec.mpc, warm=warm_box["warm"],
                     limits=limits)
        warm_box["warm"] = sol
        warm_box["iters"] = sol.iters
        warm_box["time"] = sol.solve_time
        warm_box["flag"] = sol.flag
        return float(sol.du[0])

    sched = RateScheduler(spec.rates, spec.adhesion_cfg, lateral_solve, limits,
                          miss_every_n=spec.miss_every_n)

    cols = {name: [] for name in CSV_COLUMNS if name not in
            ("segment", "flags")}
    segments, flag_col = [], []
    solve_times, solve_iters = [], []
    x_start = state.x
    brake_onset_x: Optional[float] = None
    standstill = False
    unstable = False
    max_ticks = int(spec.max_time / dt)

    fh = open(csv_path, "w", encoding="utf-8") if csv_path else None
    if fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")

    try:
        for k in range(max_ticks):
            t = k * dt
            meas_box["meas"] = m = measure(state)

            f_dem = float(spec.f_x_star(state.x))
            if f_dem < 0.0 and brake_onset_x is None:
                brake_onset_x = state.x
            f_set = force_to_adhesion_setpoint(f_dem, state.f_n_le + state.f_n_ri)
            # the worse (larger-slip) contact drives the adhesion law
            if abs(m.s_x_ri) >= abs(m.s_x_le):
                f_sel, s_sel = m.f_x_ri, m.s_x_ri
            else:
                f_sel, s_sel = m.f_x_le, m.s_x_le
            was_solve_tick = (k % spec.rates.ticks_per_solve == 0)
            cmd, diag = sched.step(k, f_set, f_sel, -s_sel)
            if was_solve_tick:
                solve_times.append(warm_box["time"])
                solve_iters.append(warm_box["iters"])

            flags = []
            if state.unstable_contact:
                flags.append("unstable_contact")
                unstable = True
            if diag["deadline_miss"]:
                flags.append("deadline_miss")
            if cmd.du_clipped:
                flags.append("du_clipped")
            if was_solve_tick and warm_box["flag"]:
                flags.append(warm_box["flag"])
            flag_str = ";".join(flags)

            row = (
                t, state.x, state.x, state.psi_ax, state.xdot,
                state.psidot_ax, state.y_trax, state.psi_trax,
                state.omega_le, state.omega_ri, state.s_x_le, state.s_x_ri,
                state.f_x_le, state.f_x_ri, diag["u_d"], diag["du"],
                cmd.tau_le, cmd.tau_ri, warm_box["iters"], warm_box["time"],
            )
            for name, v in zip(CSV_COLUMNS[:18], row[:18]):
                cols[name].append(v)
            cols["solver_iters"].append(row[18])
            cols["solver_time"].append(row[19])
            segments.append(diag["segment"])
            flag_col.append(flag_str)
            if fh:
                fh.write(",".join(_fmt(v) for v in row[:18])
                         + f",{diag['segment']},{row[18]}"
                         + f",{row[19]:.6f},{flag_str}\n")

            state = plant_step(state, ControlInput(cmd.tau_ri, cmd.tau_le),
                               track, schedule, params, dt)

            if state.xdot < SPEED_FLOOR:
                standstill = True
                break
            if state.x - x_start >= spec.distance:
                break
    finally:
        if fh:
            fh.close()

    data = {name: np.asarray(vals) for name, vals in cols.items()}
    rmse = metric_rmse(data["y_TrAx"], spec.y_star(data["p"]))
    braking = None
    if standstill and brake_onset_x is not None:
        braking = float(state.x - brake_onset_x)

    return RunResult(
        spec=spec, data=data, segments=segments, flags=flag_col,
        rmse=rmse, braking_distance=braking, standstill=standstill,
        unstable=unstable,
        solve_times=np.asarray(solve_times), solve_iters=np.asarray(solve_iters),
        deadline_misses=sched.miss_count,
        wall_time=time.perf_counter() - t_wall,
        previews=previews,
    )


# ----------------------------------------------------------------------
# solver benchmarking
# ----------------------------------------------------------------------

@dataclass
class TimingReport:
    n_solves: int
    nmpc: dict      # mean / median / p95 wall times [s]
    ltv: dict
    ratio_median: float
    nmpc_iters_warm: float
    nmpc_iters_cold: float


def _stats(times: np.ndarray) -> dict:
    return {
        "mean": float(np.mean(times)),
        "median": float(np.median(times)),
        "p95": float(np.percentile(times, 95)),
    }


def bench_solvers(spec: ScenarioSpec, n_solves: int = 500) -> TimingReport:
    """Replay recorded closed-loop states, re-solving with both controllers."""
    if n_solves < 100:
        raise ValueError("benchmark needs at least 100 solves")
    run = run_scenario(spec, record_previews=True)
    records = run.previews
    if len(records) < n_solves:
        raise ValueError(
            f"scenario produced {len(records)} solves; lengthen the run "
            f"or lower n_solves")
    records = records[:n_solves]

    track = spec.build_track()
    theta = ModelTheta.from_params(track, spec.params)
    limits = TorqueLimits(spec.params.tau_max, spec.params.tau_min)
    L = spec.mpc.steps

    def replay(solver, warm_chain: bool):
        times = np.empty(len(records))
        iters = np.empty(len(records))
        warm = None
        for i, (x_hat, u_d) in enumerate(records):
            preview = PreviewInputs(spec.y_star, np.full(L, u_d), theta, x_hat)
            sol = solver(x_hat, preview, spec.params, spec.mpc,
                         warm=warm if warm_chain else None, limits=limits)
            if warm_chain:
                warm = sol
            times[i] = sol.solve_time
            iters[i] = sol.iters
        return times, iters

    t_n, it_n = replay(mpc_mod.solve_nmpc, warm_chain=True)
    t_l, _ = replay(mpc_mod.solve_ltv_mpc, warm_chain=True)
    _, it_cold = replay(mpc_mod.solve_nmpc, warm_chain=False)

    return TimingReport(
        n_solves=len(records),
        nmpc=_stats(t_n), ltv=_stats(t_l),
        ratio_median=float(np.median(t_l) / np.median(t_n)),
        nmpc_iters_warm=float(np.mean(it_n)),
        nmpc_iters_cold=float(np.mean(it_cold)),
    )


# ----------------------------------------------------------------------
# particle swarm tuning
# ----------------------------------------------------------------------

#: Weight of the differential-torque magnitude in the tuning fitness.
PSO_INPUT_WEIGHT = 1e-6


@dataclass
class PsoResult:
    best: dict
    best_cost: float
    history: list      # best cost per iteration
    all_infeasible: bool = False


def _apply_design(spec: ScenarioSpec, design: dict) -> ScenarioSpec:
    """Map a design-vector dict onto the scenario's controller config."""
    cfg = spec.mpc
    q = list(cfg.q_diag)
    for i in range(6):
        key = f"q{i}"
        if key in design:
            q[i] = design[key]
    upd = {"q_diag": tuple(q)}
    if "r" in design:
        upd["r_weight"] = design["r"]
    if "q_term" in design:
        upd["q_term"] = design["q_term"]
    if "horizon" in design and "steps" in design:
        steps = int(round(design["steps"]))
        upd["steps"] = steps
        upd["step_dt"] = design["horizon"] / steps
    elif "horizon" in design:
        upd["step_dt"] = design["horizon"] / cfg.steps
    elif "step_dt" in design:
        upd["step_dt"] = design["step_dt"]
    return replace(spec, mpc=replace(cfg, **upd))


def default_fitness(design: dict, scenarios) -> float:
    """Sum over scenarios of lateral RMSE plus weighted input magnitude."""
    total = 0.0
    for sc in scenarios:
        run = run_scenario(_apply_design(sc, design))
        total += run.rmse + PSO_INPUT_WEIGHT * float(np.mean(np.abs(run.data["delta_u"])))
    return total


def tune_pso(space: dict, scenarios, n_particles: int = 8, n_iters: int = 20,
             seed: int = 0, fitness: Optional[Callable] = None,
             inertia: float = 0.72, c_personal: float = 1.49,
             c_global: float = 1.49) -> PsoResult:
    """Global-best particle swarm over the design space.

    space maps design names to (low, high) bounds.  fitness(design_dict)
    defaults to closed-loop evaluation over the scenarios; injecting a
    surrogate makes the optimizer testable in isolation.  Deterministic
    under the seed; returns the best-found point (no optimality claim).
    """
    if not space:
        raise ValueError("empty design space")
    names = list(space.keys())
    lo = np.array([space[n][0] for n in names], dtype=float)
    hi = np.array([space[n][1] for n in names], dtype=float)
    if np.any(hi <= lo):
        raise ValueError("bounds must satisfy high > low")
    if fitness is None:
        if not scenarios:
            raise ValueError("tuning needs at least one scenario")
        fitness = lambda d: default_fitness(d, scenarios)

    rng = np.random.default_rng(seed)
    pos = lo + (hi - lo) * rng.random((n_particles, len(names)))
    pos[0] = 0.5 * (lo + hi)        # keep the center as a safe fallback
    vel = np.zeros_like(pos)

    def evaluate(v):
        val = fitness(dict(zip(names, v)))
        return math.inf if not math.isfinite(val) else float(val)

    p_best = pos.copy()
    p_cost = np.array([evaluate(v) for v in pos])
    g_idx = int(np.argmin(p_cost))
    g_best, g_cost = p_best[g_idx].copy(), float(p_cost[g_idx])
    history = [g_cost]

    for _ in range(n_iters):
        r1 = rng.random((n_particles, len(names)))
        r2 = rng.random((n_particles, len(names)))
        vel = (inertia * vel + c_personal * r1 * (p_best - pos)
               + c_global * r2 * (g_best - pos))
        pos = np.clip(pos + vel, lo, hi)
        for i in range(n_particles):
            cost = evaluate(pos[i])
            if cost < p_cost[i]:
                p_cost[i], p_best[i] = cost, pos[i].copy()
                if cost < g_cost:
                    g_cost, g_best = cost, pos[i].copy()
        history.append(g_cost)

    if not math.isfinite(g_cost):
        center = 0.5 * (lo + hi)
        return PsoResult(best=dict(zip(names, center)), best_cost=math.inf,
                         history=history, all_infeasible=True)
    return PsoResult(best=dict(zip(names, g_best)), best_cost=g_cost,
                     history=history)
