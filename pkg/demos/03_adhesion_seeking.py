"""Model-free traction control: regular tracking and maximum seeking.

First a reachable adhesion setpoint is tracked into its corridor; then the
demand is raised beyond what a poor rail can transmit, and the controller
rides the unknown adhesion curve to its peak, retreating whenever the
unstable branch announces itself through the sign of the derivative
product.  Halfway through, the rail condition drops abruptly.
"""

import numpy as np

from irwsim import harness as hz
from irwsim.model import VehicleParams
from irwsim.plant import POOR_ADHESION, AdhesionCurveParams

params = VehicleParams()
fn_total = params.m_x * params.g

print("=== regular tracking: 60 % of the good-rail peak ===")
f_set = 0.6 * 0.35
spec = hz.ScenarioSpec(
    track_id="T5", v0=160 / 3.6, distance=400.0, max_time=5.0,
    f_x_star=hz.SignalSpec(kind="constant", value=f_set * fn_total),
    controller="ltvmpc")
run = hz.run_scenario(spec)
f = np.where(np.abs(run.data["s_ri"]) >= np.abs(run.data["s_le"]),
             run.data["f_ri"], run.data["f_le"])
inside = np.abs(f - f_set) <= spec.adhesion_cfg.tol_f
print(f"setpoint {f_set:.3f}: corridor entered after "
      f"{run.data['t'][np.argmax(inside)]:.2f} s, final adhesion {f[-1]:.4f}, "
      f"base torque {run.data['u_d'][-1]:.0f} N m")

print("\n=== maximum seeking on a poor rail with a mid-run drop ===")
dropped = AdhesionCurveParams(f_max=0.06, k_0=4.8, s_peak=0.02)
spec = hz.ScenarioSpec(
    track_id="T5", v0=400 / 3.6, distance=2400.0, max_time=20.0,
    f_x_star=hz.SignalSpec(kind="constant",
                           value=1.5 * POOR_ADHESION.f_max * fn_total),
    adhesion_intervals=((0.0, POOR_ADHESION), (1100.0, dropped)),
    controller="ltvmpc")
run = hz.run_scenario(spec, csv_path="adhesion_seeking.csv")
t = run.data["t"]
f = np.where(np.abs(run.data["s_ri"]) >= np.abs(run.data["s_le"]),
             run.data["f_ri"], run.data["f_le"])
s = np.maximum(np.abs(run.data["s_ri"]), np.abs(run.data["s_le"]))
seg = np.array(run.segments)
tm = np.convolve(f, np.ones(1000) / 1000.0, mode="valid")
i_drop = np.argmax(run.data["p"] >= 1100.0)

print(f"demand {1.5 * POOR_ADHESION.f_max:.3f} vs achievable "
      f"{POOR_ADHESION.f_max:.3f} -> {np.sum(seg == 'III')} retreat ticks")
print(f"trailing-second mean before the drop: {tm[i_drop - 1000]:.4f} "
      f"(peak {POOR_ADHESION.f_max:.3f})")
print(f"after the drop to {dropped.f_max:.3f}: final trailing mean {tm[-1]:.4f}")
print(f"largest slip magnitude: {s.max():.4f} "
      f"(peak-of-curve slip {POOR_ADHESION.s_peak})")
print("full log written to adhesion_seeking.csv")
