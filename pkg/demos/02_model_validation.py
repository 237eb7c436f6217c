"""Gear model sanity: decoupling at the centered state, the numeric
Euler-Lagrange cross-check and energy conservation.

The closed-form equations of motion are validated against finite
differences of the energy functions; with dampers off and no torque the
total energy must stay put over a long coast.
"""

import numpy as np

from irwsim import model as md
from irwsim import track as tr
from irwsim import validation as val

params = md.VehicleParams()
t5 = tr.build_track(tr.standard_track_spec("T5", total_length=2000.0))
theta = md.ModelTheta.from_params(t5, params)

print("=== decoupling at the centered state ===")
state = md.GearState(100.0, 0.0, 30.0, 0.0, 0.0, 0.0)
coast = md.continuous_dynamics(state, md.ControlInput(0, 0), theta, params)
print(f"coast: xddot {coast[2]:+.3e}, yaw accel {coast[3]:+.3e}  (both zero)")

sym = md.continuous_dynamics(state, md.ControlInput(500.0, 500.0), theta, params)
print(f"symmetric torque: xddot {sym[2]:+.4f} m/s2, yaw accel {sym[3]:+.3e}")

diff = md.continuous_dynamics(state, md.ControlInput(500.0, -500.0), theta, params)
print(f"differential torque: xddot {diff[2]:+.3e}, yaw accel {diff[3]:+.4f} rad/s2")

print("\n=== numeric Euler-Lagrange cross-check (30 random states) ===")
t3 = tr.build_track(tr.standard_track_spec("T3", total_length=1500.0))
errs = val.lagrange_oracle_errors(t3, params, n=30, seed=1)
print(f"worst relative deviation: {np.max(errs):.2e}  (closed form vs "
      f"finite differences of the energies)")

print("\n=== energy conservation over a 10 s coast (dampers off) ===")
drift = val.energy_drift(params)
print(f"relative drift of E_kin + E_pot: {drift:.2e}")

print("\n=== step Jacobians vs an independent high-order stencil ===")
print(f"worst entry deviation: {val.linearize_fd_errors(t3, params, n=10):.2e}")
