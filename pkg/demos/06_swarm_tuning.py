"""Controller weight tuning by particle swarm.

The optimizer is exercised twice: on an analytic surrogate (instant, shows
convergence) and on a real short closed-loop scenario where the fitness is
the lateral error plus a small penalty on differential torque usage.
"""

import numpy as np

from irwsim import harness as hz

print("=== surrogate: quadratic bowl with the minimum at (1.5, -0.4) ===")
res = hz.tune_pso(
    {"a": (-5.0, 5.0), "b": (-5.0, 5.0)}, scenarios=None,
    n_particles=10, n_iters=40, seed=0,
    fitness=lambda d: (d["a"] - 1.5) ** 2 + 3.0 * (d["b"] + 0.4) ** 2)
print(f"found a = {res.best['a']:+.4f}, b = {res.best['b']:+.4f}, "
      f"cost {res.best_cost:.2e} after {len(res.history) - 1} iterations")

print("\n=== closed loop: input weight on a short tracking scenario ===")
scenario = hz.ScenarioSpec(
    track_id="T5", v0=200 / 3.6, distance=120.0,
    y_star=hz.SignalSpec(kind="sine", amplitude=0.002, period=100.0),
    controller="ltvmpc")
res = hz.tune_pso({"r": (1e-6, 1e-3)}, [scenario],
                  n_particles=4, n_iters=4, seed=1)
print(f"best input weight: {res.best['r']:.2e}, fitness {res.best_cost:.3e}")
print(f"fitness history: {np.array2string(np.asarray(res.history), precision=3)}")
