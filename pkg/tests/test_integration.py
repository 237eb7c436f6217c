import numpy as np
import pytest

from irwsim.adhesion import AdhesionConfig
from irwsim.integration import (
    RateConfig,
    RateScheduler,
    TorqueLimits,
    integrate,
)

LIM = TorqueLimits(1000.0, -1000.0)


class TestIntegrate:
    def test_zero_base_pure_differential(self):
        cmd = integrate(0.0, 100.0, LIM)
        assert (cmd.tau_ri, cmd.tau_le) == (100.0, -100.0)
        assert not cmd.du_clipped

    def test_saturation_shaves_common_mode(self):
        cmd = integrate(950.0, 100.0, LIM)
        assert (cmd.tau_ri, cmd.tau_le) == (1000.0, 800.0)

    def test_pass_through_without_differential(self):
        cmd = integrate(500.0, 0.0, LIM)
        assert (cmd.tau_ri, cmd.tau_le) == (500.0, 500.0)
        cmd = integrate(-1500.0, 0.0, LIM)
        assert (cmd.tau_ri, cmd.tau_le) == (-1500.0, -1500.0) or cmd.tau_ri >= LIM.tau_min
        # base torque beyond the limits is clamped by the rule itself
        assert integrate(-1500.0, 0.0, LIM).tau_ri == -1000.0

    def test_differential_preserved_under_braking_saturation(self):
        cmd = integrate(-990.0, 50.0, LIM)
        assert (cmd.tau_ri - cmd.tau_le) / 2.0 == 50.0
        assert cmd.tau_le == -1000.0

    def test_random_bounds_and_fidelity(self):
        rng = np.random.default_rng(42)
        n = 1_000_000
        u_d = rng.uniform(-2000.0, 2000.0, n)
        du = rng.uniform(-1000.0, 1000.0, n)
        # vector evaluation of the same rule for speed
        du_lim = 0.5 * (LIM.tau_max - LIM.tau_min)
        duc = np.clip(du, -du_lim, du_lim)
        tau_long = np.where(u_d > 0.0,
                            np.minimum(u_d, LIM.tau_max - np.abs(duc)),
                            np.maximum(u_d, LIM.tau_min + np.abs(duc)))
        tau_ri = tau_long + duc
        tau_le = tau_long - duc
        assert np.all(tau_ri <= LIM.tau_max) and np.all(tau_ri >= LIM.tau_min)
        assert np.all(tau_le <= LIM.tau_max) and np.all(tau_le >= LIM.tau_min)
        # differential preserved exactly (up to one rounding of the sums)
        assert np.allclose((tau_ri - tau_le) / 2.0, duc, rtol=0.0, atol=1e-9)
        # common-mode fidelity when interior
        interior = np.abs(u_d) <= np.where(u_d > 0, LIM.tau_max, -LIM.tau_min) - np.abs(duc)
        assert np.allclose(((tau_ri + tau_le) / 2.0)[interior], u_d[interior],
                           rtol=0.0, atol=1e-9)
        # spot-check the scalar rule against the vector evaluation
        for i in rng.integers(0, n, 500):
            cmd = integrate(float(u_d[i]), float(du[i]), LIM)
            assert cmd.tau_ri == tau_ri[i] and cmd.tau_le == tau_le[i]

    def test_odd_symmetry(self):
        # with symmetric limits the rule commutes with sign reversal
        rng = np.random.default_rng(7)
        for _ in range(2000):
            u_d = rng.uniform(-1500.0, 1500.0)
            du = rng.uniform(-900.0, 900.0)
            a = integrate(u_d, du, LIM)
            b = integrate(-u_d, -du, LIM)
            assert b.tau_ri == -a.tau_ri and b.tau_le == -a.tau_le

    def test_oversized_differential_clipped_and_flagged(self):
        cmd = integrate(0.0, 1500.0, LIM)
        assert cmd.du_clipped
        assert (cmd.tau_ri - cmd.tau_le) / 2.0 == 1000.0


class TestRateConfig:
    def test_integer_multiple_enforced(self):
        with pytest.raises(ValueError):
            RateConfig(fast_period=1e-3, slow_period=2.5e-3)

    def test_ticks_per_solve(self):
        assert RateConfig(1e-3, 1e-2).ticks_per_solve == 10


class TestScheduler:
    def _make(self, du_values, miss_every_n=0):
        calls = []

        def solve(tick, u_d):
            calls.append((tick, u_d))
            return du_values[len(calls) - 1]

        sched = RateScheduler(RateConfig(1e-3, 1e-2), AdhesionConfig(),
                              solve, TorqueLimits(12000.0, -12000.0),
                              miss_every_n=miss_every_n)
        return sched, calls

    def test_one_solve_per_slow_tick(self):
        sched, calls = self._make([100.0] * 10)
        for k in range(30):
            sched.step(k, 0.0, 0.0, 0.0)
        assert len(calls) == 3
        assert [c[0] for c in calls] == [0, 10, 20]

    def test_hold_between_solves(self):
        sched, _ = self._make([100.0, 250.0, 400.0])
        held = []
        for k in range(30):
            cmd, diag = sched.step(k, 0.0, 0.0, 0.0)
            held.append(diag["du"])
        assert held[:10] == [100.0] * 10
        assert held[10:20] == [250.0] * 10
        assert held[20:] == [400.0] * 10

    def test_differential_constant_while_base_ramps(self):
        """Zero-order hold: outputs ramp in common mode only."""
        sched, _ = self._make([300.0] * 5)
        # force the base torque to ramp by feeding a setpoint error
        diffs, commons = [], []
        for k in range(10):
            cmd, diag = sched.step(k, 0.2, 0.0, 0.0)
            diffs.append((cmd.tau_ri - cmd.tau_le) / 2.0)
            commons.append((cmd.tau_ri + cmd.tau_le) / 2.0)
        assert all(d == 300.0 for d in diffs)
        assert commons == sorted(commons) and commons[-1] > commons[0]

    def test_deadline_miss_holds_previous(self):
        sched, calls = self._make([100.0, 250.0, 400.0, 550.0],
                                  miss_every_n=2)
        held = []
        misses = 0
        for k in range(40):
            cmd, diag = sched.step(k, 0.0, 0.0, 0.0)
            held.append(diag["du"])
            misses += diag["deadline_miss"]
        # solves 2 and 4 are injected misses: their results are discarded
        assert held[:10] == [100.0] * 10
        assert held[10:20] == [100.0] * 10      # miss: hold extended
        assert held[20:30] == [400.0] * 10
        assert held[30:] == [400.0] * 10        # miss again
        assert misses == 2
        assert sched.miss_count == 2
        # no torque discontinuity beyond the gain bound at the held edges
        assert len(calls) == 4
