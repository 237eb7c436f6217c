import math
from dataclasses import replace

import numpy as np
import pytest

from irwsim import model as md
from irwsim import track as tr
from irwsim import validation as val


@pytest.fixture(scope="module")
def params():
    return md.VehicleParams()


@pytest.fixture(scope="module")
def t3():
    return tr.build_track(tr.standard_track_spec("T3", total_length=1500.0))


@pytest.fixture(scope="module")
def t5():
    return tr.build_track(tr.standard_track_spec("T5", total_length=1500.0))


class TestDependentGeometry:
    def test_centered(self, params):
        g = md.dependent_geometry(0.0, 0.0, 0.0, params)
        assert g.phi_trax == 0.0
        assert g.z_trax == -params.r_0
        assert g.r_le == g.r_ri == params.r_0
        assert g.y_le == g.y_ri == params.gauge / 2.0

    def test_roll_from_offset(self, params):
        g = md.dependent_geometry(1e-3, 0.0, 0.0, params)
        assert g.phi_trax == pytest.approx(-params.gamma * 1e-3, rel=1e-12)

    def test_vertical_from_yaw(self, params):
        g = md.dependent_geometry(0.0, 0.01, 0.0, params)
        expect = (params.delta_0 * params.gauge / 2.0) \
            * (1.0 / math.cos(0.01) - 1.0) - params.r_0
        assert g.z_trax == pytest.approx(expect, rel=1e-12)

    def test_right_radius_grows_to_the_right(self, params):
        g = md.dependent_geometry(2e-3, 0.0, 0.0, params)
        assert g.r_ri > params.r_0 > g.r_le
        assert g.y_ri < params.gauge / 2.0 < g.y_le

    def test_domain_error(self, params):
        with pytest.raises(ValueError):
            md.dependent_geometry(0.0, math.pi / 2, 0.0, params)


class TestWheelSpeeds:
    def test_centered_rolling(self, params):
        st = md.GearState(0, 0, 30.0, 0, 0, 0)
        g = md.dependent_geometry(0, 0, 0, params)
        om_ri, om_le = md.wheel_speeds(st, 0.0, g)
        assert om_ri == om_le == pytest.approx(-30.0 / params.r_0, rel=1e-12)

    def test_yaw_rate_coupling(self, params):
        st = md.GearState(0, 0, 20.0, 0.01, 0, 0)
        g = md.dependent_geometry(0, 0, 0, params)
        om_ri, om_le = md.wheel_speeds(st, 0.0, g)
        assert om_ri == pytest.approx(-(20.0 - 0.75 * 0.01) / 0.46, rel=1e-12)
        # the outer wheel runs faster under a positive net yaw rate
        assert abs(om_le) > abs(om_ri)


class TestGeneralizedForces:
    def test_symmetric_torque_no_moment(self, params):
        g = md.dependent_geometry(0, 0, 0, params)
        f = md.generalized_forces(md.ControlInput(300.0, 300.0), g)
        assert f[0] == pytest.approx(-600.0 / params.r_0, rel=1e-12)
        assert f[1] == 0.0

    def test_differential_torque_pure_moment(self, params):
        g = md.dependent_geometry(0, 0, 0, params)
        f = md.generalized_forces(md.ControlInput(-250.0, 250.0), g)
        assert f[0] == 0.0
        assert f[1] == pytest.approx(-2.0 * 0.75 * 250.0 / params.r_0, rel=1e-12)

    def test_asymmetric_radii(self, params):
        g = md.dependent_geometry(3e-3, 0.0, 0.0, params)
        f = md.generalized_forces(md.ControlInput(100.0, -40.0), g)
        assert f[0] == pytest.approx(-(-40.0 / g.r_le + 100.0 / g.r_ri), rel=1e-12)
        assert f[1] == pytest.approx(
            -(g.y_le * -40.0 / g.r_le - g.y_ri * 100.0 / g.r_ri), rel=1e-12)


class TestContinuousDynamics:
    def test_centered_coast_is_equilibrium(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        st = md.GearState(100.0, 0, 25.0, 0, 0, 0)
        d = md.continuous_dynamics(st, md.ControlInput(0, 0), theta, params)
        assert np.allclose(d, [25.0, 0, 0, 0, 0, 0], atol=1e-14)

    def test_symmetric_torque_longitudinal_only(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        st = md.GearState(100.0, 0, 25.0, 0, 0, 0)
        tau = 700.0
        d = md.continuous_dynamics(st, md.ControlInput(tau, tau), theta, params)
        m_eff = params.m_x + 4.0 * params.j_w_y / params.r_0 ** 2
        assert d[2] == pytest.approx(-2.0 * tau / (params.r_0 * m_eff), rel=1e-9)
        assert d[3] == 0.0

    def test_differential_torque_yaw_only(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        st = md.GearState(100.0, 0, 25.0, 0, 0, 0)
        d = md.continuous_dynamics(st, md.ControlInput(400.0, -400.0), theta, params)
        assert d[2] == 0.0
        assert d[3] != 0.0

    def test_yaw_spring_restores(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        st = md.GearState(100.0, 5e-3, 25.0, 0, 0, 5e-3)
        d = md.continuous_dynamics(st, md.ControlInput(0, 0), theta, params)
        assert d[3] < 0.0   # opposes psi_ax - psi_cb

    def test_speed_floor(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        st = md.GearState(100.0, 0, 0.05, 0, 0, 0)
        with pytest.raises(ValueError):
            md.continuous_dynamics(st, md.ControlInput(0, 0), theta, params)


class TestLagrangeOracle:
    def test_matches_numeric_euler_lagrange(self, params, t3):
        errs = val.lagrange_oracle_errors(t3, params, n=100, seed=0)
        assert float(np.max(errs)) <= 1e-6

    def test_scalar_path_equals_array_path(self, params, t3):
        tc = t3.scalars()
        sp = md.ScalarParams(params, params.m_cb)
        rng = np.random.default_rng(11)
        for _ in range(100):
            x6 = np.array([
                rng.uniform(1.0, 1400.0), rng.normal(0, 0.05),
                rng.uniform(3.0, 100.0), rng.normal(0, 0.05),
                rng.uniform(-6e-3, 6e-3), rng.normal(0, 0.02)])
            u = rng.uniform(-8000.0, 8000.0, 2)
            dv = md.dynamics_array(x6, u, t3, params, params.m_cb)
            ds = np.array(md.dynamics_scalar(tc, sp, tuple(x6), u[0], u[1]))
            assert np.max(np.abs(dv - ds) / np.maximum(np.abs(dv), 1.0)) < 1e-12


class TestEnergy:
    def test_conservation_without_dissipation(self, params):
        assert val.energy_drift(params, duration=10.0, dt=1e-3) <= 1e-6

    def test_euler_converges_to_rk4(self, params, t5):
        # explicit Euler approaches the RK4 reference at first order
        x0 = np.array([50.0, 1e-3, 20.0, 0.0, 1e-3, 1e-3])
        u = np.array([200.0, -150.0])
        ref = val.rk4_trajectory(x0, u, t5, params, params.m_cb, 1e-4, 5000)[-1]

        def euler_end(dt):
            n = int(round(0.5 / dt))
            x = x0.copy()
            for _ in range(n):
                x = md.step_array(x, u, t5, params, params.m_cb, dt)
            return x

        err1 = np.linalg.norm(euler_end(1e-3) - ref)
        err2 = np.linalg.norm(euler_end(5e-4) - ref)
        assert err2 < 0.65 * err1    # ~halves with the step


class TestDiscreteStep:
    def test_rejects_nonpositive_step(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        st = md.GearState(10.0, 0, 20.0, 0, 0, 0)
        with pytest.raises(ValueError):
            md.discrete_step(st, md.ControlInput(0, 0), theta, params, 0.0)

    def test_position_advances_exactly(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        st = md.GearState(10.0, 0, 20.0, 0, 0, 0)
        nxt = md.discrete_step(st, md.ControlInput(0, 0), theta, params, 0.01)
        assert nxt.x == pytest.approx(10.0 + 20.0 * 0.01, rel=1e-15)


class TestLinearize:
    def test_euler_structure(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        a_mat, _ = md.linearize(md.GearState(100.0, 0, 30.0, 0, 0, 0),
                                md.ControlInput(0, 0), theta, params, 0.01)
        assert a_mat[0, 2] == pytest.approx(0.01, rel=1e-6)
        assert a_mat[4, 5] == pytest.approx(0.01 * 30.0, rel=1e-6)

    def test_matches_reference_stencil(self, params, t3):
        assert val.linearize_fd_errors(t3, params, n=20) <= 1e-6

    def test_input_columns_mirror_in_yaw(self, params, t5):
        theta = md.ModelTheta.from_params(t5, params)
        _, b_mat = md.linearize(md.GearState(100.0, 0, 30.0, 0, 0, 0),
                                md.ControlInput(0, 0), theta, params, 0.01)
        assert b_mat[3, 0] == pytest.approx(-b_mat[3, 1], rel=1e-6)
        assert b_mat[2, 0] == pytest.approx(b_mat[2, 1], rel=1e-6)


def test_params_validation():
    with pytest.raises(ValueError):
        md.VehicleParams(m=-1.0)
    with pytest.raises(ValueError):
        md.VehicleParams(delta_0=1.2)   # breaks b/2 > r0 tan(d0)
    with pytest.raises(ValueError):
        md.VehicleParams(tau_min=10.0)


def test_theta_from_params(params, t5):
    theta = md.ModelTheta.from_params(t5, params)
    assert theta.m_cb == params.m_cb
    assert theta.track is t5
