import math

import numpy as np
import pytest

from irwsim import adhesion as ad


@pytest.fixture()
def cfg():
    return ad.AdhesionConfig()


def drive(cfg, f_set, f_seq, s_seq, state=None):
    """Feed measurement sequences through the controller."""
    st = state or ad.AdhesionCtrlState()
    u_hist, seg_hist = [], []
    for f, s in zip(f_seq, s_seq):
        u, st = ad.adhesion_step(f_set, f, s, st, cfg)
        u_hist.append(u)
        seg_hist.append(st.segment)
    return np.array(u_hist), seg_hist, st


class TestSetpoint:
    def test_zero_demand(self):
        assert ad.force_to_adhesion_setpoint(0.0, 1e5) == 0.0

    def test_ratio(self):
        assert ad.force_to_adhesion_setpoint(1e4, 1e5) == pytest.approx(0.1)

    def test_braking_sign_preserved(self):
        assert ad.force_to_adhesion_setpoint(-2e4, 1e5) == pytest.approx(-0.2)

    def test_bad_load(self):
        with pytest.raises(ValueError):
            ad.force_to_adhesion_setpoint(1e4, 0.0)


class TestSwitchingFunction:
    def test_same_signs_stable(self):
        assert ad.switching_function(0.5, 0.2) == pytest.approx(0.1)

    def test_opposite_signs_unstable(self):
        assert ad.switching_function(-0.5, 0.2) == pytest.approx(-0.1)

    def test_zero_gives_no_direction(self):
        assert ad.switching_function(0.0, 123.0) == 0.0


class TestDecisionTable:
    def test_corridor_holds(self, cfg):
        st = ad.AdhesionCtrlState(u_d=500.0, f_filt=0.05, s_filt=0.001,
                                  primed=True)
        u, st2 = ad.adhesion_step(0.05 + cfg.tol_f / 2, 0.05, 0.001, st, cfg)
        assert u == 500.0
        assert st2.segment == "II"

    def test_below_setpoint_stable_branch_increases(self, cfg):
        # climbing the stable branch: f and s grow together
        n = 60
        f = np.linspace(0.0, 0.01, n)
        s = np.linspace(0.0, 0.001, n)
        u, seg, _ = drive(cfg, 0.05, f, s)
        assert seg[-1] == "I"
        assert u[-1] == pytest.approx(u[0] + cfg.p2 * (n - 1))

    def test_unstable_branch_retreats(self, cfg):
        # torque rising but adhesion falling while slip grows: retreat
        st = ad.AdhesionCtrlState(u_d=4000.0, f_filt=0.09, s_filt=0.02,
                                  f_deriv=-0.5, s_deriv=0.4, primed=True)
        u, st2 = ad.adhesion_step(0.15, st.f_filt, st.s_filt, st, cfg)
        assert st2.segment == "III"
        assert u < 4000.0

    def test_above_corridor_backs_off(self, cfg):
        st = ad.AdhesionCtrlState(u_d=3000.0, f_filt=0.08, s_filt=0.002,
                                  primed=True)
        u, st2 = ad.adhesion_step(0.05, 0.08, 0.002, st, cfg)
        assert st2.segment == "D"
        assert u == pytest.approx(3000.0 - cfg.p2)

    def test_output_clamped(self):
        cfg = ad.AdhesionConfig(tau_max=100.0, tau_min=-100.0)
        st = ad.AdhesionCtrlState(u_d=95.0, f_filt=0.0, s_filt=0.0, primed=True)
        for _ in range(30):
            u, st = ad.adhesion_step(0.5, st.f_filt, st.s_filt, st, cfg)
        assert u == 100.0

    def test_nan_holds_and_flags(self, cfg):
        st = ad.AdhesionCtrlState(u_d=1234.0, primed=True)
        u, st2 = ad.adhesion_step(0.1, math.nan, 0.0, st, cfg)
        assert u == 1234.0
        assert st2.fault


class TestIncrements:
    def test_rate_limited(self, cfg):
        rng = np.random.default_rng(5)
        st = ad.AdhesionCtrlState()
        prev = st.u_d
        bound = max(cfg.p1, cfg.p2)
        for _ in range(2000):
            u, st = ad.adhesion_step(rng.uniform(-0.3, 0.3),
                                     rng.uniform(-0.4, 0.4),
                                     rng.uniform(-0.05, 0.05), st, cfg)
            assert abs(u - prev) <= bound + 1e-12
            prev = u


class TestOddSymmetry:
    def test_mirrored_streams_mirror_torque(self, cfg):
        """Braking is the exact odd mirror of traction."""
        rng = np.random.default_rng(9)
        n = 3000
        f = 0.1 * np.abs(np.sin(np.linspace(0, 9, n))) + 0.01 * rng.random(n)
        s = 0.01 * np.abs(np.sin(np.linspace(0, 9, n) + 0.2))
        u_pos, _, _ = drive(cfg, 0.12, f, s)
        u_neg, _, _ = drive(cfg, -0.12, -f, -s)
        assert np.max(np.abs(u_pos + u_neg)) <= 1e-9

    def test_segment_labels_match_under_mirror(self, cfg):
        n = 800
        f = np.linspace(0, 0.2, n)
        s = np.linspace(0, 0.01, n)
        _, seg_pos, _ = drive(cfg, 0.15, f, s)
        _, seg_neg, _ = drive(cfg, -0.15, -f, -s)
        assert seg_pos == seg_neg


def test_no_contact_model_dependency():
    """The controller must not know any contact law internals."""
    import inspect

    import irwsim.adhesion as mod

    src = inspect.getsource(mod)
    assert "AdhesionCurveParams" not in src
    assert "plant" not in src
    assert "adhesion_curve" not in src


def test_config_validation():
    with pytest.raises(ValueError):
        ad.AdhesionConfig(p1=1.0, p2=2.0)     # retreat must dominate
    with pytest.raises(ValueError):
        ad.AdhesionConfig(tol_f=0.0)
    with pytest.raises(ValueError):
        ad.AdhesionConfig(filter_tau=1e-4, period=1e-3)
