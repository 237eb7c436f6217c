"""Acceptance suite: one test per criterion, each printing a summary line.

Run with `pytest tests/test_acceptance.py -v -s`.  The closed-loop criteria
build their scenarios through the public harness only.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from irwsim import adhesion as ad
from irwsim import harness as hz
from irwsim import model as md
from irwsim import plant as pl
from irwsim import track as tr
from irwsim import validation as val
from irwsim.integration import TorqueLimits, integrate
from irwsim.mpc import MpcConfig

PARAMS = md.VehicleParams()
FN_TOTAL = PARAMS.m_x * PARAMS.g


def worse_contact(run):
    """Adhesion/slip series of the larger-slip contact per tick."""
    d = run.data
    pick_ri = np.abs(d["s_ri"]) >= np.abs(d["s_le"])
    f = np.where(pick_ri, d["f_ri"], d["f_le"])
    s = np.where(pick_ri, d["s_ri"], d["s_le"])
    return f, s


def trailing_mean(series, window):
    return np.convolve(series, np.ones(window) / window, mode="valid")


# ----------------------------------------------------------------------
# 1 - superelevation reproduction
# ----------------------------------------------------------------------

def test_criterion_1_superelevation():
    rows = {"T1": 0.108, "T2": 0.168, "T3": 0.151, "T4": 0.123}
    worst = 0.0
    for tid, expect in rows.items():
        v_kmh, a, radius = tr.STANDARD_TRACKS[tid]
        got = tr.superelevation_from_design(v_kmh / 3.6, radius, a, 1.5)
        worst = max(worst, abs(got - expect))
        assert got == pytest.approx(expect, abs=1e-3)
    print(f"\n[criterion 1] PASS superelevation: worst deviation {worst*1e3:.3f} mm "
          f"(tolerance 1 mm)")


# ----------------------------------------------------------------------
# 2 - model correctness suite
# ----------------------------------------------------------------------

def test_criterion_2_model_suite():
    track = tr.build_track(tr.standard_track_spec("T3", total_length=1500.0))
    worst_oracle = float(np.max(val.lagrange_oracle_errors(track, PARAMS, n=100)))
    drift = val.energy_drift(PARAMS, duration=10.0, dt=1e-3)
    worst_jac = val.linearize_fd_errors(track, PARAMS, n=20)
    assert worst_oracle <= 1e-6
    assert drift <= 1e-6
    assert worst_jac <= 1e-6
    print(f"\n[criterion 2] PASS model suite: oracle {worst_oracle:.2e}, "
          f"energy drift {drift:.2e}, jacobians {worst_jac:.2e} (all <= 1e-6)")


# ----------------------------------------------------------------------
# 3 - lateral tracking ordering over speed and controllers
# ----------------------------------------------------------------------

SPEEDS_KMH = (40, 160, 280, 400)


@pytest.fixture(scope="module")
def ladder_runs():
    # Zero longitudinal demand: widen the adhesion corridor past the
    # differential-induced readings so the base torque stays exactly idle
    # and the lateral controllers are compared on their own.
    quiet = ad.AdhesionConfig(tol_f=0.02)
    runs = {}
    for v_kmh in SPEEDS_KMH:
        for ctrl in ("nmpc", "ltvmpc"):
            spec = hz.ScenarioSpec(
                track_id="T5", v0=v_kmh / 3.6, distance=300.0,
                y_star=hz.SignalSpec(kind="sine", amplitude=0.0025, period=150.0),
                controller=ctrl, adhesion_cfg=quiet)
            runs[(v_kmh, ctrl)] = hz.run_scenario(spec)
    return runs


def test_criterion_3_lateral_ordering(ladder_runs):
    # At the 2.5 mm amplitude the centered linearization is near-exact, so
    # the two controllers coincide to sub-nanometer RMSE; the ordering is
    # asserted at the resolution where the comparison is physically
    # meaningful (0.1 nm) rather than at accumulated rounding noise.
    resolution = 1e-10
    lines = []
    for v in SPEEDS_KMH:
        r_n = ladder_runs[(v, "nmpc")].rmse
        r_l = ladder_runs[(v, "ltvmpc")].rmse
        lines.append(f"{v} km/h: nmpc {r_n*1e6:.2f} um / ltv {r_l*1e6:.2f} um")
        assert r_n <= r_l + resolution, f"nmpc worse than ltv at {v} km/h"
    for ctrl in ("nmpc", "ltvmpc"):
        series = [ladder_runs[(v, ctrl)].rmse for v in SPEEDS_KMH]
        assert all(a <= b for a, b in zip(series, series[1:])), \
            f"{ctrl} error not monotone over speed: {series}"
    print("\n[criterion 3] PASS lateral ordering: " + "; ".join(lines))


# ----------------------------------------------------------------------
# 4 - preview benefit
# ----------------------------------------------------------------------

def test_criterion_4_preview_benefit():
    base = dict(
        track_id="T3", v0=280 / 3.6, distance=450.0,
        y_star=hz.SignalSpec(kind="sweep", amplitude=0.0025, period=200.0,
                             period_end=50.0, p_start=0.0, p_end=450.0),
        controller="nmpc")
    with_prev = hz.run_scenario(hz.ScenarioSpec(**base))
    frozen = hz.run_scenario(hz.ScenarioSpec(
        **base, mpc=MpcConfig(use_preview=False)))

    def lag(run):
        return hz.estimate_lag(run.data["p"], run.data["y_TrAx"],
                               run.spec.y_star, max_lag=40.0, step=0.02)

    lag_p, lag_f = lag(with_prev), lag(frozen)
    assert with_prev.rmse < frozen.rmse
    assert lag_p <= 0.25 * lag_f, f"lag {lag_p:.2f} m vs frozen {lag_f:.2f} m"
    print(f"\n[criterion 4] PASS preview: lag {lag_p:.2f} m vs {lag_f:.2f} m "
          f"frozen (ratio {lag_p/lag_f:.3f} <= 0.25), rmse {with_prev.rmse*1e6:.1f} "
          f"vs {frozen.rmse*1e6:.1f} um")


# ----------------------------------------------------------------------
# 5 - maximum seeking under poor and dropping adhesion
# ----------------------------------------------------------------------

def test_criterion_5_maximum_seeking():
    poor = pl.POOR_ADHESION
    dropped = pl.AdhesionCurveParams(f_max=0.06, k_0=4.8, s_peak=0.02)
    p_drop = 1100.0
    spec = hz.ScenarioSpec(
        track_id="T5", v0=400 / 3.6, distance=2400.0, max_time=20.0,
        f_x_star=hz.SignalSpec(kind="constant",
                               value=1.5 * poor.f_max * FN_TOTAL),
        adhesion_intervals=((0.0, poor), (p_drop, dropped)),
        controller="ltvmpc")
    run = hz.run_scenario(spec)
    t = run.data["t"]
    f_sel, s_sel = worse_contact(run)
    seg = np.array(run.segments)

    # slip stays bounded once the first retreat has happened
    assert (seg == "III").any(), "no maximum-seeking retreat occurred"
    first_retreat = int(np.argmax(seg == "III"))
    bound = 5.0 * max(poor.s_peak, dropped.s_peak)
    worst_slip = float(np.max(np.abs(s_sel[first_retreat:])))
    assert worst_slip <= bound

    # trailing-second mean rides near the achievable peak before the drop
    w = round(1.0 / spec.rates.fast_period)
    tm = trailing_mean(f_sel, w)
    t_tm = t[w - 1:]
    i_drop = int(np.argmax(run.data["p"] >= p_drop))
    t_drop = t[i_drop]
    pre = (t_tm >= 5.0) & (t_tm < t_drop)
    assert pre.any() and np.all(tm[pre] >= 0.90 * poor.f_max)

    # after the abrupt drop the mean first collapses, then recovers in 3 s
    post = t_tm >= t_drop
    tm_post, t_post = tm[post], t_tm[post]
    dip = int(np.argmax(tm_post < 0.90 * dropped.f_max))
    assert tm_post[dip] < 0.90 * dropped.f_max, "the drop never bit"
    rec = dip + int(np.argmax(tm_post[dip:] >= 0.90 * dropped.f_max))
    assert tm_post[rec] >= 0.90 * dropped.f_max, "no re-convergence"
    recon = float(t_post[rec] - t_drop)
    assert recon <= 3.0
    print(f"\n[criterion 5] PASS maximum seeking: pre-drop trailing mean "
          f">= {0.9*poor.f_max:.3f} from t=5 s, worst slip {worst_slip:.4f} "
          f"(bound {bound:.2f}), re-converged {recon:.2f} s after the drop")


# ----------------------------------------------------------------------
# 6 - regular adhesion tracking and odd mirror
# ----------------------------------------------------------------------

def _tracking_run(sign):
    f_set = sign * 0.6 * pl.GOOD_ADHESION.f_max
    spec = hz.ScenarioSpec(
        track_id="T5", v0=160 / 3.6, distance=500.0, max_time=6.0,
        f_x_star=hz.SignalSpec(kind="constant", value=f_set * FN_TOTAL),
        controller="ltvmpc")
    return f_set, hz.run_scenario(spec)


def test_criterion_6_regular_tracking():
    entries = {}
    for sign, name in ((1.0, "traction"), (-1.0, "braking")):
        f_set, run = _tracking_run(sign)
        t = run.data["t"]
        f_sel, _ = worse_contact(run)
        inside = np.abs(f_sel - f_set) <= run.spec.adhesion_cfg.tol_f
        assert inside.any(), f"{name} never reached the corridor"
        t_enter = float(t[np.argmax(inside)])
        assert t_enter <= 2.0
        assert np.all(inside[t >= 2.0]), f"{name} left the corridor"
        entries[name] = t_enter

    # odd mirror at the controller level, on recorded measurement streams
    _, run = _tracking_run(1.0)
    f_sel, s_sel = worse_contact(run)
    cfg = run.spec.adhesion_cfg
    f_set = 0.6 * pl.GOOD_ADHESION.f_max
    st_p = ad.AdhesionCtrlState()
    st_m = ad.AdhesionCtrlState()
    worst = 0.0
    for f, s in zip(f_sel, -s_sel):
        u_p, st_p = ad.adhesion_step(f_set, f, s, st_p, cfg)
        u_m, st_m = ad.adhesion_step(-f_set, -f, -s, st_m, cfg)
        worst = max(worst, abs(u_p + u_m))
    assert worst <= 1e-9
    print(f"\n[criterion 6] PASS regular tracking: corridor entry "
          f"{entries['traction']:.2f} s traction / {entries['braking']:.2f} s "
          f"braking (limit 2 s), mirror deviation {worst:.1e} (<= 1e-9)")


# ----------------------------------------------------------------------
# 7 - torque integration rule exactness
# ----------------------------------------------------------------------

def test_criterion_7_integration_rule():
    lim = TorqueLimits(1000.0, -1000.0)
    assert integrate(0.0, 100.0, lim)[:2] == (100.0, -100.0)
    assert integrate(950.0, 100.0, lim)[:2] == (1000.0, 800.0)

    rng = np.random.default_rng(2024)
    n = 1_000_000
    u_d = rng.uniform(-2000.0, 2000.0, n)
    du = rng.uniform(-1000.0, 1000.0, n)
    tau_long = np.where(u_d > 0.0,
                        np.minimum(u_d, lim.tau_max - np.abs(du)),
                        np.maximum(u_d, lim.tau_min + np.abs(du)))
    tau_ri = tau_long + du
    tau_le = tau_long - du
    assert np.all((tau_ri >= lim.tau_min) & (tau_ri <= lim.tau_max))
    assert np.all((tau_le >= lim.tau_min) & (tau_le <= lim.tau_max))
    assert np.allclose((tau_ri - tau_le) / 2.0, du, rtol=0.0, atol=1e-9)
    interior = np.abs(u_d) <= np.where(u_d > 0.0, lim.tau_max,
                                       -lim.tau_min) - np.abs(du)
    assert np.allclose(((tau_ri + tau_le) / 2.0)[interior], u_d[interior],
                       rtol=0.0, atol=1e-9)
    for i in rng.integers(0, n, 1000):
        cmd = integrate(float(u_d[i]), float(du[i]), lim)
        assert (cmd.tau_ri, cmd.tau_le) == (tau_ri[i], tau_le[i])
    print(f"\n[criterion 7] PASS integration rule: worked examples and "
          f"{n} random samples (bounds, differential, common mode)")


# ----------------------------------------------------------------------
# 8 - solver timing ratio on a replay
# ----------------------------------------------------------------------

def test_criterion_8_solver_timing():
    spec = hz.ScenarioSpec(
        track_id="T3", v0=280 / 3.6, distance=430.0,
        y_star=hz.SignalSpec(kind="sweep", amplitude=0.0025, period=200.0,
                             period_end=50.0, p_start=0.0, p_end=430.0),
        controller="ltvmpc")
    rep = hz.bench_solvers(spec, n_solves=500)
    assert rep.n_solves >= 500
    assert rep.ratio_median <= 0.5, f"ratio {rep.ratio_median:.3f}"
    print(f"\n[criterion 8] PASS solver timing: median ltv "
          f"{rep.ltv['median']*1e3:.2f} ms / nmpc {rep.nmpc['median']*1e3:.2f} ms "
          f"= {rep.ratio_median:.3f} (<= 0.5) over {rep.n_solves} solves")


# ----------------------------------------------------------------------
# 9 - integrated braking / lateral accuracy trade-off
# ----------------------------------------------------------------------

def _braking_spec(r_weight):
    # The design-speed row of the second catalogue curve with a long
    # straight approach (segment lengths are configuration, not catalogue
    # data) and a yaw binding stiff enough that lateral effort competes
    # for the saturated torque budget.
    t2_geom = tr.TrackSpec(
        shape="straight-clothoid-curve", design_velocity=160 / 3.6,
        design_lateral_accel=0.2167, curve_radius=1500.0,
        lead_in=420.0, total_length=1500.0)
    return hz.ScenarioSpec(
        track_id="T2", track_spec=t2_geom, v0=160 / 3.6, distance=1400.0,
        max_time=40.0,
        y_star=hz.SignalSpec(kind="sweep", amplitude=0.005, period=100.0,
                             period_end=25.0, p_start=0.0, p_end=500.0),
        f_x_star=hz.SignalSpec(kind="step", value=-80000.0, value_before=0.0,
                               p_start=60.0),
        controller="nmpc",
        mpc=MpcConfig(r_weight=r_weight),
        params=replace(PARAMS, k_s_z=5.0e6, k_d_z=4.0e5))


def test_criterion_9_braking_tradeoff():
    runs = {}
    for r_weight in (1e-3, 1e-2):
        run = hz.run_scenario(_braking_spec(r_weight))
        assert run.standstill and run.braking_distance is not None
        # commanded differential torque delivered exactly whenever feasible
        d = run.data
        feasible = np.abs(d["delta_u"]) <= 0.5 * (PARAMS.tau_max - PARAMS.tau_min)
        err = np.abs((d["tau_ri"] - d["tau_le"]) / 2.0 - d["delta_u"])[feasible]
        assert float(np.max(err)) <= 1e-9
        runs[r_weight] = run
    soft, stiff = runs[1e-3], runs[1e-2]
    assert stiff.braking_distance < soft.braking_distance, \
        f"{stiff.braking_distance:.2f} !< {soft.braking_distance:.2f}"
    assert stiff.rmse > soft.rmse
    print(f"\n[criterion 9] PASS braking trade-off: 10x input weight gives "
          f"{soft.braking_distance - stiff.braking_distance:.2f} m shorter "
          f"braking ({stiff.braking_distance:.1f} vs {soft.braking_distance:.1f} m) "
          f"at {1e3*(stiff.rmse - soft.rmse):.3f} mm more lateral error "
          f"({stiff.rmse*1e3:.3f} vs {soft.rmse*1e3:.3f} mm)")


# ----------------------------------------------------------------------
# 10 - deterministic replay
# ----------------------------------------------------------------------

def test_criterion_10_determinism(tmp_path):
    spec = hz.ScenarioSpec(
        track_id="T2", v0=160 / 3.6, distance=80.0,
        y_star=hz.SignalSpec(kind="sine", amplitude=0.002, period=120.0),
        f_x_star=hz.SignalSpec(kind="constant", value=15000.0),
        controller="ltvmpc", seed=11, miss_every_n=4)
    paths = [tmp_path / "r1.csv", tmp_path / "r2.csv"]
    for p in paths:
        hz.run_scenario(spec, csv_path=p)

    def canonical(path):
        lines = path.read_text().splitlines()
        hdr = lines[0].split(",")
        drop = {hdr.index(c) for c in hz.TIMING_COLUMNS}
        return "\n".join(
            ",".join(c for i, c in enumerate(ln.split(",")) if i not in drop)
            for ln in lines).encode()

    a, b = canonical(paths[0]), canonical(paths[1])
    assert a == b
    print(f"\n[criterion 10] PASS determinism: {len(a)} canonical bytes "
          f"identical across replays (timing columns excluded)")
