import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from cowgait import synth
from cowgait.steps import MidSwing, StancePhase, StepTimeline, detect_steps
from cowgait.traits import (
    FEATURE_NAMES, TraitError, amplitude_spectrum, back_posture, extract_features, fit_circle,
    head_bobbing, stance_duration_diff, stride_length_diff, swing_duration_diff, tracking_distance,
)
from cowgait.trajectory import HOOVES, KP, TrajectorySet, head_length, kp_index

from oracles import circumradius_mp

LF, RF, LH, RH = KP.LeftFrontHoof, KP.RightFrontHoof, KP.LeftHindHoof, KP.RightHindHoof
SWAP = {LF: RF, RF: LF, LH: RH, RH: LH}


def _timeline(stances=None, mids=None, period=20.0, valid=(0, 99)):
    stances = stances or {}
    mids = mids or {}
    return StepTimeline(
        {leg: tuple(StancePhase(a, b, leg) for a, b in stances.get(leg, ())) for leg in HOOVES},
        {leg: tuple(MidSwing(f, leg) for f in mids.get(leg, ())) for leg in HOOVES},
        period, valid,
    )


def _traj(n=100):
    return np.zeros((n, 9, 2))


# ---------------------------------------------------------------- fit_circle

def test_fit_circle_examples():
    f = fit_circle((0, 0), (2, 0), (1, 1))
    assert (f.cx, f.cy, f.radius) == pytest.approx((1, 0, 1))
    f = fit_circle((0, 1), (1, 0), (0, -1))
    assert (f.cx, f.cy, f.radius) == pytest.approx((0, 0, 1), abs=1e-12)
    f = fit_circle((0, 0), (1, 0), (2, 0))
    assert math.isinf(f.radius) and f.curvature == 0.0


def test_fit_circle_duplicate_points():
    with pytest.raises(TraitError, match="degenerate spine"):
        fit_circle((1, 1), (1, 1), (3, 0))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=3, unique=True))
@example([(0.0, 0.0), (0.0, 2.0668189740505268e-257), (0.0, 1.3761443998266641e-270)])  # underflow
@example([(0.0, 0.0), (1e-200, 0.0), (0.0, 1e-200)])
def test_fit_circle_equidistant_and_matches_oracle(pts):
    p1, p2, p3 = (np.array(p) for p in pts)
    f = fit_circle(p1, p2, p3)
    if math.isinf(f.radius):
        return
    # skip near-degenerate triangles, where the oracle itself is ill conditioned
    b, c = p2 - p1, p3 - p1
    area = abs(b[0] * c[1] - b[1] * c[0]) / 2
    span = max(np.sum((p2 - p1) ** 2), np.sum((p3 - p1) ** 2), np.sum((p3 - p2) ** 2))
    if area < 1e-6 * span:
        return
    for p in (p1, p2, p3):
        assert abs(math.hypot(p[0] - f.cx, p[1] - f.cy) - f.radius) <= 1e-6 * f.radius
    assert f.radius == pytest.approx(float(circumradius_mp(*pts)), rel=1e-6)


# ---------------------------------------------------------------- BPM

def _spine_traj(p1, p2, p3, n=40):
    c = _traj(n)
    c[:, kp_index(KP.Withers)] = p1
    c[:, kp_index(KP.Sacrum)] = p2
    c[:, kp_index(KP.CaudalThoracic)] = p3
    return TrajectorySet("v", "c", c)


def test_bpm_straight_spine_is_zero():
    t = _spine_traj((0, 0), (100, 0), (50, 0))
    tl = _timeline(mids={LH: [5, 25], RF: [12]})
    assert back_posture(t, tl, 110.0) == 0.0


def test_bpm_unit_circle_h2():
    t = _spine_traj((0, 0), (2, 0), (1, 1))
    tl = _timeline(mids={LH: [5, 25], RH: [15], LF: [8], RF: [30]})
    assert back_posture(t, tl, 2.0) == pytest.approx(2.0)
    s = _spine_traj((0, 0), (200, 0), (100, 100))
    assert back_posture(s, tl, 200.0) == pytest.approx(2.0)


def test_bpm_max_over_leg_medians():
    c = _traj(30)
    c[:, kp_index(KP.Withers)] = (0, 0)
    c[:, kp_index(KP.Sacrum)] = (2, 0)
    c[:, kp_index(KP.CaudalThoracic)] = (1, 1)  # r = 1
    c[10:, kp_index(KP.CaudalThoracic)] = (1, 0.5)  # r = 1.25
    t = TrajectorySet("v", "c", c)
    tl = _timeline(mids={LH: [2, 12, 14], RH: [3]})
    # LH median over {1, 0.8, 0.8} = 0.8; RH = 1
    assert back_posture(t, tl, 1.0) == pytest.approx(1.0)


def test_bpm_no_swings():
    t = _spine_traj((0, 0), (2, 0), (1, 1))
    with pytest.raises(TraitError, match="no swing events"):
        back_posture(t, _timeline(), 1.0)


# ---------------------------------------------------------------- HBA

def _forehead_traj(y):
    c = _traj(len(y))
    c[:, kp_index(KP.Forehead), 1] = y
    return TrajectorySet("v", "c", c)


def test_hba_constant_is_zero():
    t = _forehead_traj(np.full(60, 123.0))
    assert head_bobbing(t, _timeline(period=20.0, valid=(0, 59))) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("P,cycles", [(20, 3), (36, 3), (25, 4)])
def test_hba_pure_sinusoid(P, cycles):
    n = P * cycles
    y = 10.0 * np.sin(2 * np.pi * np.arange(n) / P)
    hba = head_bobbing(_forehead_traj(y), _timeline(period=float(P), valid=(0, n - 1)))
    assert hba == pytest.approx(5.0, rel=1e-9)


def test_hba_trend_alone_is_small():
    n, P = 108, 36.0
    t = np.arange(n)
    trend = 0.02 * t
    tl = _timeline(period=P, valid=(0, n - 1))
    only = head_bobbing(_forehead_traj(trend), tl)
    both = head_bobbing(_forehead_traj(trend + 10.0 * np.sin(2 * np.pi * t / P)), tl)
    assert only < 0.1 * both


def test_hba_uses_valid_range_only():
    y = np.zeros(100)
    y[:40] = 50.0 * np.sin(np.arange(40))
    tl = _timeline(period=20.0, valid=(40, 99))
    assert head_bobbing(_forehead_traj(y), tl) == pytest.approx(0.0, abs=1e-12)


def test_hba_band_selection():
    n, P = 120, 40.0
    t = np.arange(n)
    fast = 4.0 * np.sin(2 * np.pi * t / 4)  # k = 30, far outside the gait band
    tl = _timeline(period=P, valid=(0, n - 1))
    assert head_bobbing(_forehead_traj(fast), tl, "gait") < 1e-9
    assert head_bobbing(_forehead_traj(fast), tl, "full") == pytest.approx(2.0)
    with pytest.raises(ValueError):
        head_bobbing(_forehead_traj(fast), tl, "bogus")


def test_hba_errors():
    with pytest.raises(TraitError):
        head_bobbing(_forehead_traj(np.zeros(7)), _timeline(valid=(0, 6)))
    with pytest.raises(TraitError, match="gait period"):
        head_bobbing(_forehead_traj(np.zeros(30)), _timeline(period=0.0, valid=(0, 29)))


def test_amplitude_spectrum_normalization():
    a = amplitude_spectrum(np.full(16, 3.0))
    assert a[0] == pytest.approx(3.0)
    assert np.allclose(a[1:], 0.0)


# ---------------------------------------------------------------- TRK / STL / STD / SWD

def test_trk_direct_substitution():
    c = _traj()
    c[:, kp_index(LF), 0] = 300.0
    c[:, kp_index(LH), 0] = 250.0
    tl = _timeline({LF: [(10, 30)], LH: [(20, 40)]})
    assert tracking_distance(TrajectorySet("v", "c", c), tl, 50.0, "left") == pytest.approx(1.0)


def test_trk_prints_coincide_is_zero():
    c = _traj()
    c[:, kp_index(RF), 0] = 300.0
    c[:, kp_index(RH), 0] = 300.0
    tl = _timeline({RF: [(10, 30), (50, 70)], RH: [(20, 40), (60, 80)]})
    assert tracking_distance(TrajectorySet("v", "c", c), tl, 50.0, "right") == 0.0


def test_trk_no_event():
    c = _traj()
    tl = _timeline({LF: [(50, 70)], LH: [(20, 40)]})
    with pytest.raises(TraitError, match="no tracking event"):
        tracking_distance(TrajectorySet("v", "c", c), tl, 50.0, "left")


def test_stl_direct_substitution():
    h = 100.0
    c = _traj()
    c[:, kp_index(LH), 0] = np.where(np.arange(100) < 40, 0.0, 200.0)
    c[:, kp_index(RH), 0] = np.where(np.arange(100) < 45, 10.0, 260.0)
    tl = _timeline({LH: [(10, 30), (40, 60)], RH: [(15, 35), (45, 65)]})
    assert stride_length_diff(TrajectorySet("v", "c", c), tl, h, "hind") == pytest.approx(0.5)


def test_stl_insufficient_strides():
    tl = _timeline({LF: [(10, 30)], RF: [(15, 35), (45, 65)]})
    with pytest.raises(TraitError, match="insufficient strides"):
        stride_length_diff(TrajectorySet("v", "c", _traj()), tl, 1.0, "front")


def test_std_median_then_difference():
    tl = _timeline({LF: [(5, 25), (30, 52), (60, 84)], RF: [(20, 50)]}, valid=(0, 99))
    assert stance_duration_diff(tl, "front") == 8.0


def test_std_ignores_censored_stances():
    tl = _timeline({LH: [(0, 40), (50, 70)], RH: [(20, 40), (60, 99)]}, valid=(0, 99))
    assert stance_duration_diff(tl, "hind") == 0.0
    tl = _timeline({LH: [(0, 40)], RH: [(20, 40)]}, valid=(0, 99))
    with pytest.raises(TraitError):
        stance_duration_diff(tl, "hind")


def test_swd_direct():
    tl = _timeline({LH: [(0, 20), (31, 50)], RH: [(5, 20), (35, 60)]})
    # left swing 21..30 -> 9; right swing 21..34 -> 13
    assert swing_duration_diff(tl, "hind") == 4.0


def test_symmetric_zero():
    s = [(5, 25), (40, 60), (75, 95)]
    tl = _timeline({LF: s, RF: s})
    assert stance_duration_diff(tl, "front") == 0.0
    assert swing_duration_diff(tl, "front") == 0.0


# ---------------------------------------------------------------- extract_features

def _features(cfg):
    traj, truth = synth.generate(cfg)
    tl = detect_steps(traj)
    return traj, tl, extract_features(traj, tl, head_length(traj)), truth


def test_healthy_template_near_zero():
    _, _, fv, _ = _features(synth.healthy_preset(seed=0))
    d = fv.as_dict()
    assert d["BPM"] == pytest.approx(0, abs=1e-12)
    assert d["HBA"] == pytest.approx(0, abs=1e-9)
    for k in ("TRK_L", "TRK_R", "STL_F", "STL_H"):
        assert abs(d[k]) <= 0.05
    for k in ("STD_F", "STD_H", "SWD_F", "SWD_H"):
        assert d[k] == 0


def test_lame_above_healthy():
    _, _, h, _ = _features(synth.healthy_preset(seed=3))
    _, _, l, truth = _features(synth.lame_preset(seed=3))
    for k in ("BPM", "HBA", "TRK_L", "TRK_R"):
        assert getattr(l, k) > getattr(h, k)
    assert l.TRK_L == pytest.approx(0.5, abs=0.05)
    assert l.BPM == pytest.approx(truth.traits["BPM"], rel=0.05)


def test_feature_vector_layout():
    _, _, fv, _ = _features(synth.lame_preset(seed=1, cow_id="cowX", video_id="vidX"))
    assert fv.video_id == "vidX" and fv.cow_id == "cowX"
    assert list(fv.as_dict()) == list(FEATURE_NAMES)
    assert fv.values().shape == (10,)
    assert np.all(np.isfinite(fv.values()))


def test_one_rf_stance_fails():
    traj, tl, _, _ = _features(synth.healthy_preset(seed=0))
    st_ = dict(tl.stances)
    st_[RF] = st_[RF][:1]
    bad = StepTimeline(st_, tl.midswings, tl.gait_period, tl.valid_range)
    with pytest.raises(TraitError, match="feature extraction failed"):
        extract_features(traj, bad, head_length(traj))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 5000), st.floats(0.2, 5.0), st.floats(-500, 500), st.floats(-500, 500))
def test_scale_and_translation(seed, c, dx, dy):
    traj, tl, fv, _ = _features(synth.lame_preset(seed=seed))
    h = head_length(traj)
    scaled = traj.replace(coords=traj.coords * c)
    fs = extract_features(scaled, tl, head_length(scaled))
    for k in ("BPM", "TRK_L", "TRK_R", "STL_F", "STL_H"):
        assert getattr(fs, k) == pytest.approx(getattr(fv, k), abs=1e-9)
    assert fs.HBA == pytest.approx(c * fv.HBA, rel=1e-9, abs=1e-9)
    moved = traj.replace(coords=traj.coords + np.array([dx, dy]))
    fm = extract_features(moved, tl, head_length(moved))
    np.testing.assert_allclose(fm.values(), fv.values(), atol=1e-8)
    assert h > 0


def _swap_sides(traj, tl):
    c = np.array(traj.coords)
    for a, b in ((LF, RF), (LH, RH)):
        c[:, [kp_index(a), kp_index(b)]] = c[:, [kp_index(b), kp_index(a)]]
    st_ = {SWAP[leg]: tuple(StancePhase(s.start, s.end, SWAP[leg]) for s in v) for leg, v in tl.stances.items()}
    ms = {SWAP[leg]: tuple(MidSwing(m.frame, SWAP[leg]) for m in v) for leg, v in tl.midswings.items()}
    return traj.replace(coords=c), StepTimeline(st_, ms, tl.gait_period, tl.valid_range)


@pytest.mark.parametrize("seed", range(4))
def test_left_right_swap(seed):
    cfg = synth.lame_preset(seed=seed, tracking_offset=(0.3, 0.6), stride_px=(320.0, 345.0),
                            stance_frames=(26, 29, 26, 26), swing_frames=(10, 7, 10, 10))
    traj, tl, fv, _ = _features(cfg)
    t2, tl2 = _swap_sides(traj, tl)
    f2 = extract_features(t2, tl2, head_length(t2))
    assert f2.TRK_L == pytest.approx(fv.TRK_R, abs=1e-12)
    assert f2.TRK_R == pytest.approx(fv.TRK_L, abs=1e-12)
    for k in ("STL_F", "STL_H", "STD_F", "STD_H", "SWD_F", "SWD_H"):
        assert getattr(f2, k) == pytest.approx(getattr(fv, k), abs=1e-12)
