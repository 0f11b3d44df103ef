import math
from dataclasses import replace
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spc_fmcw.config import table1_scenario
from spc_fmcw.errors import InsufficientNoiseError
from spc_fmcw.phase_noise import NoiseRealization, PhaseNoiseSet, compose_if_noise
from spc_fmcw.scenario import (
    SPEED_OF_LIGHT,
    LeakageSpec,
    NoiseSpec,
    RFConstants,
    ScenarioConfig,
    TargetSpec,
    beat_to_range,
    derive_if_constants,
    draw_noise_set,
    fold_frequency,
    phase_cycles,
    range_to_delay,
    synthesize_chirp,
    synthesize_if_frame,
    table1_geometry,
    validate_plan,
    wrap_phase,
)
from spc_fmcw.spc import DEFAULT_NFFT, estimate_leakage

ALPHA = 150e6 / 880e-6
TAU_10K = 10e3 / ALPHA
QUIET = NoiseSpec(phase_noise=False)


def noiseless(targets=(), amplitude=1.0, theta=0.7, geometry=None, **kw):
    return ScenarioConfig(
        geometry=geometry or table1_geometry(),
        leakage=LeakageSpec(amplitude, TAU_10K, theta),
        targets=tuple(targets),
        noise=QUIET,
        **kw,
    )


# --- geometry --------------------------------------------------------------------

def test_table1_geometry_values():
    g = table1_geometry()
    assert g.slope_hz_per_s == 150e6 / 880e-6
    assert g.slope_hz_per_s == pytest.approx(1.70455e11, rel=1e-5)
    assert g.fs_hz == 10e6
    assert g.samples_per_chirp == 8800
    assert g.samples_kept == 8192
    assert g.samples_discarded == 608
    assert g.desired_bandwidth_hz == 1.25e6
    assert g.digital_if_carrier_hz == 2.5e6


def test_bin_width_maps_to_apparent_range_resolution():
    g = table1_geometry()
    bin_hz = g.fs_hz / 4 / 2048
    assert bin_hz == pytest.approx(1220.703125)
    assert beat_to_range(bin_hz, g.slope_hz_per_s) == pytest.approx(1.074, abs=5e-4)


def test_max_range_beats_at_band_edge():
    g = table1_geometry()
    t = TargetSpec(1.0, 1100.0)
    assert g.slope_hz_per_s * t.tau_s == pytest.approx(1.25e6, rel=1e-12)


def test_geometry_rejects_invalid_values():
    with pytest.raises(ValueError):
        table1_geometry(sweep_period_s=-1.0)
    with pytest.raises(ValueError):
        table1_geometry(samples_kept=9000)
    with pytest.raises(ValueError):
        table1_geometry(oversample_q=Fraction(1, 2))


def test_rational_oversampling():
    g = table1_geometry(oversample_q=Fraction(5, 2), samples_kept=4096)
    assert g.fs_hz == 6.25e6
    assert g.samples_per_chirp == 5500


@given(st.floats(0.0, 1e9), st.floats(1.0, 1e9))
def test_fold_frequency_lands_in_first_zone(f, fs):
    r = fold_frequency(f, fs)
    assert -1e-6 <= r <= fs / 2 + 1e-6
    n = np.arange(5)
    assert np.allclose(np.cos(2 * np.pi * r * n / fs), np.cos(2 * np.pi * f * n / fs), atol=1e-6)


@given(st.floats(0.0, 5000.0))
def test_range_delay_round_trip(r):
    f = ALPHA * range_to_delay(r)
    assert beat_to_range(f, ALPHA) == pytest.approx(r, rel=1e-12, abs=1e-9)


@given(st.floats(-1e6, 1e6))
def test_wrap_phase_range_and_equivalence(x):
    w = wrap_phase(x)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(x), abs_tol=1e-9)


def test_wrap_phase_maps_minus_pi_to_pi():
    assert wrap_phase(-math.pi) == math.pi


def test_phase_cycles_against_mpmath():
    mpmath.mp.dps = 40
    f, fs = 2510004.123456789, 10e6
    n = np.array([0, 1, 7, 8191, 8799, 123456])
    got = phase_cycles(f, n, fs)
    for k, g in zip(n, got):
        exact = mpmath.frac(mpmath.mpf(f) * int(k) / mpmath.mpf(fs))
        assert abs(g - float(exact)) < 1e-12


# --- derive_if_constants -------------------------------------------------------------

def test_zero_delays_give_phase_difference():
    f, th = derive_if_constants(14.35e9, ALPHA, 0.0, 0.0, 1.0, 2.5)
    assert f == 0.0
    assert th == pytest.approx(wrap_phase(1.0 - 2.5))


def test_leakage_beat_of_reference_delay():
    f, _ = derive_if_constants(14.35e9, 1.70455e11, 58.667e-9, 0.0, 0.0, 0.0)
    assert f == pytest.approx(10e3, abs=1.0)


@pytest.mark.parametrize("tau_int,tau_t,ts,tr", [
    (100e-9, 0.0, 0.0, 0.0),
    (58.667e-9, 3.3e-6, 0.4, -1.2),
    (1e-9, 7.33e-6, 3.0, 3.0),
])
def test_if_phase_against_extended_precision(tau_int, tau_t, ts, tr):
    mpmath.mp.dps = 50
    f_rx = 14.35e9
    _, th = derive_if_constants(f_rx, ALPHA, tau_int, tau_t, ts, tr)
    tau = mpmath.mpf(tau_int) + mpmath.mpf(tau_t)
    exact = (mpmath.mpf(ts) + 2 * mpmath.pi * mpmath.mpf(f_rx) * tau
             - mpmath.pi * mpmath.mpf(ALPHA) * tau ** 2 - mpmath.mpf(tr))
    exact = float(exact - 2 * mpmath.pi * mpmath.nint(exact / (2 * mpmath.pi)))
    assert abs(wrap_phase(th - exact)) < 1e-9


def test_reference_if_phase_example():
    _, th = derive_if_constants(14.35e9, 1.70455e11, 100e-9, 0.0, 0.0, 0.0)
    mpmath.mp.dps = 50
    exact = 2 * mpmath.pi * 1435 - mpmath.pi * mpmath.mpf(1.70455e11) * mpmath.mpf("1e-14")
    exact = float(exact - 2 * mpmath.pi * mpmath.nint(exact / (2 * mpmath.pi)))
    assert th == pytest.approx(exact, abs=1e-9)


def test_derived_phases_used_when_configured():
    rf = RFConstants(14.35e9, 0.2, -0.1)
    cfg = ScenarioConfig(
        table1_geometry(), LeakageSpec(1.0, TAU_10K, None), (TargetSpec(0.1, 300.0, None),),
        QUIET, rf,
    )
    assert cfg.leakage_phase() == derive_if_constants(14.35e9, ALPHA, TAU_10K, 0.0, 0.2, -0.1)[1]
    t = cfg.targets[0]
    assert cfg.target_phase(t) == derive_if_constants(14.35e9, ALPHA, TAU_10K, t.tau_s, 0.2, -0.1)[1]
    with pytest.raises(ValueError):
        ScenarioConfig(table1_geometry(), LeakageSpec(1.0, TAU_10K, None))


def test_derive_rejects_bad_inputs():
    with pytest.raises(ValueError):
        derive_if_constants(float("inf"), ALPHA, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        derive_if_constants(1e9, ALPHA, -1e-9, 0.0, 0.0, 0.0)


# --- frame synthesis ---------------------------------------------------------------------

def _oracle_chirp(cfg, phase_noise=None):
    """Per-sample evaluation with analog (unfolded) IF frequencies."""
    mpmath.mp.dps = 30
    g = cfg.geometry
    fs = mpmath.mpf(g.fs_hz)
    f_leak = mpmath.mpf(g.f_if_carrier_hz) + g.beat_sign * mpmath.mpf(ALPHA) * mpmath.mpf(cfg.leakage.tau_int_s)
    tones = [(cfg.leakage.amplitude_v, f_leak, cfg.leakage.theta_if_rad, 0)]
    for i, t in enumerate(cfg.targets):
        f_t = f_leak + g.beat_sign * mpmath.mpf(ALPHA) * mpmath.mpf(t.tau_s)
        tones.append((t.amplitude_v, f_t, t.theta_if_rad, i + 1))
    out = np.zeros(g.samples_per_chirp)
    for n in range(g.samples_per_chirp):
        acc = mpmath.mpf(0)
        for a, f, th, j in tones:
            arg = 2 * mpmath.pi * f * n / fs + th
            if phase_noise is not None:
                arg += phase_noise[j][n]
            acc += a * mpmath.cos(arg)
        out[n] = float(acc)
    return out


@pytest.mark.parametrize("geometry", [
    table1_geometry(),
    table1_geometry(f_if_carrier_hz=12.5e6),
    table1_geometry(f_tx_below_f_rx=True),
])
def test_noiseless_frame_matches_brute_force(geometry):
    cfg = noiseless([TargetSpec(0.05, 150.0, 0.3), TargetSpec(0.02, 777.7, -2.0)], geometry=geometry)
    x = synthesize_chirp(cfg, 0)
    ref = _oracle_chirp(cfg)
    assert np.max(np.abs(x - ref)) <= 1e-12 * np.max(np.abs(ref))
    frame = synthesize_if_frame(cfg, 0)
    np.testing.assert_array_equal(frame.samples, x[608:])


def test_noisy_frame_matches_brute_force():
    cfg = replace(noiseless([TargetSpec(0.05, 150.0, 0.3)]), noise=NoiseSpec())
    ns = draw_noise_set(cfg, 0)
    phis = [compose_if_noise(ns, TAU_10K, 0.0).samples,
            compose_if_noise(ns, TAU_10K, cfg.targets[0].tau_s).samples]
    x = synthesize_chirp(cfg, 0, ns)
    ref = _oracle_chirp(cfg, phis)
    assert np.max(np.abs(x - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_frames_are_deterministic_per_chirp():
    cfg = replace(noiseless([TargetSpec(0.05, 150.0)]), noise=NoiseSpec(white_noise_dbfs_hz=-140.0))
    a = synthesize_if_frame(cfg, 3, draw_noise_set(cfg, 3))
    b = synthesize_if_frame(cfg, 3, draw_noise_set(cfg, 3))
    c = synthesize_if_frame(cfg, 4, draw_noise_set(cfg, 4))
    assert a.samples.tobytes() == b.samples.tobytes()
    assert not np.array_equal(a.samples, c.samples)
    assert len(a) == 8192 and a.fs_hz == 10e6


def test_zero_leakage_no_targets_is_silent():
    frame = synthesize_if_frame(noiseless(amplitude=0.0), 0)
    assert np.all(frame.samples == 0.0)


def test_pure_leakage_peak_at_expected_frequency():
    frame = synthesize_if_frame(noiseless(), 0)
    est = estimate_leakage(frame, DEFAULT_NFFT)
    assert abs(est.f_if_beat_leakage_hz - 2.51e6) <= 4.77
    # Dense DTFT oracle around the peak.
    n = np.arange(len(frame))
    w = np.hanning(len(frame) + 1)[:-1]
    grid = 2.51e6 + np.linspace(-30, 30, 601)
    mags = [abs(np.sum(frame.samples * w * np.exp(-2j * np.pi * f * n / 10e6))) for f in grid]
    assert abs(grid[int(np.argmax(mags))] - 2.51e6) < 0.2


def test_signal_is_linear_in_components():
    targets = [TargetSpec(0.05, 150.0, 0.3), TargetSpec(0.02, 600.0, 1.0)]
    cfg = replace(noiseless(targets), noise=NoiseSpec())
    ns = draw_noise_set(cfg, 0)
    full = synthesize_chirp(cfg, 0, ns)
    leak = synthesize_chirp(replace(cfg, targets=()), 0, ns)
    parts = [synthesize_chirp(replace(cfg, leakage=replace(cfg.leakage, amplitude_v=0.0), targets=(t,)), 0, ns)
             for t in targets]
    np.testing.assert_allclose(full, leak + sum(parts), rtol=0, atol=1e-10)


def test_white_noise_level():
    cfg = replace(noiseless(amplitude=0.0), noise=NoiseSpec(phase_noise=False, white_noise_dbfs_hz=-120.0))
    x = np.concatenate([synthesize_chirp(cfg, i) for i in range(20)])
    assert np.var(x) == pytest.approx(1e-12 * 10e6 / 2, rel=0.05)


def test_short_noise_is_rejected():
    cfg = noiseless()
    z = NoiseRealization(np.zeros(100), 10e6)
    with pytest.raises(InsufficientNoiseError):
        synthesize_chirp(cfg, 0, PhaseNoiseSet(z, z, z))


def test_target_beat_offsets_from_leakage():
    cfg = noiseless([TargetSpec(1.0, 500.0)])
    t = cfg.targets[0]
    assert cfg.target_beat_hz(t) == pytest.approx(ALPHA * 2 * 500.0 / SPEED_OF_LIGHT)
    assert cfg.f_if_beat_leakage_hz == pytest.approx(2.51e6)


def test_frame_phase_references_first_kept_sample():
    cfg = noiseless(theta=0.7)
    expected = wrap_phase(0.7 + 2 * math.pi * 2.51e6 * 608 / 10e6)
    assert cfg.frame_leakage_phase() == pytest.approx(expected, abs=1e-9)


# --- plan validation ---------------------------------------------------------------------

def test_table1_plan_passes():
    rep = validate_plan(table1_geometry(), tau_int_s=TAU_10K)
    assert rep.passed
    assert rep.quarter_offset_hz == 0.0
    assert {c.name for c in rep.checks} == {"placement", "if_band", "sum_terms", "bandwidth", "leakage_offset"}


def test_q2_plan_flags_sum_term_aliasing():
    rep = validate_plan(table1_geometry(oversample_q=Fraction(2), samples_kept=4096))
    assert not rep.passed
    assert not rep.check("sum_terms").passed


def test_undersampled_placement_needs_order_enabled():
    g = table1_geometry(f_if_carrier_hz=12.5e6)
    assert not validate_plan(g).check("placement").passed
    rep = validate_plan(g, placement_orders=(0, 1))
    assert rep.check("placement").passed
    assert rep.passed


def test_bandwidth_check_fails_for_long_range():
    rep = validate_plan(table1_geometry(max_range_m=1200.0))
    assert not rep.check("bandwidth").passed
    assert rep.check("bandwidth").margin_hz < 0


def test_leakage_outside_guard_flagged():
    rep = validate_plan(table1_geometry(), tau_int_s=200e3 / ALPHA)
    assert not rep.check("leakage_offset").passed


def test_plan_report_serializes():
    d = validate_plan(table1_geometry()).to_dict()
    assert d["passed"] is True
    assert all({"name", "passed", "margin_hz", "detail"} <= set(c) for c in d["checks"])


def test_reference_scenario_noise_is_seed_split():
    cfg = table1_scenario(n_chirps=2)
    a, b = draw_noise_set(cfg, 0), draw_noise_set(cfg, 1)
    assert not np.array_equal(a.tx_lo.samples, b.tx_lo.samples)
    assert not np.array_equal(a.tx_lo.samples, a.rx_lo.samples)
    assert a.tx_lo_delay_s == pytest.approx(TAU_10K)
    assert a.rx_lo_delay_s == pytest.approx(TAU_10K / 2)
