import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spc_fmcw.errors import IncompatibleSpectraError, InvalidAnnulusError, InvalidSizeError
from spc_fmcw.spc import BasebandFrame
from spc_fmcw.spectral import (
    POWER_FLOOR_DB,
    SpectrumResult,
    average_spectra,
    bins_to_range,
    find_peak,
    improvement_curve,
    measure_snr,
    onesided_energy,
    power_spectrum,
    raw_spectrum,
    write_improvement_csv,
    write_spectrum_csv,
)

FS_BB = 2.5e6
N_BB = 2048
ALPHA = 150e6 / 880e-6


def bb_tone(k, amplitude=1.0, theta=0.3, n=N_BB):
    t = np.arange(n)
    return BasebandFrame(amplitude * np.cos(2 * np.pi * k * t / n + theta), FS_BB, "spc", 0)


def spec_from_db(db, bin_hz=FS_BB / N_BB, method="spc"):
    return SpectrumResult(np.asarray(db, dtype=float), bin_hz, 1, method)


# --- power_spectrum ------------------------------------------------------------

@pytest.mark.parametrize("window", ["hann", "hamming", "blackman", "rect", "flattop"])
def test_bin_centred_unit_tone_reads_zero_db(window):
    s = power_spectrum(bb_tone(100), window)
    assert s.power_db[100] == pytest.approx(0.0, abs=0.01)


def test_amplitude_maps_to_db():
    s = power_spectrum(bb_tone(321, amplitude=0.01))
    assert s.power_db[321] == pytest.approx(-40.0, abs=0.01)


def test_processed_chirp_bin_width():
    s = power_spectrum(bb_tone(10))
    assert s.bin_hz == pytest.approx(1220.703125)
    assert len(s) == N_BB // 2 + 1
    r = bins_to_range(s, ALPHA).range_m
    assert r[1] == pytest.approx(1.074, abs=5e-4)
    assert np.all(np.diff(s.freqs_hz) > 0)


def test_zero_frame_sits_on_floor():
    s = power_spectrum(BasebandFrame(np.zeros(N_BB), FS_BB, "common", 0))
    assert np.all(s.power_db == POWER_FLOOR_DB)
    assert np.all(s.power_linear == 0.0)


def test_short_nfft_rejected():
    with pytest.raises(InvalidSizeError):
        power_spectrum(bb_tone(3), nfft=1024)


def test_zero_padding_keeps_tone_level():
    s = power_spectrum(bb_tone(100), nfft=8 * N_BB)
    assert s.power_db[800] == pytest.approx(0.0, abs=0.01)
    assert s.bin_hz == pytest.approx(FS_BB / (8 * N_BB))


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, st.integers(2, 600), elements=st.floats(-1e3, 1e3)),
    st.integers(0, 300),
    st.sampled_from(["hann", "rect", "blackman"]),
)
def test_parseval(x, pad, window):
    nfft = x.size + pad
    spec, w = raw_spectrum(x, window, nfft)
    energy = float(np.sum((x * w) ** 2))
    got = onesided_energy(spec, nfft)
    assert got == pytest.approx(energy, rel=1e-9, abs=1e-9 * (1 + float(np.sum(x ** 2))))


# --- averaging ------------------------------------------------------------------

def test_average_identical_spectra_is_identity():
    s = power_spectrum(bb_tone(100, amplitude=0.3))
    avg = average_spectra([s] * 7)
    np.testing.assert_allclose(avg.power_db, s.power_db, atol=1e-9)
    assert avg.n_averaged == 7


def test_average_is_linear_mean():
    p = 1e-3
    a = spec_from_db(np.full(5, 10 * np.log10(p)))
    b = spec_from_db(np.full(5, 10 * np.log10(3 * p)))
    assert np.allclose(average_spectra([a, b]).power_linear, 2 * p)


def test_average_rejects_mismatched_axes():
    a = spec_from_db(np.zeros(5))
    with pytest.raises(IncompatibleSpectraError):
        average_spectra([a, spec_from_db(np.zeros(6))])
    with pytest.raises(IncompatibleSpectraError):
        average_spectra([a, spec_from_db(np.zeros(5), bin_hz=1.0)])
    with pytest.raises(IncompatibleSpectraError):
        average_spectra([a, spec_from_db(np.zeros(5), method="common")])
    with pytest.raises(IncompatibleSpectraError):
        average_spectra([])


def _noise_spectra(count, seed):
    rng = np.random.default_rng(seed)
    return [power_spectrum(rng.standard_normal(N_BB), fs_hz=FS_BB, method="x") for _ in range(count)]


def test_averaging_shrinks_floor_spread():
    specs = _noise_spectra(100, 0)
    band = slice(10, -10)
    single = np.std(specs[0].power_linear[band])
    avg = np.std(average_spectra(specs).power_linear[band])
    assert single / avg == pytest.approx(10.0, rel=0.2)


def test_floor_variance_decreases_with_count():
    specs = _noise_spectra(64, 1)
    band = slice(10, -10)
    spreads = [np.std(average_spectra(specs[:n]).power_linear[band]) for n in (1, 4, 16, 64)]
    assert all(b < a for a, b in zip(spreads, spreads[1:]))


# --- range mapping ----------------------------------------------------------------

def test_range_mapping_examples():
    s = SpectrumResult(np.zeros(3), 1.25e6 / 2)
    r = bins_to_range(s, 1.70455e11).range_m
    assert r[0] == 0.0
    assert r[2] == pytest.approx(1100.0, rel=1e-4)
    assert bins_to_range(SpectrumResult(np.zeros(2), 1220.7), 1.70455e11).range_m[1] == pytest.approx(1.074, abs=1e-3)
    with pytest.raises(ValueError):
        bins_to_range(s, 0.0)


# --- improvement curve -------------------------------------------------------------

def _floor(seed, n=N_BB // 2 + 1):
    rng = np.random.default_rng(seed)
    return -90.0 + 10 * np.log10(rng.exponential(size=n))


def test_identical_spectra_give_zero_delta():
    s = spec_from_db(_floor(0))
    c = improvement_curve(s, s, 0.0, ALPHA)
    assert c.shift_bins == 0
    assert np.all(c.delta_db[~np.isnan(c.delta_db)] == 0.0)
    assert np.all(np.abs(c.fitted_delta_db[~c.excluded]) < 1e-9)


def test_constructed_8db_offset_is_recovered():
    shift = 8
    spc = _floor(1)
    common = np.concatenate([np.full(shift, -50.0), spc + 8.0])[: spc.size]
    c = improvement_curve(spec_from_db(common, method="common"), spec_from_db(spc), shift * FS_BB / N_BB, ALPHA)
    assert c.shift_bins == shift
    inc = ~c.excluded
    assert np.all(np.abs(c.fitted_delta_db[inc] - 8.0) <= 0.1)
    assert c.fit_max_db == pytest.approx(8.0, abs=0.1)
    assert c.fit_min_db == pytest.approx(8.0, abs=0.1)
    assert np.all(np.isnan(c.fitted_delta_db[c.excluded]))


def test_exclusion_regions():
    s = spec_from_db(_floor(2))
    c = improvement_curve(s, s, 10e3, ALPHA, guard_bins=5)
    assert np.all(c.excluded[:6])
    assert not c.excluded[6]
    assert np.all(c.excluded[-c.shift_bins:])
    assert c.range_m.size == c.delta_db.size == c.fitted_delta_db.size == c.excluded.size


def test_improvement_rejects_mismatched_bins():
    with pytest.raises(IncompatibleSpectraError):
        improvement_curve(spec_from_db(np.zeros(10)), spec_from_db(np.zeros(10), bin_hz=1.0), 0.0, ALPHA)


def test_value_at_range_picks_nearest_included_bin():
    s = spec_from_db(_floor(3))
    c = improvement_curve(s, s, 0.0, ALPHA)
    assert c.value_at_range(500.0) == pytest.approx(0.0, abs=1e-9)


# --- SNR ------------------------------------------------------------------------------

def test_snr_of_tone_above_flat_floor():
    db = np.full(N_BB // 2 + 1, -80.0)
    db[400] = -60.0
    assert measure_snr(spec_from_db(db), 400) == pytest.approx(20.0, abs=0.5)


def test_snr_over_noisy_floor():
    lin = np.random.default_rng(4).exponential(size=N_BB // 2 + 1) * 1e-8
    floor = np.median(lin[350:451])
    lin[400] = 100 * floor
    assert measure_snr(spec_from_db(10 * np.log10(lin)), 400) == pytest.approx(20.0, abs=0.5)


def test_snr_flat_spectrum_is_zero():
    assert measure_snr(spec_from_db(np.full(200, -70.0)), 77) == pytest.approx(0.0, abs=1e-9)


def test_snr_annulus_errors():
    with pytest.raises(InvalidAnnulusError):
        measure_snr(spec_from_db(np.zeros(5)), 2, half_width=3, exclude=3)
    with pytest.raises(IndexError):
        measure_snr(spec_from_db(np.zeros(5)), 9)


def test_find_peak_searches_neighbourhood():
    db = np.zeros(20)
    db[11] = 5.0
    assert find_peak(spec_from_db(db), 10) == 11
    assert find_peak(spec_from_db(db), 14) == 12 + int(np.argmax(db[12:17]))


# --- CSV ----------------------------------------------------------------------------------

def test_spectrum_csv_format(tmp_path):
    s = power_spectrum(bb_tone(10, amplitude=0.5))
    path = write_spectrum_csv(tmp_path / "s.csv", s, ALPHA)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().split("\n")
    assert lines[0] == "bin_hz,range_m,power_db"
    assert lines[-1] == ""
    assert len(lines) == len(s) + 2
    f, r, p = (float(v) for v in lines[11].split(","))
    assert f == pytest.approx(10 * s.bin_hz)
    assert p == pytest.approx(20 * np.log10(0.5), abs=0.01)


def test_improvement_csv_marks_excluded(tmp_path):
    s = spec_from_db(_floor(5))
    c = improvement_curve(s, s, 10e3, ALPHA)
    lines = write_improvement_csv(tmp_path / "i.csv", c).read_text().splitlines()
    assert lines[0] == "range_m,delta_db,fitted_delta_db,excluded"
    first = lines[1].split(",")
    assert first[2] == "" and first[3] == "1"
    assert lines[10].split(",")[3] == "0"


def test_csv_bytes_are_reproducible(tmp_path):
    a = write_spectrum_csv(tmp_path / "a.csv", average_spectra(_noise_spectra(5, 9)), ALPHA)
    b = write_spectrum_csv(tmp_path / "b.csv", average_spectra(_noise_spectra(5, 9)), ALPHA)
    assert a.read_bytes() == b.read_bytes()
