"""Calibrated power spectra, averaging, range mapping, improvement curves and SNR."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage, signal

from .errors import IncompatibleSpectraError, InvalidAnnulusError, InvalidSizeError
from .scenario import SPEED_OF_LIGHT
from .spc import BasebandFrame, get_window

POWER_FLOOR_DB = -400.0


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """One-sided power spectrum in dB re a unit-amplitude bin-centred tone.

    ``norm`` is the coherent-gain factor (sum(w)/2)**2 dividing the raw
    |X|^2, so raw bin power is ``10**(power_db/10) * norm``.
    """

    power_db: np.ndarray
    bin_hz: float
    n_averaged: int = 1
    method: str = ""
    f_shift_applied_hz: float = 0.0
    norm: float = 1.0
    range_m: np.ndarray | None = None

    def __len__(self):
        return self.power_db.size

    @property
    def freqs_hz(self) -> np.ndarray:
        return np.arange(self.power_db.size) * self.bin_hz

    @property
    def power_linear(self) -> np.ndarray:
        return np.where(self.power_db <= POWER_FLOOR_DB, 0.0, 10.0 ** (self.power_db / 10.0))


def _to_db(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p)
    return np.maximum(np.nan_to_num(db, nan=POWER_FLOOR_DB, neginf=POWER_FLOOR_DB), POWER_FLOOR_DB)


def raw_spectrum(x: np.ndarray, window: str = "hann", nfft: int | None = None):
    """Windowed one-sided DFT of ``x`` and the window itself."""
    x = np.asarray(x, dtype=float)
    nfft = x.size if nfft is None else nfft
    if nfft < x.size:
        raise InvalidSizeError(f"nfft {nfft} shorter than frame length {x.size}")
    w = get_window(window, x.size)
    return np.fft.rfft(x * w, nfft), w


def power_spectrum(
    frame: BasebandFrame | np.ndarray,
    window: str = "hann",
    nfft: int | None = None,
    fs_hz: float | None = None,
    method: str | None = None,
) -> SpectrumResult:
    """Magnitude-squared spectrum normalized so a bin-centred tone of
    amplitude A reads 20*log10(A) dB."""
    if isinstance(frame, BasebandFrame):
        x, fs, method = frame.samples, frame.fs_hz, frame.method if method is None else method
    else:
        x = np.asarray(frame, dtype=float)
        if fs_hz is None:
            raise ValueError("fs_hz is required for raw arrays")
        fs = fs_hz
    spec, w = raw_spectrum(x, window, nfft)
    nfft = x.size if nfft is None else nfft
    norm = (w.sum() / 2.0) ** 2
    power = (spec.real ** 2 + spec.imag ** 2) / norm
    return SpectrumResult(_to_db(power), fs / nfft, 1, method or "", 0.0, norm)


def onesided_energy(spec: np.ndarray, nfft: int) -> float:
    """Parseval sum for a one-sided rfft of length ``nfft``."""
    p = spec.real ** 2 + spec.imag ** 2
    weights = np.full(p.size, 2.0)
    weights[0] = 1.0
    if nfft % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(weights * p) / nfft)


def average_spectra(spectra: Sequence[SpectrumResult]) -> SpectrumResult:
    """Linear-power mean per bin."""
    if not spectra:
        raise IncompatibleSpectraError("nothing to average")
    first = spectra[0]
    for s in spectra[1:]:
        if (s.power_db.size != first.power_db.size or not math.isclose(s.bin_hz, first.bin_hz)
                or s.method != first.method):
            raise IncompatibleSpectraError("spectra differ in axis, bin width or method")
    total = sum(s.n_averaged for s in spectra)
    weights = np.array([s.n_averaged for s in spectra], dtype=float)
    lin = np.tensordot(weights, np.stack([s.power_linear for s in spectra]), axes=1) / total
    return replace(first, power_db=_to_db(lin), n_averaged=total)


def bins_to_range(spectrum: SpectrumResult, alpha: float) -> SpectrumResult:
    """Attach range_m = c * f / (2 * alpha) to every bin."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    return replace(spectrum, range_m=SPEED_OF_LIGHT * spectrum.freqs_hz / (2.0 * alpha))


@dataclass(frozen=True, eq=False)
class ImprovementCurve:
    """Common-minus-SPC noise floor after aligning the common spectrum.

    ``fitted_delta_db`` is NaN on excluded bins.  ``fit_max_db`` and
    ``fit_min_db`` are taken over the configured range domain.
    """

    range_m: np.ndarray
    delta_db: np.ndarray
    fitted_delta_db: np.ndarray
    excluded: np.ndarray
    shift_bins: int
    fit_max_db: float
    fit_min_db: float
    minor_leakage_db: float
    range_domain_m: tuple[float, float]

    def value_at_range(self, r: float) -> float:
        """Fitted improvement at the bin closest to range ``r``."""
        ok = ~self.excluded
        idx = np.flatnonzero(ok)
        return float(self.fitted_delta_db[idx[np.argmin(np.abs(self.range_m[idx] - r))]])


def _smooth(values: np.ndarray, median_bins: int, smooth_bins: int) -> np.ndarray:
    if values.size == 0:
        return values
    med = ndimage.median_filter(values, size=min(median_bins, values.size), mode="nearest")
    win = min(smooth_bins, values.size if values.size % 2 else values.size - 1)
    if win > 3:
        med = signal.savgol_filter(med, win, 3, mode="interp")
    return med


def improvement_curve(
    common: SpectrumResult,
    spc: SpectrumResult,
    f_beat_leakage_hz: float,
    alpha: float,
    *,
    guard_bins: int = 5,
    minor_leakage_bins: int = 20,
    range_domain_m: tuple[float, float] = (10.0, 1100.0),
    median_bins: int = 51,
    smooth_bins: int = 51,
) -> ImprovementCurve:
    """Align, subtract and smooth the noise floors of the two methods.

    The common spectrum is shifted down by round(f_beat_leakage / bin)
    bins.  Bins 0..guard_bins around the residual DC leakage are excluded;
    bins guard_bins+1..minor_leakage_bins are kept but their mean is also
    reported separately as ``minor_leakage_db``.
    """
    if not math.isclose(common.bin_hz, spc.bin_hz, rel_tol=1e-9) or len(common) != len(spc):
        raise IncompatibleSpectraError("spectra differ in bin width or length")
    shift = int(round(f_beat_leakage_hz / spc.bin_hz))
    n = len(spc)
    delta = np.full(n, np.nan)
    valid = n - max(shift, 0)
    delta[:valid] = common.power_db[shift:shift + valid] - spc.power_db[:valid]
    excluded = np.zeros(n, dtype=bool)
    excluded[:guard_bins + 1] = True
    excluded[valid:] = True

    fitted = np.full(n, np.nan)
    keep = np.flatnonzero(~excluded)
    fitted[keep] = _smooth(delta[keep], median_bins, smooth_bins)

    range_m = SPEED_OF_LIGHT * np.arange(n) * spc.bin_hz / (2.0 * alpha)
    lo, hi = range_domain_m
    dom = (~excluded) & (range_m >= lo) & (range_m <= hi)
    minor = slice(guard_bins + 1, min(minor_leakage_bins, valid - 1) + 1)
    minor_vals = delta[minor]
    return ImprovementCurve(
        range_m=range_m,
        delta_db=delta,
        fitted_delta_db=fitted,
        excluded=excluded,
        shift_bins=shift,
        fit_max_db=float(np.max(fitted[dom])) if dom.any() else float("nan"),
        fit_min_db=float(np.min(fitted[dom])) if dom.any() else float("nan"),
        minor_leakage_db=float(np.mean(minor_vals)) if minor_vals.size else float("nan"),
        range_domain_m=(float(lo), float(hi)),
    )


def measure_snr(
    spectrum: SpectrumResult, peak_bin: int, half_width: int = 50, exclude: int = 3
) -> float:
    """Peak power minus the median power of the surrounding annulus, in dB."""
    n = len(spectrum)
    if not 0 <= peak_bin < n:
        raise IndexError(f"peak_bin {peak_bin} outside [0, {n})")
    idx = np.arange(max(0, peak_bin - half_width), min(n, peak_bin + half_width + 1))
    idx = idx[np.abs(idx - peak_bin) > exclude]
    if idx.size == 0:
        raise InvalidAnnulusError("annulus around the peak holds no bins")
    floor = np.median(spectrum.power_linear[idx])
    return float(spectrum.power_db[peak_bin] - _to_db(np.array([floor]))[0])


def find_peak(spectrum: SpectrumResult, near_bin: int, search: int = 2) -> int:
    """Index of the largest bin within ``search`` bins of ``near_bin``."""
    lo = max(0, near_bin - search)
    hi = min(len(spectrum), near_bin + search + 1)
    return lo + int(np.argmax(spectrum.power_db[lo:hi]))


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def write_spectrum_csv(path, spectrum: SpectrumResult, alpha: float) -> Path:
    """``bin_hz,range_m,power_db`` (bin_hz is the bin's centre frequency)."""
    s = spectrum if spectrum.range_m is not None else bins_to_range(spectrum, alpha)
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("bin_hz,range_m,power_db\n")
        for f, r, p in zip(s.freqs_hz, s.range_m, s.power_db):
            fh.write(f"{_fmt(f)},{_fmt(r)},{_fmt(p)}\n")
    return path


def write_improvement_csv(path, curve: ImprovementCurve) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("range_m,delta_db,fitted_delta_db,excluded\n")
        for r, d, f, e in zip(curve.range_m, curve.delta_db, curve.fitted_delta_db, curve.excluded):
            d_s = "" if np.isnan(d) else _fmt(d)
            f_s = "" if e else _fmt(f)
            fh.write(f"{_fmt(r)},{d_s},{f_s},{int(e)}\n")
    return path
