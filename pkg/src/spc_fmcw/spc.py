"""Leakage parameter extraction, digital NCO and the two final down-conversions.

The SPC path mixes the IF frame with an NCO running at the measured leakage
IF frequency and constant phase, which parks the leakage (and its phase
noise) on the stationary point of the cosine at DC.  The common path mixes
with the nominal IF carrier at zero phase.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import InvalidEstimateError, InvalidFilterError, InvalidWindowError, NoPeakError
from .scenario import IFFrame, fold_frequency, phase_cycles, wrap_phase

DEFAULT_NFFT = 2 ** 20
DEFAULT_SEARCH_HALFWIDTH_HZ = 100e3


@dataclass(frozen=True)
class FilterSpec:
    """Linear-phase equiripple low-pass used before decimation."""

    passband_hz: float = 1.3e6
    stopband_hz: float = 3.5e6
    attenuation_db: float = 80.0
    ripple_db: float = 0.01

    def __post_init__(self):
        if not 0 < self.passband_hz < self.stopband_hz:
            raise ValueError("need 0 < passband_hz < stopband_hz")
        if self.attenuation_db <= 0 or self.ripple_db <= 0:
            raise ValueError("attenuation_db and ripple_db must be > 0")


@functools.lru_cache(maxsize=32)
def _design(spec: FilterSpec, fs_hz: float, step: int) -> np.ndarray:
    if spec.stopband_hz >= fs_hz / 2:
        raise InvalidFilterError(f"stopband edge {spec.stopband_hz:g} Hz is beyond Nyquist {fs_hz / 2:g} Hz")
    delta_p = (10 ** (spec.ripple_db / 20) - 1) / (10 ** (spec.ripple_db / 20) + 1)
    delta_s = 10 ** (-spec.attenuation_db / 20)
    width = (spec.stopband_hz - spec.passband_hz) / fs_hz
    numtaps, _ = signal.kaiserord(spec.attenuation_db, 2 * width)
    # numtaps = 1 + 2*step*m keeps the group delay an integer number of output samples.
    m = max(1, math.ceil((numtaps - 1) / (2 * step)))
    grid = np.linspace(spec.stopband_hz, fs_hz / 2, 2048)
    for _ in range(200):
        numtaps = 1 + 2 * step * m
        try:
            h = signal.remez(
                numtaps, [0, spec.passband_hz, spec.stopband_hz, fs_hz / 2], [1, 0],
                weight=[1, delta_p / delta_s], fs=fs_hz, maxiter=100,
            )
        except ValueError:
            m += 1
            continue
        h = h / h.sum()
        _, resp = signal.freqz(h, worN=grid, fs=fs_hz)
        _, pass_resp = signal.freqz(h, worN=np.linspace(0, spec.passband_hz, 512), fs=fs_hz)
        ripple = 20 * np.log10(np.max(np.abs(pass_resp)) / np.min(np.abs(pass_resp)))
        if np.max(np.abs(resp)) <= delta_s and ripple <= 2 * spec.ripple_db:
            h.setflags(write=False)
            return h
        m += 1
    raise InvalidFilterError(f"could not meet {spec} at fs={fs_hz:g}")


def design_lowpass(spec: FilterSpec, fs_hz: float, decimate: int = 1) -> np.ndarray:
    """Equiripple FIR taps meeting ``spec``, normalized to unit DC gain.

    The tap count is odd and ``(numtaps - 1) / 2`` is a multiple of
    ``decimate``.
    """
    return _design(spec, float(fs_hz), int(decimate))


@dataclass(frozen=True)
class LeakageEstimate:
    """Measured leakage IF frequency and constant phase.

    ``peak_bin`` is zero-based; the one-based index k of the formula
    f = fs*(k-1)/NFFT is ``peak_bin + 1``.
    """

    f_if_beat_leakage_hz: float
    theta_if_leakage_rad: float
    peak_bin: int
    peak_power_db: float
    nfft_used: int
    fs_hz: float

    def to_dict(self) -> dict:
        return {
            "f_if_beat_leakage_hz": round(self.f_if_beat_leakage_hz, 2),
            "theta_if_leakage_rad": round(self.theta_if_leakage_rad, 6),
            "peak_bin": self.peak_bin,
            "peak_power_db": round(self.peak_power_db, 6),
            "nfft_used": self.nfft_used,
        }


def bin_frequency(k: int, fs_hz: float, nfft: int) -> float:
    """Frequency of one-based FFT bin ``k``."""
    return fs_hz * (k - 1) / nfft


def default_search_window(fs_hz: float, halfwidth_hz: float = DEFAULT_SEARCH_HALFWIDTH_HZ):
    return (fs_hz / 4 - halfwidth_hz, fs_hz / 4 + halfwidth_hz)


def get_window(name: str, n: int) -> np.ndarray:
    """Periodic (DFT-even) window of length ``n``."""
    name = name.lower()
    if name in ("rect", "rectangular", "none"):
        name = "boxcar"
    return signal.get_window(name, n, fftbins=True)


def estimate_leakage(
    frame: IFFrame,
    nfft: int = DEFAULT_NFFT,
    window: str = "hann",
    search_window_hz: tuple[float, float] | None = None,
) -> LeakageEstimate:
    """Locate the strongest tone inside the search window of a zero-padded FFT.

    Returns its frequency on the fs/nfft grid and the spectrum phase at that
    bin.  Ties resolve to the lowest bin.
    """
    x = frame.samples
    fs = frame.fs_hz
    if nfft < x.size:
        raise ValueError(f"nfft {nfft} is shorter than the frame ({x.size})")
    lo, hi = search_window_hz if search_window_hz is not None else default_search_window(fs)
    lo, hi = max(lo, 0.0), min(hi, fs / 2)
    k_lo = math.ceil(lo * nfft / fs)
    k_hi = math.floor(hi * nfft / fs)
    if k_hi < k_lo:
        raise InvalidWindowError(f"search window ({lo:g}, {hi:g}) Hz holds no bins")
    if not np.any(x):
        raise NoPeakError("frame is all zeros")

    spec = np.fft.rfft(x * get_window(window, x.size), nfft)
    power = spec[k_lo:k_hi + 1].real ** 2 + spec[k_lo:k_hi + 1].imag ** 2
    k = k_lo + int(np.argmax(power))
    peak = spec[k]
    if peak == 0:
        raise NoPeakError("no energy inside the search window")
    return LeakageEstimate(
        f_if_beat_leakage_hz=bin_frequency(k + 1, fs, nfft),
        theta_if_leakage_rad=wrap_phase(float(np.angle(peak))),
        peak_bin=k,
        peak_power_db=float(10 * np.log10(abs(peak) ** 2)),
        nfft_used=nfft,
        fs_hz=fs,
    )


@dataclass(frozen=True)
class NcoParams:
    frequency_hz: float
    phase_rad: float
    fs_hz: float
    length: int

    def __post_init__(self):
        if not 0 <= self.frequency_hz < self.fs_hz / 2:
            raise InvalidEstimateError(
                f"NCO frequency {self.frequency_hz:g} Hz outside [0, {self.fs_hz / 2:g})"
            )
        if self.length < 0:
            raise ValueError("length must be >= 0")


def make_nco(params: NcoParams) -> np.ndarray:
    """Unit-amplitude cos(2*pi*f*n/fs + theta), n = 0..length-1."""
    n = np.arange(params.length)
    return np.cos(2.0 * np.pi * phase_cycles(params.frequency_hz, n, params.fs_hz) + params.phase_rad)


@dataclass(frozen=True, eq=False)
class BasebandFrame:
    """Down-converted, filtered and decimated chirp.

    ``group_delay_samples`` is the FIR latency in output samples.
    """

    samples: np.ndarray
    fs_hz: float
    method: str
    group_delay_samples: int
    decimate: int = 1
    chirp_index: int = 0

    def __len__(self):
        return self.samples.size


def _downconvert(frame: IFFrame, nco: np.ndarray, lpf: FilterSpec, decimate: int, method: str) -> BasebandFrame:
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    taps = design_lowpass(lpf, frame.fs_hz, decimate)
    mixed = frame.samples * nco
    filtered = signal.lfilter(taps, 1.0, mixed)
    gd = (taps.size - 1) // 2
    return BasebandFrame(
        samples=filtered[::decimate],
        fs_hz=frame.fs_hz / decimate,
        method=method,
        group_delay_samples=gd // decimate,
        decimate=decimate,
        chirp_index=frame.chirp_index,
    )


def spc_downconvert(
    frame: IFFrame, est: LeakageEstimate, lpf: FilterSpec = FilterSpec(), decimate: int = 4
) -> BasebandFrame:
    """Mix with the leakage-matched NCO, low-pass and decimate."""
    params = NcoParams(est.f_if_beat_leakage_hz, est.theta_if_leakage_rad, frame.fs_hz, len(frame))
    return _downconvert(frame, make_nco(params), lpf, decimate, "spc")


def common_downconvert(
    frame: IFFrame, f_if_carrier_hz: float, lpf: FilterSpec = FilterSpec(), decimate: int = 4
) -> BasebandFrame:
    """Mix with the nominal IF carrier at zero phase, low-pass and decimate.

    Undersampled carriers are folded into the first Nyquist zone first.
    """
    f = fold_frequency(f_if_carrier_hz, frame.fs_hz)
    params = NcoParams(f, 0.0, frame.fs_hz, len(frame))
    return _downconvert(frame, make_nco(params), lpf, decimate, "common")
