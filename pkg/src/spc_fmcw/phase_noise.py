"""Phase-noise synthesis and composition of the IF-domain noise processes.

Phase noise is specified as a single-sideband profile L(f) in dBc/Hz.  The
corresponding one-sided phase PSD is S_phi(f) = 2 * 10**(L/10) rad^2/Hz, so
the variance of a realization is the integral of S_phi over the one-sided
band.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import signal

from .errors import (
    DelayTooLargeError,
    InvalidProfileError,
    InvalidSegmentError,
    InvalidSizeError,
)

# Levels at or below this are treated as exactly zero power.
ZERO_LEVEL_DBC = -300.0
# Floor applied when converting an estimated PSD back to dB.
PSD_FLOOR_DB = -400.0


@dataclass(frozen=True)
class PsdProfile:
    """Piecewise SSB phase-noise profile, linear in (log10 f, dB).

    Outside the covered offsets the nearest endpoint level is used.
    """

    offsets_hz: tuple[float, ...]
    levels_dbc_hz: tuple[float, ...]

    def __post_init__(self):
        offsets = tuple(float(f) for f in self.offsets_hz)
        levels = tuple(float(v) for v in self.levels_dbc_hz)
        object.__setattr__(self, "offsets_hz", offsets)
        object.__setattr__(self, "levels_dbc_hz", levels)
        if len(offsets) != len(levels):
            raise InvalidProfileError("offsets and levels differ in length")
        if len(offsets) < 2:
            raise InvalidProfileError("a profile needs at least 2 points")
        if not all(math.isfinite(f) and f > 0 for f in offsets):
            raise InvalidProfileError("offsets must be finite and > 0 Hz")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise InvalidProfileError("offsets must be strictly increasing")
        if not all(math.isfinite(v) for v in levels):
            raise InvalidProfileError("profile levels must be finite")

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]]) -> "PsdProfile":
        pts = list(points)
        return cls(tuple(p[0] for p in pts), tuple(p[1] for p in pts))

    @classmethod
    def flat(cls, level_dbc_hz: float, f_lo: float = 1.0, f_hi: float = 1e9) -> "PsdProfile":
        return cls((f_lo, f_hi), (level_dbc_hz, level_dbc_hz))

    @classmethod
    def from_csv(cls, path) -> "PsdProfile":
        """Load ``offset_hz,level_dbc_hz`` rows; a header line is required."""
        path = Path(path)
        with path.open(newline="") as fh:
            rows = [
                row for row in csv.reader(fh)
                if row and not row[0].lstrip().startswith("#")
            ]
        if not rows:
            raise InvalidProfileError(f"{path}: empty profile file")
        header = [c.strip() for c in rows[0]]
        if header[:2] != ["offset_hz", "level_dbc_hz"]:
            raise InvalidProfileError(
                f"{path}: expected header 'offset_hz,level_dbc_hz', got {','.join(header)!r}"
            )
        points = []
        for lineno, row in enumerate(rows[1:], start=2):
            try:
                points.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise InvalidProfileError(f"{path}: bad row {lineno}: {row!r}") from exc
        return cls.from_points(points)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            fh.write("offset_hz,level_dbc_hz\n")
            for f, v in zip(self.offsets_hz, self.levels_dbc_hz):
                fh.write(f"{f:.10g},{v:.10g}\n")

    def shifted(self, delta_db: float) -> "PsdProfile":
        return PsdProfile(self.offsets_hz, tuple(v + delta_db for v in self.levels_dbc_hz))

    def level_at(self, freqs_hz) -> np.ndarray:
        """SSB level in dBc/Hz at the given offsets (clamped outside the range)."""
        f = np.asarray(freqs_hz, dtype=float)
        logf = np.log10(np.clip(f, self.offsets_hz[0], self.offsets_hz[-1]))
        return np.interp(logf, np.log10(self.offsets_hz), self.levels_dbc_hz)

    def phase_psd(self, freqs_hz) -> np.ndarray:
        """One-sided phase PSD S_phi(f) in rad^2/Hz (both sidebands counted)."""
        level = self.level_at(freqs_hz)
        out = 2.0 * 10.0 ** (level / 10.0)
        return np.where(level <= ZERO_LEVEL_DBC, 0.0, out)


# Configuration default, not a measured curve: a PLL-style LO with a gentle
# in-loop slope and a far-out floor near -104 dBc/Hz.
DEFAULT_LO_PROFILE = PsdProfile(
    (1e3, 1e4, 1e5, 3e5, 1e6, 2e6, 5e6),
    (-87.0, -89.0, -92.0, -94.0, -97.0, -101.0, -104.0),
)

# The reference chirp sits this far below each RF-stage LO by default.
DEFAULT_LFM_MARGIN_DB = 20.0

ZERO_PROFILE = PsdProfile((1.0, 1e9), (ZERO_LEVEL_DBC, ZERO_LEVEL_DBC))


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """Phase samples in radians at rate ``fs``.

    ``head_samples`` counts leading samples whose delayed index fell before
    the start of the record and were evaluated against sample 0.
    """

    samples: np.ndarray
    fs: float
    seed: int | None = None
    head_samples: int = 0

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise InvalidSizeError("a realization needs at least one sample")
        if not self.fs > 0:
            raise InvalidSizeError("fs must be > 0")
        if not np.all(np.isfinite(x)):
            raise ValueError("realization contains non-finite samples")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))


@dataclass(frozen=True, eq=False)
class PhaseNoiseSet:
    """The three independent oscillator noises feeding the IF beat signals.

    ``tx_lo_delay_s`` is the TX-path plus RX-path delay seen by the TX RF LO
    noise; ``rx_lo_delay_s`` is the RX-path delay seen by the RX RF LO noise.
    """

    lfm: NoiseRealization
    tx_lo: NoiseRealization
    rx_lo: NoiseRealization
    tx_lo_delay_s: float = 0.0
    rx_lo_delay_s: float = 0.0

    def __post_init__(self):
        n = {len(self.lfm), len(self.tx_lo), len(self.rx_lo)}
        fs = {self.lfm.fs, self.tx_lo.fs, self.rx_lo.fs}
        if len(n) != 1 or len(fs) != 1:
            raise InvalidSizeError("noise realizations must share fs and length")
        if self.tx_lo_delay_s < 0 or self.rx_lo_delay_s < 0:
            raise ValueError("LO delays must be >= 0")

    @property
    def fs(self) -> float:
        return self.lfm.fs

    def __len__(self):
        return len(self.lfm)


def synthesize_noise(profile: PsdProfile, n: int, fs: float, seed: int) -> NoiseRealization:
    """Draw a Gaussian phase-noise realization shaped to ``profile``.

    Independent complex Gaussians per positive-frequency bin are scaled by
    sqrt(S_phi(f) * df) and inverse transformed.  DC and Nyquist are zeroed.
    """
    if n < 2:
        raise InvalidSizeError(f"n must be >= 2, got {n}")
    if not fs > 0:
        raise InvalidSizeError(f"fs must be > 0, got {fs}")
    if not all(math.isfinite(v) for v in profile.levels_dbc_hz):
        raise InvalidProfileError("profile levels must be finite")

    rng = np.random.default_rng(seed)
    nbins = n // 2 + 1
    df = fs / n
    freqs = np.arange(nbins) * df
    # E|X_k|^2 = n^2 * S * df / 2 gives var(x) = sum_k S(f_k) df.
    scale = n * np.sqrt(profile.phase_psd(freqs) * df / 4.0)
    spec = scale * (rng.standard_normal(nbins) + 1j * rng.standard_normal(nbins))
    spec[0] = 0.0
    if n % 2 == 0:
        spec[-1] = 0.0
    x = np.fft.irfft(spec, n)
    return NoiseRealization(x, fs, seed)


def _delayed(x: np.ndarray, d: int) -> np.ndarray:
    """x[k - d], with negative indices evaluated against x[0]."""
    if d == 0:
        return x
    idx = np.arange(x.size) - d
    return x[np.maximum(idx, 0)]


def _delay_samples(delay_s: float, fs: float, n: int) -> int:
    if delay_s < 0:
        raise ValueError(f"delay must be >= 0, got {delay_s}")
    d = int(round(delay_s * fs))
    if d > n:
        raise DelayTooLargeError(
            f"delay {delay_s:g} s is {d} samples, realization has only {n}"
        )
    return d


def delayed_difference(noise: NoiseRealization, delay_s: float) -> NoiseRealization:
    """phi(t) - phi(t - delay), delay rounded to whole samples."""
    x = noise.samples
    d = _delay_samples(delay_s, noise.fs, x.size)
    return NoiseRealization(x - _delayed(x, d), noise.fs, noise.seed, head_samples=min(d, x.size))


def compose_if_noise(
    noise_set: PhaseNoiseSet, tau_int_s: float, tau_extra_s: float = 0.0
) -> NoiseRealization:
    """Phase noise riding on an IF beat signal.

    ``tau_extra_s = 0`` gives the leakage term; the round-trip delay of a
    target gives that target's term.
    """
    fs = noise_set.fs
    n = len(noise_set)
    d_lfm = _delay_samples(tau_int_s + tau_extra_s, fs, n)
    d_tx = _delay_samples(noise_set.tx_lo_delay_s + tau_extra_s, fs, n)
    d_rx = _delay_samples(noise_set.rx_lo_delay_s + tau_extra_s, fs, n)
    s = noise_set.lfm.samples
    out = (
        s - _delayed(s, d_lfm)
        - _delayed(noise_set.tx_lo.samples, d_tx)
        + _delayed(noise_set.rx_lo.samples, d_rx)
    )
    return NoiseRealization(out, fs, noise_set.lfm.seed, head_samples=min(max(d_lfm, d_tx, d_rx), n))


@dataclass(frozen=True, eq=False)
class PsdEstimate:
    """Averaged-periodogram estimate: SSB level in dBc/Hz per frequency."""

    freqs_hz: np.ndarray
    level_dbc_hz: np.ndarray
    segment: int
    fs: float

    @property
    def bin_hz(self) -> float:
        return self.fs / self.segment

    def phase_psd(self) -> np.ndarray:
        """One-sided S_phi in rad^2/Hz; floored bins map to zero."""
        lin = 2.0 * 10.0 ** (self.level_dbc_hz / 10.0)
        return np.where(self.level_dbc_hz <= PSD_FLOOR_DB, 0.0, lin)

    def integrated_power(self, f_lo: float, f_hi: float) -> float:
        sel = (self.freqs_hz >= f_lo) & (self.freqs_hz <= f_hi)
        return float(np.sum(self.phase_psd()[sel]) * self.bin_hz)

    def level_at(self, freqs_hz) -> np.ndarray:
        return np.interp(freqs_hz, self.freqs_hz, self.level_dbc_hz)


def estimate_psd(noise: NoiseRealization | np.ndarray, segment: int, fs: float | None = None) -> PsdEstimate:
    """Welch estimate (Hann, 50% overlap) of a phase record, in dBc/Hz."""
    if isinstance(noise, NoiseRealization):
        x, fs = noise.samples, noise.fs
    else:
        x = np.asarray(noise, dtype=float)
        if fs is None:
            raise ValueError("fs is required for raw arrays")
    if segment < 2 or segment > x.size:
        raise InvalidSegmentError(f"segment {segment} not in [2, {x.size}]")
    freqs, pxx = signal.welch(
        x, fs=fs, window="hann", nperseg=segment, noverlap=segment // 2,
        detrend=False, scaling="density",
    )
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(pxx / 2.0)
    level = np.maximum(np.nan_to_num(level, nan=PSD_FLOOR_DB, neginf=PSD_FLOOR_DB), PSD_FLOOR_DB)
    return PsdEstimate(freqs, level, segment, float(fs))


def mean_psd(estimates: Sequence[PsdEstimate]) -> PsdEstimate:
    """Average several estimates in linear power."""
    lin = np.mean([e.phase_psd() for e in estimates], axis=0)
    with np.errstate(divide="ignore"):
        level = np.maximum(10.0 * np.log10(lin / 2.0), PSD_FLOOR_DB)
    first = estimates[0]
    return PsdEstimate(first.freqs_hz, level, first.segment, first.fs)


@dataclass(frozen=True, eq=False)
class RoundTripResult:
    """Profile points next to the mean estimated level at the same offsets."""

    offsets_hz: np.ndarray
    target_dbc_hz: np.ndarray
    estimated_dbc_hz: np.ndarray
    in_band: np.ndarray
    tolerance_db: float

    @property
    def error_db(self) -> np.ndarray:
        return self.estimated_dbc_hz - self.target_dbc_hz

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.error_db[self.in_band]) <= self.tolerance_db))

    @property
    def worst_error_db(self) -> float:
        err = np.abs(self.error_db[self.in_band])
        return float(err.max()) if err.size else 0.0


def round_trip(
    profile: PsdProfile,
    n: int,
    fs: float,
    segment: int,
    seeds: Iterable[int],
    tolerance_db: float = 2.0,
    min_bins: int = 4,
) -> RoundTripResult:
    """Synthesize one realization per seed and compare the mean estimate to ``profile``.

    Points below ``min_bins`` estimator bins or above 0.9 * fs/2 are
    reported but not judged, since the Hann window smears them.
    """
    est = mean_psd([estimate_psd(synthesize_noise(profile, n, fs, s), segment) for s in seeds])
    f = np.asarray(profile.offsets_hz)
    target = np.asarray(profile.levels_dbc_hz)
    in_band = (f >= min_bins * fs / segment) & (f <= 0.45 * fs) & (target > ZERO_LEVEL_DBC)
    return RoundTripResult(f, target, est.level_at(f), in_band, tolerance_db)
