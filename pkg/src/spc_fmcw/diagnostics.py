"""Time-domain view of where phase noise turns into voltage noise on a tone."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidFrequencyError
from .phase_noise import PsdProfile, synthesize_noise
from .scenario import phase_cycles, subseed

SMALL_ANGLE_RMS_RAD = 0.1


@dataclass(frozen=True, eq=False)
class PhaseBucketStats:
    """Mean |voltage noise| binned by the ideal instantaneous phase."""

    bucket_centers_rad: np.ndarray
    mean_abs_noise_v: np.ndarray
    n_samples: np.ndarray
    rms_phase_rad: float = 0.0

    def nearest(self, phase_rad: float) -> int:
        d = np.angle(np.exp(1j * (self.bucket_centers_rad - phase_rad)))
        return int(np.argmin(np.abs(d)))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(csv_text(self))
        return path


def csv_text(stats: PhaseBucketStats) -> str:
    lines = ["bucket_center_rad,mean_abs_noise_v,n"]
    for c, m, n in zip(stats.bucket_centers_rad, stats.mean_abs_noise_v, stats.n_samples):
        lines.append(f"{c:.10g},{m:.10g},{int(n)}")
    return "\n".join(lines) + "\n"


def stationary_point_demo(
    profile: PsdProfile,
    f0_hz: float = 10e3,
    amplitude: float = 1.0,
    fs_hz: float = 10e6,
    n: int = 10_000,
    n_trials: int = 1000,
    seed: int = 0,
    n_buckets: int = 64,
) -> PhaseBucketStats:
    """Subtract an ideal tone from its phase-noisy twin and bucket |difference|.

    Buckets partition [0, 2*pi) of the ideal tone's phase; sums are pooled
    over all trials before dividing by the bucket counts.
    """
    if not 0 < f0_hz < fs_hz / 2:
        raise InvalidFrequencyError(f"f0 {f0_hz:g} Hz must lie in (0, {fs_hz / 2:g}) Hz")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")

    phase = 2.0 * np.pi * phase_cycles(f0_hz, np.arange(n), fs_hz)
    ideal = amplitude * np.cos(phase)
    bucket = np.minimum((phase / (2.0 * np.pi) * n_buckets).astype(int), n_buckets - 1)
    counts = np.bincount(bucket, minlength=n_buckets)

    sums = np.zeros(n_buckets)
    sq = 0.0
    for trial in range(n_trials):
        phi = synthesize_noise(profile, n, fs_hz, subseed(seed, trial)).samples
        sq += float(np.mean(phi ** 2))
        noise = amplitude * np.cos(phase + phi) - ideal
        sums += np.bincount(bucket, weights=np.abs(noise), minlength=n_buckets)

    rms = float(np.sqrt(sq / n_trials))
    if rms >= SMALL_ANGLE_RMS_RAD:
        warnings.warn(
            f"RMS phase {rms:.3f} rad is outside the first-order regime (< {SMALL_ANGLE_RMS_RAD} rad)",
            stacklevel=2,
        )
    total = counts * n_trials
    with np.errstate(invalid="ignore"):
        mean = np.where(total > 0, sums / np.maximum(total, 1), 0.0)
    centers = (np.arange(n_buckets) + 0.5) * 2.0 * np.pi / n_buckets
    return PhaseBucketStats(centers, mean, total, rms)
