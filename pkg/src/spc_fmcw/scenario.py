"""Scenario definitions and direct synthesis of the oversampled IF beat signal."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InsufficientNoiseError
from .phase_noise import (
    DEFAULT_LFM_MARGIN_DB,
    DEFAULT_LO_PROFILE,
    NoiseRealization,
    PhaseNoiseSet,
    PsdProfile,
    compose_if_noise,
    synthesize_noise,
)

# Propagation speed used for every range <-> delay conversion.  The round
# value reproduces the nominal 1100 m / 1.25 MHz and 1.074 m figures exactly.
SPEED_OF_LIGHT = 3.0e8

# Stream identifiers for per-chirp seed splitting.
_STREAM_LFM, _STREAM_TX_LO, _STREAM_RX_LO, _STREAM_WHITE = range(4)


def wrap_phase(x: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(x, 2.0 * math.pi)
    return math.pi if r <= -math.pi else r


def subseed(seed: int, *keys: int) -> int:
    """Counter-based child seed for (seed, keys...), independent of call order."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    hi, lo = ss.generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


def phase_cycles(freq_hz: float, n: np.ndarray, fs_hz: float) -> np.ndarray:
    """Fractional cycles of freq*n/fs, reduced to [0, 1) in extended precision."""
    cyc = np.longdouble(freq_hz) * np.asarray(n, dtype=np.longdouble) / np.longdouble(fs_hz)
    return np.mod(cyc, np.longdouble(1)).astype(float)


def range_to_delay(range_m: float) -> float:
    return 2.0 * range_m / SPEED_OF_LIGHT


def beat_to_range(f_beat_hz, alpha: float):
    return SPEED_OF_LIGHT * np.asarray(f_beat_hz) / (2.0 * alpha)


@dataclass(frozen=True)
class ChirpGeometry:
    sweep_bandwidth_hz: float
    sweep_period_s: float
    f_if_carrier_hz: float
    base_fs_hz: float
    oversample_q: Fraction
    samples_kept: int
    f_tx_below_f_rx: bool = False
    max_range_m: float = 1100.0
    slope_hz_per_s: float = field(init=False)

    def __post_init__(self):
        q = Fraction(self.oversample_q).limit_denominator(10_000)
        object.__setattr__(self, "oversample_q", q)
        for name in ("sweep_bandwidth_hz", "sweep_period_s", "base_fs_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.f_if_carrier_hz < 0:
            raise ValueError("f_if_carrier_hz must be >= 0")
        if q < 1:
            raise ValueError("oversample_q must be >= 1")
        object.__setattr__(self, "slope_hz_per_s", self.sweep_bandwidth_hz / self.sweep_period_s)
        if not 0 < self.samples_kept <= self.samples_per_chirp:
            raise ValueError(
                f"samples_kept must be in [1, {self.samples_per_chirp}], got {self.samples_kept}"
            )

    @property
    def fs_hz(self) -> float:
        """Oversampled ADC rate Q * F_S."""
        return float(self.oversample_q * Fraction(self.base_fs_hz))

    @property
    def samples_per_chirp(self) -> int:
        return int(round(self.sweep_period_s * self.fs_hz))

    @property
    def samples_discarded(self) -> int:
        return self.samples_per_chirp - self.samples_kept

    @property
    def desired_bandwidth_hz(self) -> float:
        return self.base_fs_hz / 2.0

    @property
    def beat_sign(self) -> float:
        return -1.0 if self.f_tx_below_f_rx else 1.0

    @property
    def digital_if_carrier_hz(self) -> float:
        """IF carrier as it appears after sampling (folded into [0, fs/2])."""
        return fold_frequency(self.f_if_carrier_hz, self.fs_hz)


def fold_frequency(f_hz: float, fs_hz: float) -> float:
    """Alias a real-signal frequency into the first Nyquist zone [0, fs/2]."""
    r = math.fmod(f_hz, fs_hz)
    if r < 0:
        r += fs_hz
    return fs_hz - r if r > fs_hz / 2 else r


def table1_geometry(**overrides) -> ChirpGeometry:
    """Chirp geometry of the reference Ku-band heterodyne radar."""
    params = dict(
        sweep_bandwidth_hz=150e6,
        sweep_period_s=880e-6,
        f_if_carrier_hz=2.5e6,
        base_fs_hz=2.5e6,
        oversample_q=Fraction(4),
        samples_kept=8192,
    )
    params.update(overrides)
    return ChirpGeometry(**params)


@dataclass(frozen=True)
class LeakageSpec:
    """Dominant leakage at the IF port; ``amplitude_v`` is the mixed product.

    ``theta_if_rad = None`` derives the constant phase from the RF constants.
    """

    amplitude_v: float
    tau_int_s: float
    theta_if_rad: float | None = 0.0

    def __post_init__(self):
        if self.amplitude_v < 0:
            raise ValueError("leakage amplitude must be >= 0")
        if self.tau_int_s < 0:
            raise ValueError("tau_int_s must be >= 0")


@dataclass(frozen=True)
class TargetSpec:
    amplitude_v: float
    range_m: float
    theta_if_rad: float | None = 0.0

    def __post_init__(self):
        if not self.amplitude_v > 0:
            raise ValueError("target amplitude must be > 0")
        if self.range_m < 0:
            raise ValueError("target range must be >= 0")

    @property
    def tau_s(self) -> float:
        return range_to_delay(self.range_m)


@dataclass(frozen=True)
class NoiseSpec:
    """Phase-noise sources plus an optional additive white floor.

    ``white_noise_dbfs_hz`` is the one-sided PSD of the additive noise in dB
    re 1 V^2/Hz; ``None`` disables it.  Path delays default to half of the
    internal delay each.
    """

    phase_noise: bool = True
    lo_profile: PsdProfile = DEFAULT_LO_PROFILE
    lfm_profile: PsdProfile | None = None
    lfm_margin_db: float = DEFAULT_LFM_MARGIN_DB
    lfm_enabled: bool = True
    tx_lo_enabled: bool = True
    rx_lo_enabled: bool = True
    white_noise_dbfs_hz: float | None = None
    tau_tx_path_s: float | None = None
    tau_rx_path_s: float | None = None

    @property
    def effective_lfm_profile(self) -> PsdProfile:
        if self.lfm_profile is not None:
            return self.lfm_profile
        return self.lo_profile.shifted(-self.lfm_margin_db)


@dataclass(frozen=True)
class RFConstants:
    f_rx_hz: float
    theta_s_rad: float = 0.0
    theta_r_rad: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: ChirpGeometry
    leakage: LeakageSpec
    targets: tuple[TargetSpec, ...] = ()
    noise: NoiseSpec = NoiseSpec()
    rf: RFConstants | None = None
    n_chirps: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.n_chirps < 1:
            raise ValueError("n_chirps must be >= 1")
        needs_rf = self.leakage.theta_if_rad is None or any(
            t.theta_if_rad is None for t in self.targets
        )
        if needs_rf and self.rf is None:
            raise ValueError("derived IF phases need RF constants (rf)")

    @property
    def alpha(self) -> float:
        return self.geometry.slope_hz_per_s

    @property
    def f_beat_leakage_hz(self) -> float:
        return self.alpha * self.leakage.tau_int_s

    @property
    def f_if_beat_leakage_hz(self) -> float:
        """Leakage IF frequency in the sampled domain."""
        g = self.geometry
        return g.digital_if_carrier_hz + g.beat_sign * self.f_beat_leakage_hz

    def target_beat_hz(self, target: TargetSpec) -> float:
        return self.alpha * target.tau_s

    def leakage_phase(self) -> float:
        if self.leakage.theta_if_rad is not None:
            return self.leakage.theta_if_rad
        return derive_if_constants(
            self.rf.f_rx_hz, self.alpha, self.leakage.tau_int_s, 0.0,
            self.rf.theta_s_rad, self.rf.theta_r_rad,
        )[1]

    def frame_leakage_phase(self) -> float:
        """Leakage phase at the first kept sample, the estimator's time origin."""
        g = self.geometry
        cycles = phase_cycles(self.f_if_beat_leakage_hz, np.array([g.samples_discarded]), g.fs_hz)[0]
        return wrap_phase(self.leakage_phase() + 2.0 * math.pi * float(cycles))

    def target_phase(self, target: TargetSpec) -> float:
        if target.theta_if_rad is not None:
            return target.theta_if_rad
        return derive_if_constants(
            self.rf.f_rx_hz, self.alpha, self.leakage.tau_int_s, target.tau_s,
            self.rf.theta_s_rad, self.rf.theta_r_rad,
        )[1]

    def path_delays(self) -> tuple[float, float]:
        """(tau_TX path, tau_RX path)."""
        half = self.leakage.tau_int_s / 2.0
        tx = self.noise.tau_tx_path_s if self.noise.tau_tx_path_s is not None else half
        rx = self.noise.tau_rx_path_s if self.noise.tau_rx_path_s is not None else half
        return tx, rx


def derive_if_constants(
    f_rx_hz: float,
    alpha: float,
    tau_int_s: float,
    tau_t_s: float,
    theta_s_rad: float,
    theta_r_rad: float,
) -> tuple[float, float]:
    """IF beat offset and constant phase of a beat signal.

    Returns ``(alpha*tau, wrap(theta_s + 2*pi*f_rx*tau - pi*alpha*tau**2 - theta_r))``
    with ``tau = tau_int + tau_t``.
    """
    vals = (f_rx_hz, alpha, tau_int_s, tau_t_s, theta_s_rad, theta_r_rad)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("inputs must be finite")
    if tau_int_s < 0 or tau_t_s < 0:
        raise ValueError("delays must be >= 0")
    tau = tau_int_s + tau_t_s
    # Reduce the large carrier term to a fractional cycle before scaling by 2*pi.
    carrier_cycles = math.fmod(f_rx_hz * tau, 1.0)
    chirp_cycles = math.fmod(0.5 * alpha * tau * tau, 1.0)
    theta = theta_s_rad - theta_r_rad + 2.0 * math.pi * (carrier_cycles - chirp_cycles)
    return alpha * tau, wrap_phase(theta)


@dataclass(frozen=True, eq=False)
class IFFrame:
    samples: np.ndarray
    fs_hz: float
    chirp_index: int
    geometry: ChirpGeometry | None = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("IF frame contains non-finite samples")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    def __add__(self, other: "IFFrame") -> "IFFrame":
        return IFFrame(self.samples + other.samples, self.fs_hz, self.chirp_index, self.geometry)


def draw_noise_set(config: ScenarioConfig, chirp_index: int) -> PhaseNoiseSet:
    """Independent oscillator noises for one chirp, seeded from (seed, chirp)."""
    g = config.geometry
    n, fs = g.samples_per_chirp, g.fs_hz
    ns = config.noise

    def draw(profile, enabled, stream):
        seed = subseed(config.seed, chirp_index, stream)
        if not enabled:
            return NoiseRealization(np.zeros(n), fs, seed)
        return synthesize_noise(profile, n, fs, seed)

    tx_path, rx_path = config.path_delays()
    return PhaseNoiseSet(
        lfm=draw(ns.effective_lfm_profile, ns.lfm_enabled, _STREAM_LFM),
        tx_lo=draw(ns.lo_profile, ns.tx_lo_enabled, _STREAM_TX_LO),
        rx_lo=draw(ns.lo_profile, ns.rx_lo_enabled, _STREAM_RX_LO),
        tx_lo_delay_s=tx_path + rx_path,
        rx_lo_delay_s=rx_path,
    )


def synthesize_chirp(
    config: ScenarioConfig, chirp_index: int, noise_set: PhaseNoiseSet | None = None
) -> np.ndarray:
    """All ``samples_per_chirp`` IF samples of one chirp, before discarding."""
    g = config.geometry
    n_total = g.samples_per_chirp
    fs = g.fs_hz
    if noise_set is not None:
        if len(noise_set) < n_total:
            raise InsufficientNoiseError(
                f"noise realizations have {len(noise_set)} samples, chirp needs {n_total}"
            )
        if noise_set.fs != fs:
            raise ValueError(f"noise fs {noise_set.fs} differs from IF rate {fs}")
    n = np.arange(n_total)
    tau_int = config.leakage.tau_int_s

    def tone(amplitude, freq, theta, tau_extra):
        arg = 2.0 * np.pi * phase_cycles(freq, n, fs) + theta
        if noise_set is not None:
            arg = arg + compose_if_noise(noise_set, tau_int, tau_extra).samples[:n_total]
        return amplitude * np.cos(arg)

    f_leak = config.f_if_beat_leakage_hz
    x = np.zeros(n_total)
    if config.leakage.amplitude_v > 0:
        x += tone(config.leakage.amplitude_v, f_leak, config.leakage_phase(), 0.0)
    for t in config.targets:
        f_t = f_leak + g.beat_sign * config.target_beat_hz(t)
        x += tone(t.amplitude_v, f_t, config.target_phase(t), t.tau_s)

    white = config.noise.white_noise_dbfs_hz
    if white is not None:
        rng = np.random.default_rng(subseed(config.seed, chirp_index, _STREAM_WHITE))
        sigma = math.sqrt(10.0 ** (white / 10.0) * fs / 2.0)
        x += sigma * rng.standard_normal(n_total)
    return x


def synthesize_if_frame(
    config: ScenarioConfig, chirp_index: int = 0, noise_set: PhaseNoiseSet | None = None
) -> IFFrame:
    """Kept IF samples of one chirp (the early part is discarded)."""
    x = synthesize_chirp(config, chirp_index, noise_set)
    g = config.geometry
    return IFFrame(x[g.samples_discarded:], g.fs_hz, chirp_index, g)


@dataclass(frozen=True)
class PlanCheck:
    name: str
    passed: bool
    margin_hz: float
    detail: str = ""


@dataclass(frozen=True)
class PlanReport:
    checks: tuple[PlanCheck, ...]
    quarter_offset_hz: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> PlanCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "quarter_offset_hz": self.quarter_offset_hz,
            "checks": [
                {"name": c.name, "passed": c.passed, "margin_hz": c.margin_hz, "detail": c.detail}
                for c in self.checks
            ],
        }


def validate_plan(
    geometry: ChirpGeometry,
    *,
    placement_orders=(0,),
    placement_tolerance_hz: float | None = None,
    sum_margin_hz: float | None = None,
    tau_int_s: float | None = None,
    leakage_guard_hz: float = 100e3,
) -> PlanReport:
    """Check the IF frequency plan against the oversampled domain.

    * placement: carrier at Q*F_S*(4N+1)/4 for an allowed N;
    * if_band: the desired band around the digital carrier stays clear of
      DC and Nyquist (no mirrored terms);
    * sum_terms: after mixing, the sum-term band clears the desired band
      by ``sum_margin_hz`` (default F_S/4);
    * bandwidth: F_S/2 accommodates the maximum range;
    * leakage_offset (only with ``tau_int_s``): the leakage beat lies within
      ``leakage_guard_hz`` of the carrier.
    """
    fs = geometry.fs_hz
    bw = geometry.desired_bandwidth_hz
    tol = 0.02 * fs if placement_tolerance_hz is None else placement_tolerance_hz
    margin = geometry.base_fs_hz / 4.0 if sum_margin_hz is None else sum_margin_hz
    checks = []

    grid = [fs * (4 * int(n) + 1) / 4.0 for n in placement_orders]
    offsets = [abs(geometry.f_if_carrier_hz - p) for p in grid]
    best = min(range(len(grid)), key=offsets.__getitem__)
    checks.append(PlanCheck(
        "placement", offsets[best] <= tol, tol - offsets[best],
        f"carrier {geometry.f_if_carrier_hz:.6g} Hz vs grid point {grid[best]:.6g} Hz "
        f"(N={placement_orders[best]})",
    ))
    quarter_offset = offsets[best]

    f_d = geometry.digital_if_carrier_hz
    lo_edge, hi_edge = f_d - bw, f_d + bw
    if_margin = min(lo_edge, fs / 2.0 - hi_edge)
    checks.append(PlanCheck(
        "if_band", if_margin > 0, if_margin,
        f"IF band [{lo_edge:.6g}, {hi_edge:.6g}] Hz within (0, {fs / 2:.6g}) Hz",
    ))

    s = fold_frequency(2.0 * f_d, fs)
    sum_low = max(s - bw, 0.0)
    clearance = sum_low - bw
    checks.append(PlanCheck(
        "sum_terms", clearance >= margin, clearance - margin,
        f"sum terms centred at {s:.6g} Hz (domain centre {fs / 2:.6g} Hz), "
        f"clearance {clearance:.6g} Hz, required {margin:.6g} Hz",
    ))

    f_max = geometry.slope_hz_per_s * range_to_delay(geometry.max_range_m)
    bw_margin = bw - f_max
    checks.append(PlanCheck(
        "bandwidth", bw_margin >= -1e-9 * bw, bw_margin,
        f"max range {geometry.max_range_m:g} m beats at {f_max:.6g} Hz, desired bandwidth {bw:.6g} Hz",
    ))

    if tau_int_s is not None:
        f_leak = geometry.slope_hz_per_s * tau_int_s
        checks.append(PlanCheck(
            "leakage_offset", f_leak <= leakage_guard_hz, leakage_guard_hz - f_leak,
            f"leakage beat {f_leak:.6g} Hz vs guard {leakage_guard_hz:.6g} Hz",
        ))

    return PlanReport(tuple(checks), quarter_offset)
