"""JSON run-config encoding.

A run config holds the scenario plus processing and plan-check settings.
Units are carried in key suffixes (``_hz``, ``_s``, ``_m``, ``_rad``,
``_v``, ``_db``).  Unknown keys are rejected so typos surface as errors.
PSD profiles are given as ``"default"``, a CSV path (relative to the config
file) or an inline ``[[offset_hz, level_dbc_hz], ...]`` list.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError, SpcError, UnreadableFileError
from .phase_noise import DEFAULT_LO_PROFILE, PsdProfile
from .pipeline import PlanSettings, ProcessingSettings
from .scenario import (
    ChirpGeometry,
    LeakageSpec,
    NoiseSpec,
    RFConstants,
    ScenarioConfig,
    TargetSpec,
    table1_geometry,
)
from .spc import FilterSpec


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig
    processing: ProcessingSettings = ProcessingSettings()
    plan: PlanSettings = PlanSettings()


def table1_scenario(n_chirps: int = 100, seed: int = 1, targets=()) -> ScenarioConfig:
    """Reference scenario: leakage beat of 10 kHz, default LO-dominant noise."""
    g = table1_geometry()
    return ScenarioConfig(
        geometry=g,
        leakage=LeakageSpec(amplitude_v=1.0, tau_int_s=10e3 / g.slope_hz_per_s, theta_if_rad=0.7),
        targets=tuple(targets),
        noise=NoiseSpec(),
        n_chirps=n_chirps,
        seed=seed,
    )


def table1_run_config(**kwargs) -> RunConfig:
    return RunConfig(table1_scenario(**kwargs))


class _Reader:
    """Pops typed fields from a JSON object, tracking the dotted path."""

    def __init__(self, obj, path: str):
        if not isinstance(obj, dict):
            raise ConfigError("expected an object", field=path or "<root>")
        self.obj = dict(obj)
        self.path = path

    def _f(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key):
        return key in self.obj

    def raw(self, key, default=...):
        if key not in self.obj:
            if default is ...:
                raise ConfigError("missing required field", field=self._f(key))
            return default
        return self.obj.pop(key)

    def num(self, key, default=..., allow_none=False):
        v = self.raw(key, default)
        if v is None and allow_none:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", field=self._f(key))
        return v

    def int(self, key, default=...):
        v = self.num(key, default)
        if int(v) != v:
            raise ConfigError(f"expected an integer, got {v!r}", field=self._f(key))
        return int(v)

    def bool(self, key, default=...):
        v = self.raw(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"expected true/false, got {v!r}", field=self._f(key))
        return v

    def str(self, key, default=...):
        v = self.raw(key, default)
        if not isinstance(v, str):
            raise ConfigError(f"expected a string, got {v!r}", field=self._f(key))
        return v

    def pair(self, key, default=...):
        v = self.raw(key, default)
        if v is None:
            return None
        if (not isinstance(v, list) or len(v) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
            raise ConfigError(f"expected [low, high], got {v!r}", field=self._f(key))
        return (float(v[0]), float(v[1]))

    def sub(self, key, default=...):
        v = self.raw(key, default)
        if v is None:
            return None
        return _Reader(v, self._f(key))

    def done(self):
        if self.obj:
            extra = sorted(self.obj)[0]
            raise ConfigError("unknown field", field=self._f(extra))


def _profile(value, field, base_dir: Path):
    if value is None:
        return None
    if value == "default":
        return DEFAULT_LO_PROFILE
    try:
        if isinstance(value, str):
            return PsdProfile.from_csv(base_dir / value)
        if isinstance(value, list):
            return PsdProfile.from_points((float(p[0]), float(p[1])) for p in value)
    except OSError as exc:
        raise UnreadableFileError(f"cannot read PSD profile {value}: {exc.strerror}") from exc
    except (SpcError, TypeError, IndexError, ValueError) as exc:
        raise ConfigError(f"bad PSD profile: {exc}", field=field) from exc
    raise ConfigError(f"bad PSD profile {value!r}", field=field)


def _q(value, field):
    try:
        return Fraction(value) if not isinstance(value, float) else Fraction(value).limit_denominator(10_000)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad oversampling factor {value!r}", field=field) from exc


def _build(ctor, field, **kwargs):
    try:
        return ctor(**kwargs)
    except SpcError as exc:
        raise ConfigError(str(exc), field=field) from exc
    except ValueError as exc:
        raise ConfigError(str(exc), field=field) from exc


def config_from_dict(data, base_dir=".") -> RunConfig:
    base_dir = Path(base_dir)
    root = _Reader(data, "")

    g = root.sub("geometry")
    geometry = _build(
        ChirpGeometry, "geometry",
        sweep_bandwidth_hz=g.num("sweep_bandwidth_hz"),
        sweep_period_s=g.num("sweep_period_s"),
        f_if_carrier_hz=g.num("f_if_carrier_hz"),
        base_fs_hz=g.num("base_fs_hz"),
        oversample_q=_q(g.raw("oversample_q"), "geometry.oversample_q"),
        samples_kept=g.int("samples_kept"),
        f_tx_below_f_rx=g.bool("f_tx_below_f_rx", False),
        max_range_m=g.num("max_range_m", 1100.0),
    )
    g.done()

    lk = root.sub("leakage")
    leakage = _build(
        LeakageSpec, "leakage",
        amplitude_v=lk.num("amplitude_v"),
        tau_int_s=lk.num("tau_int_s"),
        theta_if_rad=lk.num("theta_if_rad", 0.0, allow_none=True),
    )
    lk.done()

    targets = []
    raw_targets = root.raw("targets", [])
    if not isinstance(raw_targets, list):
        raise ConfigError("expected a list", field="targets")
    for i, t in enumerate(raw_targets):
        tr = _Reader(t, f"targets[{i}]")
        targets.append(_build(
            TargetSpec, f"targets[{i}]",
            amplitude_v=tr.num("amplitude_v"),
            range_m=tr.num("range_m"),
            theta_if_rad=tr.num("theta_if_rad", 0.0, allow_none=True),
        ))
        tr.done()

    nz = root.sub("noise", None) or _Reader({}, "noise")
    noise = _build(
        NoiseSpec, "noise",
        phase_noise=nz.bool("phase_noise", True),
        lo_profile=_profile(nz.raw("lo_profile", "default"), "noise.lo_profile", base_dir),
        lfm_profile=_profile(nz.raw("lfm_profile", None), "noise.lfm_profile", base_dir),
        lfm_margin_db=nz.num("lfm_margin_db", 20.0),
        lfm_enabled=nz.bool("lfm_enabled", True),
        tx_lo_enabled=nz.bool("tx_lo_enabled", True),
        rx_lo_enabled=nz.bool("rx_lo_enabled", True),
        white_noise_dbfs_hz=nz.num("white_noise_dbfs_hz", None, allow_none=True),
        tau_tx_path_s=nz.num("tau_tx_path_s", None, allow_none=True),
        tau_rx_path_s=nz.num("tau_rx_path_s", None, allow_none=True),
    )
    nz.done()

    rf = None
    rr = root.sub("rf", None)
    if rr is not None:
        rf = _build(
            RFConstants, "rf",
            f_rx_hz=rr.num("f_rx_hz"),
            theta_s_rad=rr.num("theta_s_rad", 0.0),
            theta_r_rad=rr.num("theta_r_rad", 0.0),
        )
        rr.done()

    n_chirps = root.int("n_chirps", 1)
    seed = root.int("seed", 0)
    scenario = _build(
        ScenarioConfig, "<root>",
        geometry=geometry, leakage=leakage, targets=tuple(targets), noise=noise,
        rf=rf, n_chirps=n_chirps, seed=seed,
    )

    processing = processing_from_reader(root.sub("processing", None))
    plan = plan_from_reader(root.sub("plan", None))
    root.done()
    return RunConfig(scenario, processing, plan)


def processing_from_reader(pr) -> ProcessingSettings:
    if pr is None:
        return ProcessingSettings()
    d = ProcessingSettings()
    lpf = d.lpf
    lr = pr.sub("lpf", None)
    if lr is not None:
        lpf = _build(
            FilterSpec, "processing.lpf",
            passband_hz=lr.num("passband_hz", d.lpf.passband_hz),
            stopband_hz=lr.num("stopband_hz", d.lpf.stopband_hz),
            attenuation_db=lr.num("attenuation_db", d.lpf.attenuation_db),
            ripple_db=lr.num("ripple_db", d.lpf.ripple_db),
        )
        lr.done()
    settings = ProcessingSettings(
        nfft=pr.int("nfft", d.nfft),
        window=pr.str("window", d.window),
        search_window_hz=pr.pair("search_window_hz", None),
        lpf=lpf,
        decimate=pr.int("decimate", d.decimate),
        freeze_estimate=pr.bool("freeze_estimate", d.freeze_estimate),
        spectrum_window=pr.str("spectrum_window", d.spectrum_window),
        guard_bins=pr.int("guard_bins", d.guard_bins),
        minor_leakage_bins=pr.int("minor_leakage_bins", d.minor_leakage_bins),
        range_domain_m=pr.pair("range_domain_m", list(d.range_domain_m)),
        fit_median_bins=pr.int("fit_median_bins", d.fit_median_bins),
        fit_smooth_bins=pr.int("fit_smooth_bins", d.fit_smooth_bins),
        snr_half_width=pr.int("snr_half_width", d.snr_half_width),
        snr_exclude=pr.int("snr_exclude", d.snr_exclude),
    )
    pr.done()
    if settings.nfft < 1 or settings.decimate < 1:
        raise ConfigError("nfft and decimate must be >= 1", field="processing")
    return settings


def plan_from_reader(pl) -> PlanSettings:
    if pl is None:
        return PlanSettings()
    orders = pl.raw("placement_orders", [0])
    if not isinstance(orders, list) or not orders or not all(isinstance(n, int) and n >= 0 for n in orders):
        raise ConfigError("expected a non-empty list of integers >= 0", field="plan.placement_orders")
    settings = PlanSettings(
        placement_orders=tuple(orders),
        placement_tolerance_hz=pl.num("placement_tolerance_hz", None, allow_none=True),
        sum_margin_hz=pl.num("sum_margin_hz", None, allow_none=True),
    )
    pl.done()
    return settings


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc.msg}", line=exc.lineno) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    return config_from_dict(load_json(path), base_dir=path.parent)


def _profile_points(p: PsdProfile | None):
    if p is None:
        return None
    return [[f, v] for f, v in zip(p.offsets_hz, p.levels_dbc_hz)]


def config_to_dict(cfg: RunConfig) -> dict:
    s = cfg.scenario
    g = s.geometry
    q = g.oversample_q
    out = {
        "geometry": {
            "sweep_bandwidth_hz": g.sweep_bandwidth_hz,
            "sweep_period_s": g.sweep_period_s,
            "f_if_carrier_hz": g.f_if_carrier_hz,
            "base_fs_hz": g.base_fs_hz,
            "oversample_q": q.numerator if q.denominator == 1 else f"{q.numerator}/{q.denominator}",
            "samples_kept": g.samples_kept,
            "f_tx_below_f_rx": g.f_tx_below_f_rx,
            "max_range_m": g.max_range_m,
        },
        "leakage": {
            "amplitude_v": s.leakage.amplitude_v,
            "tau_int_s": s.leakage.tau_int_s,
            "theta_if_rad": s.leakage.theta_if_rad,
        },
        "targets": [
            {"amplitude_v": t.amplitude_v, "range_m": t.range_m, "theta_if_rad": t.theta_if_rad}
            for t in s.targets
        ],
        "noise": {
            "phase_noise": s.noise.phase_noise,
            "lo_profile": _profile_points(s.noise.lo_profile),
            "lfm_profile": _profile_points(s.noise.lfm_profile),
            "lfm_margin_db": s.noise.lfm_margin_db,
            "lfm_enabled": s.noise.lfm_enabled,
            "tx_lo_enabled": s.noise.tx_lo_enabled,
            "rx_lo_enabled": s.noise.rx_lo_enabled,
            "white_noise_dbfs_hz": s.noise.white_noise_dbfs_hz,
            "tau_tx_path_s": s.noise.tau_tx_path_s,
            "tau_rx_path_s": s.noise.tau_rx_path_s,
        },
        "rf": None if s.rf is None else {
            "f_rx_hz": s.rf.f_rx_hz, "theta_s_rad": s.rf.theta_s_rad, "theta_r_rad": s.rf.theta_r_rad,
        },
        "processing": processing_to_dict(cfg.processing),
        "plan": {
            "placement_orders": list(cfg.plan.placement_orders),
            "placement_tolerance_hz": cfg.plan.placement_tolerance_hz,
            "sum_margin_hz": cfg.plan.sum_margin_hz,
        },
        "n_chirps": s.n_chirps,
        "seed": s.seed,
    }
    if out["rf"] is None:
        del out["rf"]
    return out


def processing_to_dict(p: ProcessingSettings) -> dict:
    return {
        "nfft": p.nfft,
        "window": p.window,
        "search_window_hz": None if p.search_window_hz is None else list(p.search_window_hz),
        "lpf": {
            "passband_hz": p.lpf.passband_hz,
            "stopband_hz": p.lpf.stopband_hz,
            "attenuation_db": p.lpf.attenuation_db,
            "ripple_db": p.lpf.ripple_db,
        },
        "decimate": p.decimate,
        "freeze_estimate": p.freeze_estimate,
        "spectrum_window": p.spectrum_window,
        "guard_bins": p.guard_bins,
        "minor_leakage_bins": p.minor_leakage_bins,
        "range_domain_m": list(p.range_domain_m),
        "fit_median_bins": p.fit_median_bins,
        "fit_smooth_bins": p.fit_smooth_bins,
        "snr_half_width": p.snr_half_width,
        "snr_exclude": p.snr_exclude,
    }


def digest(obj) -> str:
    """Stable sha256 over the canonical JSON encoding of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(text.encode()).hexdigest()


def config_digest(cfg: RunConfig) -> str:
    return digest(config_to_dict(cfg))
