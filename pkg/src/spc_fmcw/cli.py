"""Command-line driver.

Exit codes: 0 success, 1 check failed (psd-check), 2 parse or validation
error, 3 frequency-plan failure, 4 capture size mismatch, 5 unreadable file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .capture import CaptureHeader, decode_chirps, encode_chirps, read_capture, read_header, write_capture
from .config import RunConfig, config_digest, load_config
from .diagnostics import stationary_point_demo
from .errors import CaptureSizeError, ConfigError, SpcError, UnreadableFileError
from .phase_noise import DEFAULT_LO_PROFILE, PsdProfile, round_trip
from .pipeline import RunResult, run_frames, target_reports
from .scenario import (
    IFFrame,
    PlanReport,
    draw_noise_set,
    subseed,
    synthesize_chirp,
    synthesize_if_frame,
    validate_plan,
)
from .spectral import write_improvement_csv, write_spectrum_csv

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_PLAN = 3
EXIT_SIZE = 4
EXIT_UNREADABLE = 5

DEFAULT_I16_SCALE = 2.0 ** -14


class PlanFailure(SpcError):
    def __init__(self, report: PlanReport):
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        super().__init__(f"frequency plan check failed: {failed}")
        self.report = report


@dataclass
class RunReport:
    config_digest: str
    seed: int | None
    plan: dict
    estimates: list[dict]
    improvement: dict | None
    targets: list[dict]
    timing: dict
    outputs: list[str] = field(default_factory=list)
    command: str = "simulate"

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "plan": self.plan,
            "estimates": self.estimates,
            "improvement": self.improvement,
            "targets": self.targets,
            "timing": self.timing,
            "outputs": self.outputs,
        }


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def check_plan(cfg: RunConfig, ignore: bool) -> PlanReport:
    s = cfg.scenario
    tau = s.leakage.tau_int_s if cfg.processing.search_window_hz is None else None
    report = validate_plan(
        s.geometry,
        placement_orders=cfg.plan.placement_orders,
        placement_tolerance_hz=cfg.plan.placement_tolerance_hz,
        sum_margin_hz=cfg.plan.sum_margin_hz,
        tau_int_s=tau,
    )
    if not report.passed and not ignore:
        raise PlanFailure(report)
    return report


def build_report(cfg: RunConfig, result: RunResult, plan: PlanReport, command: str,
                 truth: tuple[float, float] | None) -> RunReport:
    estimates = []
    for c in result.chirps:
        d = {"chirp": c.index, **c.estimate.to_dict(), "estimation_ms": round(c.estimation_ms, 3)}
        if truth is not None:
            d["f_error_hz"] = c.estimate.f_if_beat_leakage_hz - truth[0]
            d["theta_error_rad"] = math.remainder(c.estimate.theta_if_leakage_rad - truth[1], 2 * math.pi)
        estimates.append(d)
    imp = None
    if result.improvement is not None:
        curve = result.improvement
        imp = {
            "fit_max_db": _finite(curve.fit_max_db),
            "fit_min_db": _finite(curve.fit_min_db),
            "minor_leakage_db": _finite(curve.minor_leakage_db),
            "shift_bins": curve.shift_bins,
            "range_domain_m": list(curve.range_domain_m),
        }
    targets = []
    for t in result.targets:
        d = {
            "range_m": t.range_m,
            "common": {"bin": t.common_bin, "range_m": t.common_range_m, "snr_db": _finite(t.snr_common_db)},
            "spc": {"bin": t.spc_bin, "range_m": t.spc_range_m, "snr_db": _finite(t.snr_spc_db)},
            "snr_gain_db": _finite(t.snr_gain_db),
        }
        if result.improvement is not None:
            d["improvement_at_range_db"] = _finite(result.improvement.value_at_range(t.spc_range_m))
        targets.append(d)
    est_ms = [c.estimation_ms for c in result.chirps]
    return RunReport(
        config_digest=config_digest(cfg),
        seed=cfg.scenario.seed if command == "simulate" else None,
        plan=plan.to_dict(),
        estimates=estimates,
        improvement=imp,
        targets=targets,
        timing={
            "estimation_ms_mean": float(np.mean(est_ms)),
            "estimation_ms_max": float(np.max(est_ms)),
            "total_ms": result.total_ms,
        },
        command=command,
    )


def write_outputs(out: Path, result: RunResult, report: RunReport, extra: list[Path] = ()) -> list[Path]:
    """Write CSVs and report.json; returns the manifest."""
    out.mkdir(parents=True, exist_ok=True)
    written = list(extra)
    first = result.chirps[0]
    written.append(write_spectrum_csv(out / "spectrum_common_single.csv", first.common, result.alpha))
    written.append(write_spectrum_csv(out / "spectrum_spc_single.csv", first.spc, result.alpha))
    if result.avg_common is not None:
        written.append(write_spectrum_csv(out / "spectrum_common_avg.csv", result.avg_common, result.alpha))
        written.append(write_spectrum_csv(out / "spectrum_spc_avg.csv", result.avg_spc, result.alpha))
        written.append(write_improvement_csv(out / "improvement.csv", result.improvement))
    report_path = out / "report.json"
    report.outputs = sorted(p.name for p in [*written, report_path])
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return [*written, report_path]


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    scen = cfg.scenario
    if getattr(args, "seed_override", None) is not None:
        scen = replace(scen, seed=args.seed_override)
    if getattr(args, "n_chirps", None) is not None:
        try:
            scen = replace(scen, n_chirps=args.n_chirps)
        except ValueError as exc:
            raise ConfigError(str(exc), field="n_chirps") from exc
    proc = cfg.processing
    if getattr(args, "freeze_estimate", False):
        proc = replace(proc, freeze_estimate=True)
    return RunConfig(scen, proc, cfg.plan)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    plan = check_plan(cfg, args.ignore_plan)
    scen = cfg.scenario
    g = scen.geometry
    out = Path(args.out)

    extra = []
    if args.dump_frames:
        # Processing runs on the dumped samples so that `process` reproduces
        # the spectra exactly.
        header = CaptureHeader(
            sample_format=args.dump_frames,
            fs_hz=g.fs_hz,
            samples_per_chirp=g.samples_per_chirp,
            samples_to_discard=g.samples_discarded,
            chirp_count=scen.n_chirps,
            scale_volts_per_lsb=args.dump_scale if args.dump_frames == "i16le" else None,
        )
        chirps = np.stack([
            synthesize_chirp(scen, i, draw_noise_set(scen, i) if scen.noise.phase_noise else None)
            for i in range(scen.n_chirps)
        ])
        out.mkdir(parents=True, exist_ok=True)
        ext = {"f32le": ".f32", "i16le": ".i16"}[args.dump_frames]
        extra = list(write_capture(out / f"frames{ext}", chirps, header))
        chirps = decode_chirps(encode_chirps(chirps, header), header)

        def get_frame(i):
            return IFFrame(chirps[i, g.samples_discarded:], g.fs_hz, i, g)
    else:
        def get_frame(i):
            ns = draw_noise_set(scen, i) if scen.noise.phase_noise else None
            return synthesize_if_frame(scen, i, ns)

    result = run_frames(get_frame, scen.n_chirps, g, cfg.processing, args.jobs)
    result.targets = target_reports(result, [t.range_m for t in scen.targets], cfg.processing)
    truth = (scen.f_if_beat_leakage_hz, scen.frame_leakage_phase())
    report = build_report(cfg, result, plan, "simulate", truth)
    write_outputs(out, result, report, extra)
    _summary(report)
    return EXIT_OK


def cmd_process(args) -> int:
    cfg = _load(args)
    header = read_header(args.header or Path(args.capture).with_suffix(".json"))
    g = cfg.scenario.geometry
    if not math.isclose(header.fs_hz, g.fs_hz, rel_tol=1e-12):
        raise ConfigError(f"capture fs {header.fs_hz:g} Hz differs from configured {g.fs_hz:g} Hz",
                          field="fs_hz")
    plan = check_plan(cfg, args.ignore_plan)
    chirps = read_capture(args.capture, header)
    d = header.samples_to_discard

    def get_frame(i):
        return IFFrame(chirps[i, d:], header.fs_hz, i, g)

    result = run_frames(get_frame, header.chirp_count, g, cfg.processing, args.jobs)
    result.targets = target_reports(result, [t.range_m for t in cfg.scenario.targets], cfg.processing)
    report = build_report(cfg, result, plan, "process", None)
    write_outputs(Path(args.out), result, report)
    _summary(report)
    return EXIT_OK


def _profile_arg(path) -> PsdProfile:
    if path is None:
        return DEFAULT_LO_PROFILE
    try:
        return PsdProfile.from_csv(path)
    except OSError as exc:
        raise UnreadableFileError(f"cannot read PSD profile {path}: {exc.strerror}") from exc
    except SpcError as exc:
        raise ConfigError(str(exc), field="psd") from exc


def cmd_fig6(args) -> int:
    profile = _profile_arg(args.psd)
    stats = stationary_point_demo(
        profile, f0_hz=args.f0, amplitude=args.amplitude, fs_hz=args.fs, n=args.n,
        n_trials=args.trials, seed=args.seed, n_buckets=args.buckets,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = stats.to_csv(out / "stationary_point.csv")
    print(f"wrote {path} ({len(stats.bucket_centers_rad)} buckets, rms phase {stats.rms_phase_rad:.4g} rad)")
    return EXIT_OK


def cmd_plan_check(args) -> int:
    cfg = _load(args)
    report = check_plan(cfg, ignore=True)
    text = json.dumps(report.to_dict(), indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "plan.json").write_text(text + "\n")
    return EXIT_OK if report.passed else EXIT_PLAN


def cmd_psd_check(args) -> int:
    profile = _profile_arg(args.psd)
    if args.segment > args.n:
        raise ConfigError(f"segment {args.segment} exceeds n {args.n}", field="segment")
    seeds = [subseed(args.seed, i) for i in range(args.realizations)]
    res = round_trip(profile, args.n, args.fs, args.segment, seeds, args.tolerance_db)
    lines = ["offset_hz,target_dbc_hz,estimated_dbc_hz,error_db,in_band"]
    for f, t, e, b in zip(res.offsets_hz, res.target_dbc_hz, res.estimated_dbc_hz, res.in_band):
        lines.append(f"{f:.10g},{t:.10g},{e:.10g},{e - t:.10g},{int(b)}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "psd_check.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    verdict = "PASS" if res.passed else "FAIL"
    print(f"{verdict}: worst in-band error {res.worst_error_db:.3f} dB (tolerance {args.tolerance_db} dB)")
    return EXIT_OK if res.passed else EXIT_CHECK_FAILED


def _summary(report: RunReport) -> None:
    errs = [abs(e["f_error_hz"]) for e in report.estimates if "f_error_hz" in e]
    print(f"{len(report.estimates)} chirp(s) processed in {report.timing['total_ms']:.0f} ms")
    if errs:
        print(f"max leakage frequency error {max(errs):.3f} Hz")
    if report.improvement:
        imp = report.improvement
        print(f"improvement fit max {imp['fit_max_db']:.2f} dB, min {imp['fit_min_db']:.2f} dB")
    for t in report.targets:
        print(f"target {t['range_m']:g} m: SNR common {t['common']['snr_db']:.2f} dB, "
              f"SPC {t['spc']['snr_db']:.2f} dB")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spc-fmcw", description="Leakage phase-noise mitigation simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--config", required=True, help="run config (JSON)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--jobs", type=_positive_int, default=1)
        sp.add_argument("--freeze-estimate", action="store_true",
                        help="reuse the first chirp's leakage estimate for all chirps")
        sp.add_argument("--ignore-plan", action="store_true", help="continue despite plan failures")

    sp = sub.add_parser("simulate", help="synthesize chirps and compare common vs SPC processing")
    run_flags(sp)
    sp.add_argument("--seed-override", type=int)
    sp.add_argument("--n-chirps", type=int)
    sp.add_argument("--dump-frames", nargs="?", const="f32le", choices=("f32le", "i16le"),
                    help="also write the full chirps as a raw capture")
    sp.add_argument("--dump-scale", type=float, default=DEFAULT_I16_SCALE, help="volts per LSB for i16le")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("process", help="process a recorded IF capture")
    sp.add_argument("capture")
    sp.add_argument("--header", help="capture header (default: capture path with .json suffix)")
    run_flags(sp)
    sp.set_defaults(func=cmd_process)

    sp = sub.add_parser("fig6", help="phase-bucketed voltage noise of a phase-noisy tone")
    sp.add_argument("--psd", help="PSD profile CSV (default: built-in LO profile)")
    sp.add_argument("--trials", type=_positive_int, default=1000)
    sp.add_argument("--f0", type=float, default=10e3)
    sp.add_argument("--amplitude", type=float, default=1.0)
    sp.add_argument("--fs", type=float, default=10e6)
    sp.add_argument("--n", type=_positive_int, default=10_000)
    sp.add_argument("--buckets", type=_positive_int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_fig6)

    sp = sub.add_parser("plan-check", help="validate the IF frequency plan")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plan_check)

    sp = sub.add_parser("psd-check", help="synthesize and re-estimate a PSD profile")
    sp.add_argument("--psd")
    sp.add_argument("--n", type=_positive_int, default=2 ** 16)
    sp.add_argument("--fs", type=float, default=10e6)
    sp.add_argument("--segment", type=_positive_int, default=2 ** 14)
    sp.add_argument("--realizations", type=_positive_int, default=50)
    sp.add_argument("--tolerance-db", type=float, default=2.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_psd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PlanFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps(exc.report.to_dict(), indent=2), file=sys.stderr)
        return EXIT_PLAN
    except CaptureSizeError as exc:
        print(f"error: capture size mismatch: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except UnreadableFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
