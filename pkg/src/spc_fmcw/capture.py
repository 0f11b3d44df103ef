"""Raw little-endian IF captures with a JSON sidecar header."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import CaptureSizeError, ConfigError, UnreadableFileError

FORMATS = {"f32le": np.dtype("<f4"), "i16le": np.dtype("<i2")}


@dataclass(frozen=True)
class CaptureHeader:
    sample_format: str
    fs_hz: float
    samples_per_chirp: int
    samples_to_discard: int
    chirp_count: int
    scale_volts_per_lsb: float | None = None

    def __post_init__(self):
        if self.sample_format not in FORMATS:
            raise ConfigError(f"unknown sample format {self.sample_format!r}", field="sample_format")
        if not self.fs_hz > 0:
            raise ConfigError("fs_hz must be > 0", field="fs_hz")
        if self.samples_per_chirp < 1 or self.chirp_count < 1:
            raise ConfigError("samples_per_chirp and chirp_count must be >= 1")
        if not 0 <= self.samples_to_discard < self.samples_per_chirp:
            raise ConfigError("samples_to_discard out of range", field="samples_to_discard")
        if self.sample_format == "i16le" and not (self.scale_volts_per_lsb or 0) > 0:
            raise ConfigError("i16le captures need scale_volts_per_lsb > 0", field="scale_volts_per_lsb")

    @property
    def dtype(self) -> np.dtype:
        return FORMATS[self.sample_format]

    @property
    def expected_bytes(self) -> int:
        return self.chirp_count * self.samples_per_chirp * self.dtype.itemsize

    @property
    def samples_kept(self) -> int:
        return self.samples_per_chirp - self.samples_to_discard

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "CaptureHeader":
        known = {"sample_format", "fs_hz", "samples_per_chirp", "samples_to_discard",
                 "chirp_count", "scale_volts_per_lsb"}
        extra = set(d) - known
        if extra:
            raise ConfigError("unknown field", field=sorted(extra)[0])
        try:
            return cls(
                sample_format=d["sample_format"],
                fs_hz=float(d["fs_hz"]),
                samples_per_chirp=int(d["samples_per_chirp"]),
                samples_to_discard=int(d.get("samples_to_discard", 0)),
                chirp_count=int(d["chirp_count"]),
                scale_volts_per_lsb=d.get("scale_volts_per_lsb"),
            )
        except KeyError as exc:
            raise ConfigError("missing required field", field=exc.args[0]) from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad header value: {exc}") from exc


def encode_chirps(chirps: np.ndarray, header: CaptureHeader) -> bytes:
    """Encode a (chirps, samples) float array in the header's format."""
    x = np.asarray(chirps, dtype=float)
    if header.sample_format == "i16le":
        x = np.clip(np.round(x / header.scale_volts_per_lsb), -32768, 32767)
    return x.astype(header.dtype).tobytes()


def decode_chirps(raw: bytes, header: CaptureHeader) -> np.ndarray:
    x = np.frombuffer(raw, dtype=header.dtype).astype(float)
    if header.sample_format == "i16le":
        x = x * header.scale_volts_per_lsb
    return x.reshape(header.chirp_count, header.samples_per_chirp)


def write_capture(path, chirps: np.ndarray, header: CaptureHeader, header_path=None) -> tuple[Path, Path]:
    path = Path(path)
    header_path = Path(header_path) if header_path else path.with_suffix(".json")
    path.write_bytes(encode_chirps(chirps, header))
    header_path.write_text(header.to_json())
    return path, header_path


def read_header(path) -> CaptureHeader:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UnreadableFileError(f"cannot read header {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    return CaptureHeader.from_dict(data)


def read_capture(path, header: CaptureHeader) -> np.ndarray:
    """All chirps as a (chirp_count, samples_per_chirp) float array in volts."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UnreadableFileError(f"cannot read capture {path}: {exc.strerror}") from exc
    if len(raw) != header.expected_bytes:
        raise CaptureSizeError(header.expected_bytes, len(raw), path)
    return decode_chirps(raw, header)
