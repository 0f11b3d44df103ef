import json
from fractions import Fraction
from pathlib import Path

import pytest

from spc_fmcw.config import (
    RunConfig,
    config_digest,
    config_from_dict,
    config_to_dict,
    load_config,
    table1_run_config,
)
from spc_fmcw.errors import ConfigError, UnreadableFileError
from spc_fmcw.phase_noise import DEFAULT_LO_PROFILE, PsdProfile

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def table1_dict():
    return json.loads((CONFIGS / "table1.json").read_text())


def test_shipped_config_is_reference_scenario():
    cfg = load_config(CONFIGS / "table1.json")
    assert cfg == table1_run_config(n_chirps=100, seed=1)
    assert cfg.scenario.noise.lo_profile == DEFAULT_LO_PROFILE


def test_dict_round_trip():
    cfg = table1_run_config(n_chirps=7, seed=3)
    again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
    assert again == cfg
    assert config_digest(again) == config_digest(cfg)


def test_digest_tracks_content():
    a = table1_run_config(seed=1)
    assert config_digest(a) == config_digest(table1_run_config(seed=1))
    assert config_digest(a) != config_digest(table1_run_config(seed=2))
    assert config_digest(a).startswith("sha256:")


def test_minimal_config_uses_defaults():
    cfg = config_from_dict({
        "geometry": {
            "sweep_bandwidth_hz": 150e6, "sweep_period_s": 880e-6, "f_if_carrier_hz": 2.5e6,
            "base_fs_hz": 2.5e6, "oversample_q": 4, "samples_kept": 8192,
        },
        "leakage": {"amplitude_v": 1.0, "tau_int_s": 5e-8},
    })
    assert isinstance(cfg, RunConfig)
    assert cfg.scenario.n_chirps == 1
    assert cfg.scenario.noise.lo_profile == DEFAULT_LO_PROFILE
    assert cfg.processing.nfft == 2 ** 20


def test_rational_q_and_inline_profile(table1_dict):
    table1_dict["geometry"].update(oversample_q="5/2", samples_kept=4096)
    table1_dict["noise"]["lo_profile"] = [[1e3, -80], [1e6, -110]]
    cfg = config_from_dict(table1_dict, CONFIGS)
    assert cfg.scenario.geometry.oversample_q == Fraction(5, 2)
    assert cfg.scenario.noise.lo_profile == PsdProfile((1e3, 1e6), (-80.0, -110.0))


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d["geometry"].pop("sweep_period_s"), "geometry.sweep_period_s"),
    (lambda d: d["geometry"].update(sweep_period_s="880us"), "geometry.sweep_period_s"),
    (lambda d: d["geometry"].update(sweep_period_s=-1.0), "geometry"),
    (lambda d: d["leakage"].update(colour="red"), "leakage.colour"),
    (lambda d: d.update(n_chirps=1.5), "n_chirps"),
    (lambda d: d["noise"].update(lo_profile=[[1e3, -80]]), "noise.lo_profile"),
    (lambda d: d["processing"].update(range_domain_m=[10]), "processing.range_domain_m"),
    (lambda d: d["plan"].update(placement_orders=[-1]), "plan.placement_orders"),
    (lambda d: d.update(targets=[{"amplitude_v": 0.0, "range_m": 100.0}]), "targets[0]"),
])
def test_validation_errors_name_the_field(table1_dict, mutate, field):
    mutate(table1_dict)
    with pytest.raises(ConfigError) as info:
        config_from_dict(table1_dict, CONFIGS)
    assert info.value.field == field
    assert field in str(info.value)


def test_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "geometry": {,\n}\n')
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert info.value.line == 2
    assert "line 2" in str(info.value)


def test_missing_files_are_unreadable(tmp_path, table1_dict):
    with pytest.raises(UnreadableFileError):
        load_config(tmp_path / "nope.json")
    table1_dict["noise"]["lo_profile"] = "missing.csv"
    with pytest.raises(UnreadableFileError):
        config_from_dict(table1_dict, tmp_path)
