#!/usr/bin/env python3
"""
Tests for presets, the key-value config loader and runtime settings
"""
import os
from pathlib import Path

import pytest

from skyfair.core.config import (
    PRESETS,
    Settings,
    config_snapshot,
    parse_config_text,
    resolve_config,
    resolve_threads,
    validate_settings,
)
from skyfair.core.errors import ConfigurationError


def test_table1_defaults():
    config, options = resolve_config(preset="table1")
    assert config.j == 18
    assert config.nu == 5
    assert config.upsilon_m == 10.0
    assert config.psi0 == 10.0 and config.lambda_ == 0.99
    assert config.t_min_s == 150.0
    assert options.arms == ["traditional", "saq"]


def test_desk_preset():
    config, _ = resolve_config(preset="desk")
    for key, value in PRESETS["desk"].items():
        assert getattr(config, key) == value


def test_parse_skips_comments_and_blank_lines():
    values = parse_config_text("# comment\n\nj = 4  # trailing\nlambda = 0.5\n")
    assert values == {"j": "4", "lambda": "0.5"}


@pytest.mark.parametrize(
    "text, field",
    [
        ("bogus = 1\n", "bogus"),
        ("j = 1\nj = 2\n", "j"),
        ("just words\n", "just words"),
    ],
)
def test_parse_rejects_bad_lines(text, field):
    with pytest.raises(ConfigurationError) as exc:
        parse_config_text(text, source="run.conf")
    assert exc.value.field == field
    assert "run.conf:" in str(exc.value)


def test_layering_flag_over_file_over_preset(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("seed = 5\nnu = 1\narms = traditional,pso\n")
    config, options = resolve_config(preset="desk", config_path=str(path), overrides={"seed": 9, "arms": None})
    assert config.seed == 9
    assert config.nu == 1
    assert config.j == 6
    assert options.arms == ["traditional", "pso"]


def test_missing_config_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        resolve_config(config_path=str(tmp_path / "missing.conf"))


def test_validation_error_carries_field():
    with pytest.raises(ConfigurationError) as exc:
        resolve_config(overrides={"eta": "1.5"})
    assert exc.value.field == "eta"


def test_unknown_arm_and_preset():
    with pytest.raises(ConfigurationError) as exc:
        resolve_config(overrides={"arms": "traditional,rocket"})
    assert exc.value.field == "arms"
    with pytest.raises(ConfigurationError):
        resolve_config(preset="huge")


def test_arms_are_canonically_ordered():
    _, options = resolve_config(overrides={"arms": "exhaustive, saq ,traditional"})
    assert options.arms == ["traditional", "saq", "exhaustive"]


def test_snapshot_round_trips_through_resolve():
    config, _ = resolve_config(preset="desk", overrides={"lambda": 0.95})
    again, _ = resolve_config(overrides=config_snapshot(config))
    assert again == config
    assert config_snapshot(config)["lambda"] == 0.95


def test_settings_validation():
    assert validate_settings(Settings()) is True
    with pytest.raises(ConfigurationError):
        validate_settings(Settings(THREADS=-1))
    with pytest.raises(ConfigurationError):
        validate_settings(Settings(LOG_RENDERER="xml"))


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("SKYFAIR_THREADS", "3")
    assert Settings().THREADS == 3
    assert resolve_threads(2) == 2
    assert resolve_threads(0) == (os.cpu_count() or 1)


@pytest.mark.parametrize("name", ["table1", "desk"])
def test_shipped_config_files_match_presets(name):
    path = Path(__file__).parent / "configs" / f"{name}.conf"
    from_file, _ = resolve_config(preset="table1", config_path=str(path))
    from_preset, _ = resolve_config(preset=name)
    assert from_file == from_preset
