"""Tests for the run configuration models and loaders."""

import pytest

from anyhop.client._exceptions import ConfigurationError
from anyhop.client.config import (
    EncoderConfig,
    PipelineConfig,
    RunConfig,
    load_default_config,
    load_run_config,
)


@pytest.fixture(autouse=True)
def no_user_config(monkeypatch):
    """Ignore any user config directory of the test environment."""
    monkeypatch.delenv("ANYHOP_CONFIG_DIR", raising=False)


def test_packaged_defaults_match_the_models():
    """Test that the packaged defaults equal the model defaults."""
    assert load_run_config() == RunConfig()
    flat = load_default_config()
    assert flat["encoder.L"] == 64
    assert flat["pipeline.K"] == 4
    assert flat["reranker.entity_cap"] == 120


def test_from_flat_accepts_aliases_and_names():
    """Test both the short alias and the field name of a key."""
    config = RunConfig.from_flat({"encoder.L": 16, "pipeline.keep_top_k": 2})
    assert config.encoder.max_length == 16
    assert config.pipeline.keep_top_k == 2
    assert config.pipeline.max_hops == 4
    assert config.train.steps == 400


@pytest.mark.parametrize(
    "key",
    ["encoder.width", "decoder.L", "encoder", "encoder."],
)
def test_from_flat_rejects_unknown_keys(key):
    """Test that misspelled keys are reported."""
    with pytest.raises(ConfigurationError, match="Unknown config key"):
        RunConfig.from_flat({key: 1})


@pytest.mark.parametrize(
    "flat",
    [
        {"encoder.h": 7},
        {"encoder.L": 4},
        {"pipeline.K": 9, "pipeline.D_cap": 8},
        {"pipeline.H": 0},
        {"train.lr": 0.0},
    ],
)
def test_from_flat_rejects_invalid_values(flat):
    """Test validation errors surface as ConfigurationError."""
    with pytest.raises(ConfigurationError, match="Invalid configuration"):
        RunConfig.from_flat(flat)


def test_flat_round_trip():
    """Test that the flat representation rebuilds the same config."""
    config = RunConfig.from_flat(
        {"encoder.h": 16, "pipeline.use_graph": False, "paths.index": "idx"}
    )
    flat = config.to_flat()
    assert flat["encoder.h"] == 16
    assert flat["pipeline.use_graph"] is False
    assert flat["paths.index"] == "idx"
    assert RunConfig.from_flat(flat) == config


def test_section_models():
    """Test construction by field name and the cap check."""
    assert EncoderConfig(max_length=32, hidden_size=8).max_length == 32
    assert PipelineConfig(keep_top_k=8, rerank_cap=8).keep_top_k == 8
    with pytest.raises(ValueError, match="must not exceed"):
        PipelineConfig(keep_top_k=5, rerank_cap=4)
    with pytest.raises(ValueError, match="even"):
        EncoderConfig(hidden_size=3)


def test_load_run_config_precedence(tmp_path, monkeypatch):
    """Test defaults, user defaults, overrides and the config file in order."""
    user_dir = tmp_path / "user"
    user_dir.mkdir()
    (user_dir / "defaults.yaml").write_text("pipeline.K: 2\npipeline.N: 5\n")
    monkeypatch.setenv("ANYHOP_CONFIG_DIR", str(user_dir))

    config = load_run_config()
    assert config.pipeline.keep_top_k == 2
    assert config.pipeline.retrieve_top_n == 5

    config = load_run_config(overrides={"pipeline.N": 6, "pipeline.H": None})
    assert config.pipeline.retrieve_top_n == 6
    assert config.pipeline.max_hops == 4

    config_file = tmp_path / "run.yaml"
    config_file.write_text("pipeline.N: 7\n")
    config = load_run_config(config_file, overrides={"pipeline.N": 6})
    assert config.pipeline.retrieve_top_n == 7
    assert config.pipeline.keep_top_k == 2


def test_missing_user_config_dir_warns(tmp_path, monkeypatch):
    """Test the fallback to packaged defaults."""
    monkeypatch.setenv("ANYHOP_CONFIG_DIR", str(tmp_path / "missing"))
    with pytest.warns(UserWarning, match="Could not find user config directory"):
        flat = load_default_config()
    assert flat["pipeline.K"] == 4


def test_invalid_config_file(tmp_path):
    """Test that a bad key in a config file is rejected."""
    config_file = tmp_path / "run.yaml"
    config_file.write_text("pipeline.hops: 3\n")
    with pytest.raises(ConfigurationError):
        load_run_config(config_file)
