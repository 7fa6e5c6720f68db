import logging

import pytest

from models.error_models import ParameterError
from models.score_models import Measure
from utils.config_helper import ENV_PREFIX, resolve_config
from utils.logging_helper import configure_logging


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    for name in ("SEED", "EPOCHS", "MEASURES", "LATENT_DIMS", "JOBS", "LOG_LEVEL"):
        monkeypatch.delenv(ENV_PREFIX + name, raising=False)


def test_defaults():
    config = resolve_config()
    assert config.seed == 0
    assert config.latent_dims == [16, 64]
    assert config.epochs == 50 and config.batch_size == 32
    assert config.measures == [Measure.FILL, Measure.COMPRESSION, Measure.FFT, Measure.VAE]


def test_precedence_env_then_file_then_flags(monkeypatch, tmp_path):
    monkeypatch.setenv(ENV_PREFIX + "SEED", "5")
    monkeypatch.setenv(ENV_PREFIX + "EPOCHS", "7")
    monkeypatch.setenv(ENV_PREFIX + "JOBS", "3")
    config_file = tmp_path / "run.env"
    config_file.write_text("seed=6\nepochs=8\n")
    config = resolve_config(config_file, seed=9, epochs=None)
    assert config.seed == 9
    assert config.epochs == 8
    assert config.jobs == 3


def test_comma_separated_lists(monkeypatch, tmp_path):
    monkeypatch.setenv(ENV_PREFIX + "LATENT_DIMS", "8, 32")
    assert resolve_config().latent_dims == [8, 32]
    assert resolve_config(measures="fft,compression").measures == [Measure.FFT, Measure.COMPRESSION]


def test_unknown_config_key(tmp_path):
    config_file = tmp_path / "run.env"
    config_file.write_text("seeds=1\n")
    with pytest.raises(ParameterError, match="seeds"):
        resolve_config(config_file)
    with pytest.raises(ParameterError, match="not found"):
        resolve_config(tmp_path / "missing.env")


@pytest.mark.parametrize("flags", [
    {"seed": -1},
    {"seed": 2 ** 32},
    {"latent_dims": "16,16"},
    {"measures": "fft,entropy"},
    {"deflate_level": 10},
    {"threshold": 256},
])
def test_invalid_values_are_parameter_errors(flags):
    with pytest.raises(ParameterError, match="invalid configuration"):
        resolve_config(**flags)


def test_configure_logging_levels(monkeypatch):
    assert configure_logging("debug") == logging.DEBUG
    monkeypatch.setenv(ENV_PREFIX + "LOG_LEVEL", "WARNING")
    assert configure_logging() == logging.WARNING
    handlers = [h for h in logging.getLogger().handlers if getattr(h, "_shapecx", False)]
    assert len(handlers) == 1
    with pytest.raises(ValueError):
        configure_logging("chatty")
