"""
Tests for settings and logging configuration.
"""

import logging

import pytest

import cli
from core import logging_setup
from core.config import Settings, settings


class TestSettings:
    """Test cases for environment-driven settings."""

    @pytest.mark.unit
    def test_defaults(self, monkeypatch):
        """Test the simulation defaults."""
        monkeypatch.delenv("QUATTRACK_THREADS", raising=False)
        fresh = Settings(_env_file=None)
        assert fresh.DEFAULT_DT == 1e-3
        assert fresh.DEFAULT_T_END == 40.0
        assert fresh.DEFAULT_RECORD_STRIDE == 10
        assert fresh.CSV_FLOAT_FORMAT == "%.12e"
        assert fresh.QUATTRACK_THREADS is None

    @pytest.mark.unit
    def test_environment_override(self, monkeypatch):
        """Test that environment variables override the defaults."""
        monkeypatch.setenv("QUATTRACK_THREADS", "4")
        monkeypatch.setenv("LOG_LEVEL", "WARNING")
        fresh = Settings(_env_file=None)
        assert fresh.QUATTRACK_THREADS == 4
        assert fresh.LOG_LEVEL == "WARNING"


class TestLogging:
    """Test cases for configure_logging."""

    @pytest.mark.unit
    def test_explicit_level(self):
        """Test that an explicit level wins over the settings."""
        logging_setup.configure_logging("warning")
        assert logging.getLogger().level == logging.WARNING

    @pytest.mark.unit
    def test_debug_setting(self, mocker):
        """Test that DEBUG=true lowers the default level."""
        mocker.patch.object(settings, "DEBUG", True)
        logging_setup.configure_logging()
        assert logging.getLogger().level == logging.DEBUG

    @pytest.mark.unit
    def test_single_handler(self):
        """Test that repeated calls install one handler."""
        logging_setup.configure_logging("INFO")
        count = len(logging.getLogger().handlers)
        logging_setup.configure_logging("INFO")
        assert len(logging.getLogger().handlers) == count

    @pytest.mark.unit
    def test_cli_log_level_choices(self):
        """Test that the CLI rejects unknown levels as a usage error."""
        assert cli.main(["--log-level", "loud", "verify", "--suite", "algebra"]) == cli.EXIT_CONFIG_ERROR

    @pytest.mark.unit
    def test_version(self, capsys):
        """Test --version."""
        assert cli.main(["--version"]) == cli.EXIT_OK
        assert settings.VERSION in capsys.readouterr().out
