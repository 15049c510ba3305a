"""Tests for configuration module."""

import os
from unittest.mock import patch

import pytest


class TestSettings:
    """Tests for Settings configuration."""

    def test_defaults(self):
        """Test the documented defaults."""
        from mvmilstein.config import Settings

        settings = Settings(_env_file=None)  # type: ignore[call-arg]
        assert settings.app_name == "mvmilstein"
        assert settings.seed == 20240601
        assert settings.particles == 10_000
        assert settings.particles_small_model == 1_000
        assert settings.output_format == "csv"
        assert settings.levy_terms is None
        assert settings.divergence_threshold == 1e150

    def test_settings_from_env(self):
        """Test loading settings from environment variables."""
        env = {
            "MVMILSTEIN_SEED": "42",
            "MVMILSTEIN_PARTICLES": "512",
            "MVMILSTEIN_OUTPUT_FORMAT": "json",
            "MVMILSTEIN_LOG_LEVEL": "DEBUG",
        }
        with patch.dict(os.environ, env, clear=False):
            from mvmilstein.config import Settings

            settings = Settings(_env_file=None)  # type: ignore[call-arg]
            assert settings.seed == 42
            assert settings.particles == 512
            assert settings.output_format == "json"
            assert settings.log_level == "DEBUG"

    def test_effective_workers_explicit(self):
        """Test that an explicit worker count is used as is."""
        from mvmilstein.config import Settings

        settings = Settings(_env_file=None, workers=3)  # type: ignore[call-arg]
        assert settings.effective_workers == 3

    def test_effective_workers_default(self):
        """Test that the worker count falls back to the core count."""
        from mvmilstein.config import Settings

        settings = Settings(_env_file=None)  # type: ignore[call-arg]
        with patch("mvmilstein.config.os.cpu_count", return_value=6):
            assert settings.effective_workers == 6
        with patch("mvmilstein.config.os.cpu_count", return_value=None):
            assert settings.effective_workers == 1

    @pytest.mark.parametrize("threshold", ["0", "-1", "inf"])
    def test_invalid_threshold(self, threshold):
        """Test that the divergence threshold must be positive and finite."""
        from mvmilstein.config import Settings

        with patch.dict(os.environ, {"MVMILSTEIN_DIVERGENCE_THRESHOLD": threshold}, clear=False):
            with pytest.raises(ValueError):
                Settings(_env_file=None)  # type: ignore[call-arg]

    def test_invalid_seed(self):
        """Test that seeds outside the 64-bit range are rejected."""
        from mvmilstein.config import Settings

        with pytest.raises(ValueError):
            Settings(_env_file=None, seed=2**64)  # type: ignore[call-arg]


class TestGetSettings:
    """Tests for the cached settings accessor."""

    def test_cached(self):
        """Test that repeated calls return the same instance."""
        from mvmilstein.config import get_settings

        get_settings.cache_clear()
        try:
            assert get_settings() is get_settings()
        finally:
            get_settings.cache_clear()
