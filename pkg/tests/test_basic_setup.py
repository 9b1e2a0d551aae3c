"""
Simple smoke tests to verify test infrastructure is working.
"""
import json
import logging

import pytest

from psfr import Toolkit, create_app, load_config_file
from psfr.errors import InvalidConfig


class TestBasicSetup:
    """Basic tests to verify the factory and fixtures work."""

    def test_app_fixture(self, app):
        """Should build a toolkit with the testing configuration."""
        assert isinstance(app, Toolkit)
        assert app.config['TIMING'] == 'zero'
        assert app.config['THREADS'] == 1

    def test_default_oracle_constants(self):
        """Default configuration should carry alpha=0.95, gamma=1, T_max=15, K=16."""
        settings = create_app('default').config
        assert settings['ALPHA'] == 0.95
        assert settings['GAMMA'] == 1.0
        assert settings['T_MAX'] == 15.0
        assert settings['K'] == 16

    def test_package_logger_configured(self, app):
        """Factory should install exactly one handler on the package logger."""
        create_app('testing')
        logger = logging.getLogger('psfr')
        assert len(logger.handlers) == 1
        assert logger.propagate is False

    def test_corpus_fixture(self, corpus):
        """Session corpus should hold two videos and an annotation file."""
        assert set(corpus['videos']) == {'three', 'two'}
        assert corpus['annotations'].exists()


class TestConfigPrecedence:
    """Tests for layered configuration."""

    def test_overrides_beat_defaults(self):
        """Flag overrides should replace class defaults."""
        settings = create_app('testing', overrides={'K': 8}).config
        assert settings['K'] == 8

    def test_none_override_ignored(self):
        """Unset flags (None) should fall through to lower layers."""
        settings = create_app('testing', overrides={'K': None}).config
        assert settings['K'] == 16

    def test_config_file_any_case(self, tmp_path):
        """Config file keys should be case-insensitive."""
        path = tmp_path / 'cfg.json'
        path.write_text(json.dumps({'alpha': 0.9, 'GRID_ROWS': 3}))
        settings = create_app('testing', config_file=path).config
        assert settings['ALPHA'] == 0.9
        assert settings['GRID_ROWS'] == 3

    def test_flags_beat_config_file(self, tmp_path):
        """Overrides should win over the config file."""
        path = tmp_path / 'cfg.json'
        path.write_text(json.dumps({'K': 4}))
        settings = create_app('testing', config_file=path, overrides={'K': 2}).config
        assert settings['K'] == 2

    def test_unknown_key_rejected(self, tmp_path):
        """Unknown configuration keys should raise InvalidConfig."""
        path = tmp_path / 'cfg.json'
        path.write_text(json.dumps({'NOT_A_KEY': 1}))
        with pytest.raises(InvalidConfig):
            create_app('testing', config_file=path)

    def test_non_object_file_rejected(self, tmp_path):
        """A config file must hold a JSON object."""
        path = tmp_path / 'cfg.json'
        path.write_text('[1, 2]')
        with pytest.raises(InvalidConfig):
            load_config_file(path)

    def test_unknown_config_name(self):
        """Unknown configuration classes should raise InvalidConfig."""
        with pytest.raises(InvalidConfig):
            create_app('staging')
