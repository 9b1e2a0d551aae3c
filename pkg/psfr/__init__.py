"""PSFR keyframe toolkit: application factory."""
import json
import logging

from config import config

from psfr.errors import InvalidConfig

__version__ = '0.1.0'

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class Toolkit:
    """Resolved configuration plus the package logger, shared by every command."""

    def __init__(self, settings, config_name='default'):
        self.config = settings
        self.config_name = config_name
        self.logger = logging.getLogger('psfr')

    def __repr__(self):
        return f'<Toolkit {self.config_name}>'


def _class_settings(config_class):
    return {key: getattr(config_class, key) for key in dir(config_class) if key.isupper()}


def load_config_file(path):
    """
    Read a JSON configuration document.

    Args:
        path: Path to a JSON object whose keys name configuration values (any case)

    Returns:
        Dictionary with UPPER_CASE keys
    """
    with open(path, encoding='utf-8') as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f'{path}: {exc}') from exc
    if not isinstance(data, dict):
        raise InvalidConfig(f'{path}: expected a JSON object')
    return {str(key).upper(): value for key, value in data.items()}


def configure_logging(level):
    """Install one stream handler on the package logger."""
    logger = logging.getLogger('psfr')
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(str(level).upper())
    logger.propagate = False


def create_app(config_name='default', config_file=None, overrides=None):
    """
    Application factory function.

    Precedence: class defaults (environment included) < config file < overrides.
    Override values of None are ignored so unset CLI flags fall through.
    """
    if config_name not in config:
        raise InvalidConfig(f'unknown configuration {config_name!r}')
    settings = _class_settings(config[config_name])

    layers = []
    if config_file:
        layers.append(load_config_file(config_file))
    if overrides:
        layers.append({key.upper(): value for key, value in overrides.items() if value is not None})

    for layer in layers:
        unknown = sorted(set(layer) - set(settings))
        if unknown:
            raise InvalidConfig(f'unknown configuration keys: {", ".join(unknown)}')
        settings.update(layer)

    configure_logging(settings['LOG_LEVEL'])
    return Toolkit(settings, config_name)
