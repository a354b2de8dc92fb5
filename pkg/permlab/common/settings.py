'''
Layered INI settings.

The packaged default.cfg is read first, then the file named by PERM_CONFIG if set.
PERM_THREADS overrides [runtime] threads.
'''

import configparser
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from permlab.common.errors import ConfigError

logger = logging.getLogger('permlab.settings')

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / 'configs' / 'default.cfg'
CONFIG_ENV = 'PERM_CONFIG'
THREADS_ENV = 'PERM_THREADS'


@dataclass(frozen=True)
class Settings:
    '''Resolved defaults for every command'''
    threads: int
    output_dir: str
    log_level: str
    log_file: str | None
    beta: float
    delta: float
    m: int
    schedule_floor: int
    continuation: str
    allow_small_beta: bool
    epsilon: float
    strategy: str
    endpoint_mode: str
    trials: int
    quad_points: int
    ryser_cap: int
    naive_cap: int
    coeff_cap: int
    points: int
    rate: str


def load_settings(config_file: str | None = None) -> Settings:
    '''Load settings from the packaged defaults and an optional override file'''
    parser = configparser.ConfigParser()
    parser.read(DEFAULT_CONFIG)

    override = config_file or os.environ.get(CONFIG_ENV)
    if override:
        if not Path(override).exists():
            raise ConfigError(f"settings file not found: {override}", path=override)
        parser.read(override)
        logger.debug(f"Loaded settings override {override}")

    try:
        threads = parser.getint('runtime', 'threads', fallback=0)
        env_threads = os.environ.get(THREADS_ENV)
        if env_threads:
            threads = int(env_threads)
        if threads <= 0:
            threads = os.cpu_count() or 1

        return Settings(
            threads=threads,
            output_dir=parser.get('runtime', 'output_dir', fallback='results'),
            log_level=parser.get('runtime', 'log_level', fallback='INFO'),
            log_file=parser.get('runtime', 'log_file', fallback='') or None,
            beta=parser.getfloat('cac', 'beta'),
            delta=parser.getfloat('cac', 'delta'),
            m=parser.getint('cac', 'm'),
            schedule_floor=parser.getint('cac', 'schedule_floor'),
            continuation=parser.get('cac', 'continuation', fallback='recentred'),
            allow_small_beta=parser.getboolean('cac', 'allow_small_beta', fallback=False),
            epsilon=parser.getfloat('curve', 'epsilon'),
            strategy=parser.get('curve', 'strategy'),
            endpoint_mode=parser.get('curve', 'endpoint_mode', fallback='clamp'),
            trials=parser.getint('stats', 'trials'),
            quad_points=parser.getint('stats', 'quad_points'),
            ryser_cap=parser.getint('limits', 'ryser_cap'),
            naive_cap=parser.getint('limits', 'naive_cap'),
            coeff_cap=parser.getint('limits', 'coeff_cap'),
            points=parser.getint('hardness', 'points', fallback=21),
            rate=parser.get('hardness', 'rate', fallback='1/8'),
        )
    except (configparser.Error, ValueError) as e:
        raise ConfigError(f"invalid settings: {e}") from e
