import os
import json
import logging
from pathlib import Path
from typing import Dict, Any, Optional, List
from dataclasses import dataclass, asdict, fields

import yaml

from .errors import ConfigError

logger = logging.getLogger(__name__)

PRECISION_MODES = ("big-float", "exact-rational")
OUTPUT_FORMATS = ("csv", "json")

CONFIG_FILES = (
    '.discqueue.json',
    '.discqueue.yaml',
    '.discqueue.yml',
    'discqueue.json',
    'config/discqueue.json',
)
YAML_SUFFIXES = ('.yaml', '.yml')


@dataclass
class SolverConfig:
    """Main configuration for discqueue computations and the command line."""

    depth: int = 80
    max_depth: int = 4000
    epsilon: float = 1e-10

    precision_mode: str = "big-float"
    precision_bits: Optional[int] = None
    gamma_power: int = 2
    window: int = 5

    oracle_epsilon: float = 1e-10

    seed: int = 20240101
    paths: int = 100000
    max_workers: int = 1

    output_format: str = "csv"
    cache_dir: Optional[str] = None
    use_cache: bool = False
    progress: bool = False

    log_level: str = "WARNING"
    log_file: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SolverConfig':
        """Build a config from a mapping; keys that are not fields are dropped."""
        names = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in names})

    def validate(self) -> List[str]:
        """
        Check every field against its allowed range.

        Returns:
            One message per problem; an empty list means the config is usable
        """
        errors = []

        if self.depth < 0:
            errors.append(f"depth must be nonnegative, got {self.depth}")

        if self.max_depth < self.depth:
            errors.append(f"max_depth ({self.max_depth}) is below depth ({self.depth})")

        if not self.epsilon > 0:
            errors.append(f"epsilon must be positive, got {self.epsilon}")

        if not self.oracle_epsilon > 0:
            errors.append(f"oracle_epsilon must be positive, got {self.oracle_epsilon}")

        if self.precision_mode not in PRECISION_MODES:
            errors.append(f"precision_mode must be one of {PRECISION_MODES}, got {self.precision_mode!r}")

        if self.precision_bits is not None and self.precision_bits < 64:
            errors.append(f"precision_bits must be at least 64, got {self.precision_bits}")

        if self.gamma_power not in (1, 2):
            errors.append(f"gamma_power must be 1 or 2, got {self.gamma_power}")

        if self.window < 1:
            errors.append(f"window must be positive, got {self.window}")

        if self.paths < 1:
            errors.append(f"paths must be positive, got {self.paths}")

        if self.max_workers < 1:
            errors.append(f"max_workers must be positive, got {self.max_workers}")

        if self.output_format not in OUTPUT_FORMATS:
            errors.append(f"output_format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}")

        return errors


def _suffix(path: str) -> str:
    suffix = Path(path).suffix.lower()
    if suffix != '.json' and suffix not in YAML_SUFFIXES:
        raise ConfigError(f"Unsupported config format: {suffix or path}")
    return suffix


class ConfigManager:
    """
    Reads a SolverConfig from JSON or YAML, layers the environment on top,
    and writes it back out.
    """

    def __init__(self, config_path: Optional[str] = None):
        """
        Args:
            config_path: Explicit config file; when omitted the working
                directory is searched for one of CONFIG_FILES
        """
        self.config_path = config_path or self._find_config_file()
        self.config: SolverConfig = SolverConfig()

        if self.config_path:
            self.load()
        else:
            self._load_from_env()

    @staticmethod
    def _find_config_file() -> Optional[str]:
        return next((name for name in CONFIG_FILES if os.path.exists(name)), None)

    def load(self, config_path: Optional[str] = None) -> SolverConfig:
        """
        Replace the current config with the contents of a file.

        Raises:
            ConfigError: if the file is missing, unreadable or malformed
        """
        source = config_path or self.config_path
        if not source or not os.path.exists(source):
            raise ConfigError(f"Config file not found: {source}")

        suffix = _suffix(source)
        try:
            with open(source, 'r', encoding='utf-8') as f:
                data = json.load(f) if suffix == '.json' else yaml.safe_load(f)
        except (OSError, ValueError, yaml.YAMLError) as e:
            raise ConfigError(f"Error loading config {source}: {e}") from e

        if not isinstance(data, dict):
            raise ConfigError(f"Config file {source} must contain a mapping")

        self.config = SolverConfig.from_dict(data)
        self._load_from_env()
        logger.info("Loaded configuration from %s", source)
        return self.config

    def _load_from_env(self):
        level = os.getenv('DISCQUEUE_LOG_LEVEL')
        if level:
            self.config.log_level = level

        # a cache directory from the environment implies the cache is wanted
        cache_dir = os.getenv('DISCQUEUE_CACHE_DIR')
        if cache_dir:
            self.config.cache_dir = cache_dir
            self.config.use_cache = True

    def save(self, config_path: Optional[str] = None):
        """Write the current config; the suffix picks JSON or YAML."""
        target = config_path or self.config_path or CONFIG_FILES[0]
        suffix = _suffix(target)

        with open(target, 'w', encoding='utf-8') as f:
            if suffix == '.json':
                json.dump(self.config.to_dict(), f, indent=2)
            else:
                yaml.safe_dump(self.config.to_dict(), f, default_flow_style=False)

        logger.info("Saved configuration to %s", target)

    def validate(self) -> bool:
        """Log each problem found by SolverConfig.validate and report whether there were none."""
        problems = self.config.validate()
        for problem in problems:
            logger.error("Configuration error: %s", problem)
        return not problems

    def create_default_config(self, output_path: str = CONFIG_FILES[0]):
        """Write a JSON file holding every default value."""
        with open(output_path, 'w', encoding='utf-8') as f:
            json.dump(SolverConfig().to_dict(), f, indent=2)
        logger.info("Created default configuration at %s", output_path)

    def get(self) -> SolverConfig:
        return self.config

    def update(self, **overrides):
        """
        Apply overrides such as command-line options.

        None means "not given" and leaves the field alone; unknown names are
        logged and skipped.
        """
        for name, value in overrides.items():
            if value is None:
                continue
            if hasattr(self.config, name):
                setattr(self.config, name, value)
            else:
                logger.warning("Unknown config field '%s'", name)


def load_config(config_path: Optional[str] = None) -> SolverConfig:
    """Shortcut for ConfigManager(config_path).config."""
    return ConfigManager(config_path).config
