"""
File contains the process-wide defaults used by checkers, generators and the CLI.
"""

import logging

from typing import Any

logger = logging.getLogger(__name__)


class Settings:
    """
    This class holds configurable defaults as class attributes.
    """

    tolerance: float = 1e-9
    normalization_tolerance: float = 1e-12
    state_space_cap: int = 10**6
    default_cardinality: int = 2
    latent_precision_bits: int = 3
    topological_order_limit: int = 10
    oracle_walk_factor: int = 2
    workers: int = 1

    _defaults: dict[str, Any] = {
        "tolerance": 1e-9,
        "normalization_tolerance": 1e-12,
        "state_space_cap": 10**6,
        "default_cardinality": 2,
        "latent_precision_bits": 3,
        "topological_order_limit": 10,
        "oracle_walk_factor": 2,
        "workers": 1,
    }

    @staticmethod
    def configure(**overrides: Any) -> None:
        """
        This method overrides selected settings.
        :param overrides: setting names mapped to new values
        :return: None
        """
        for name, value in overrides.items():
            if name not in Settings._defaults:
                raise KeyError(f"unknown setting: {name}")
            expected = type(Settings._defaults[name])
            if isinstance(value, bool):
                raise TypeError(f"setting {name} expects {expected.__name__}, got bool")
            if expected is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, expected):
                raise TypeError(f"setting {name} expects {expected.__name__}, got {type(value).__name__}")
            if value < 0 or (expected is int and value == 0):
                raise ValueError(f"setting {name} must be positive, got {value}")
            setattr(Settings, name, value)
            logger.debug("setting %s = %r", name, value)

    @staticmethod
    def reset() -> None:
        """
        This method restores all defaults.
        :return: None
        """
        for name, value in Settings._defaults.items():
            setattr(Settings, name, value)
