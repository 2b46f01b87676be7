"""Executable model of the Quori socially interactive robot platform."""

from .config import PlatformConfig, default_config, load_config, serialize_config

__all__ = ["PlatformConfig", "default_config", "load_config", "serialize_config"]
__version__ = "0.1.0"
