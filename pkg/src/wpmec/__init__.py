"""UAV-assisted wireless powered edge computing simulator with multi-task soft Q-learning."""

__version__ = "0.1.0"

from .config import ConfigError, SimConfig, desk_config, load_config, validate_config  # noqa: E402

__all__ = ["__version__", "ConfigError", "SimConfig", "desk_config", "load_config", "validate_config"]
