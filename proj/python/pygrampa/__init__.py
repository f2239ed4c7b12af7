"""Generalized AMP for analysis compressive sensing."""

from ._core import *  # noqa: F401,F403
from ._core import ConfigError, IoError, LinearOperator, run_experiment, solve

__all__ = [name for name in dir() if not name.startswith("_")]
