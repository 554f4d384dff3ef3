"""Python bindings for the jumpns solver library."""

from ._core import *  # noqa: F401,F403
from ._core import ConfigError, CoverageError, NumericalFailure  # noqa: F401

__version__ = "0.1.0"
