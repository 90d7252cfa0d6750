"""
Reference data module.

Holds the default run config as a Python constant.
"""

from app.data.default_fixture import DEFAULT_CONFIG

__all__ = ["DEFAULT_CONFIG"]
