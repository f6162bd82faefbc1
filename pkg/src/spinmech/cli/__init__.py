"""Command-line front end."""

from .main import main, preset, preset_names

__all__ = ["main", "preset", "preset_names"]
