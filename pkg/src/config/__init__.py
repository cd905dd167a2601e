"""Configuration module for the ROMER simulator."""

from .config import SimConfig

__all__ = ["SimConfig"]
