"""
Configuration module for the SubGraph-Stationary serving simulator
"""
from .settings import Settings, settings

__all__ = ["Settings", "settings"]
