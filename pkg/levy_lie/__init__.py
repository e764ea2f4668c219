"""Inhomogeneous Levy processes on matrix Lie groups and on the sphere."""
from levy_lie.core.config import settings

__version__ = settings.app_version
