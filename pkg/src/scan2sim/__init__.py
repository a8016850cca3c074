"""Annotated 3D scans to task-specific USD, guarded object insertion, and simulation bundles."""

__version__ = "0.1.0"
