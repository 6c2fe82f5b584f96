"""Desk-scale numerical workbench for planar pinned distance sets."""

__version__ = "0.1.0"
