"""Reconfigurable holographic surface (RHS) simulation and optimization toolkit."""

__version__ = "0.1.0"
SCHEMA_VERSION = "1"
