"""Uplink interference coordination for a cellular-connected UAV."""

__version__ = "0.1.0"
