"""Simulator and analysis toolkit for Stark echo modulation memory sequences."""

__version__ = "0.1.0"
