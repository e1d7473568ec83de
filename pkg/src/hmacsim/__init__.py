"""Discrete-event simulator of hybrid-priority (H-MAC) and EDCA wireless MAC."""

__version__ = "0.1.0"
