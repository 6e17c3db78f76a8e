"""Monotone traveling wavefronts for delayed non-local monostable equations."""

__version__ = "0.1.0"
