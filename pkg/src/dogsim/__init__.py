"""Distributed online greedy sensor selection: protocols, algorithms, simulator."""

__version__ = "0.1.0"
