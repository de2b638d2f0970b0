"""Markov products of tail dependence functions."""

__version__ = "0.1.0"
