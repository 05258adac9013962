"""Extreme Learning Machines with tunable random embeddings, a gradient-descent
MLP baseline with empirical NTK analysis, and a benchmark harness for
spectral-bias experiments on sinusoidal targets."""

__version__ = "0.1.0"
