"""State-space decomposition and irreducibility analysis for stochastic reaction networks."""

__version__ = "0.1.0"
