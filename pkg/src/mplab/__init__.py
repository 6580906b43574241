"""Monte Carlo lab for Lyapunov exponents of Ginibre matrix products."""

__version__ = "0.1.0"
