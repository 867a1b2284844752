"""Risk-averse two-stage and multistage stochastic facility location."""

__version__ = "0.1.0"
