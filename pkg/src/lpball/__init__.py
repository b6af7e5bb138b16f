"""Monte Carlo and quadrature checks for probabilistic geometry of l_p balls."""

__version__ = "0.1.0"
