"""pricemix - equilibrium pricing for sellers with random availability."""

__version__ = "0.1.0"
