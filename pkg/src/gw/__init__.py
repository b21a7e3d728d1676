"""gw: a desk-scale federated scientific SQL platform."""

__version__ = "0.1.0"
