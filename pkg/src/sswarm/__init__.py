"""Semi-supervised cluster-and-label classification with particle swarms."""
__version__ = "0.1.0"
