"""Monte-Carlo tree search for neural architecture search with a learned surrogate."""

__version__ = "0.1.0"
