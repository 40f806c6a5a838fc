"""streamprune: on-the-fly, class-imbalance-aware pruning of streaming ensembles."""

__version__ = "0.1.0"
