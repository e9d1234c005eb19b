"""Encrypted GNN inference with degree-based pruning and adaptive polynomial activations."""

__version__ = "0.1.0"
