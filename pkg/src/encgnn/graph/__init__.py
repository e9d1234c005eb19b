"""Graph ingestion, model weights and ciphertext packing."""
from .io import (
    GraphFormatError,
    LayerWeights,
    ModelError,
    ModelWeights,
    PlainGraph,
    graph_from_json,
    load_fixture,
    load_graph,
    load_weights,
    save_graph,
    save_weights,
)
from .pack import EncGraph, diagonals, encrypt_graph, from_diagonals, unpack_graph

__all__ = [
    "EncGraph", "GraphFormatError", "LayerWeights", "ModelError", "ModelWeights", "PlainGraph",
    "diagonals", "encrypt_graph", "from_diagonals", "graph_from_json", "load_graph",
    "load_fixture", "load_weights", "save_graph", "save_weights", "unpack_graph",
]
