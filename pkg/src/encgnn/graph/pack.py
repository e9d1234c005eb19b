"""Diagonal packing of the adjacency and column packing of the features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..he.api import Backend, Ciphertext, KeySet
from ..he.errors import CapacityError
from .io import PlainGraph


def diagonals(adj: np.ndarray) -> np.ndarray:
    """Row ``d`` holds ``adj[v, (v + d) % n]`` for every node ``v``."""
    n = adj.shape[0]
    v = np.arange(n)
    return np.stack([adj[v, (v + d) % n] for d in range(n)]) if n else np.zeros((0, 0))


def from_diagonals(diags: np.ndarray) -> np.ndarray:
    n = diags.shape[0]
    adj = np.zeros((n, n), dtype=diags.dtype)
    v = np.arange(n)
    for d in range(n):
        adj[v, (v + d) % n] = diags[d]
    return adj


@dataclass
class EncGraph:
    adj_diagonals: list[Ciphertext]
    feature_cols: list[Ciphertext]
    n: int
    d0: int


def encrypt_graph(g: PlainGraph, backend: Backend, keys: KeySet, level: int | None = None) -> EncGraph:
    if g.n > backend.params.slots:
        raise CapacityError(f"{g.n} nodes exceed {backend.params.slots} slots")
    diags = [backend.encrypt(row, keys, level) for row in diagonals(g.adjacency)]
    cols = [backend.encrypt(g.features[:, j], keys, level) for j in range(g.d0)]
    return EncGraph(diags, cols, g.n, g.d0)


def unpack_graph(enc: EncGraph, backend: Backend, keys: KeySet) -> tuple[np.ndarray, np.ndarray]:
    diags = np.stack([backend.decrypt(c, keys) for c in enc.adj_diagonals])
    feats = np.stack([backend.decrypt(c, keys) for c in enc.feature_cols], axis=1)
    return from_diagonals(diags), feats
