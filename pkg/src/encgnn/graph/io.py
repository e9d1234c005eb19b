"""Plaintext graph and weight containers plus their file loaders."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GraphFormatError(ValueError):
    """Malformed graph input; the message carries file and line context."""


class ModelError(ValueError):
    """Inconsistent model weights."""


@dataclass
class PlainGraph:
    adjacency: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    splits: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        n = self.adjacency.shape[0]
        if self.adjacency.shape != (n, n):
            raise GraphFormatError(f"adjacency must be square, got {self.adjacency.shape}")
        if not np.all(np.isfinite(self.adjacency)):
            raise GraphFormatError("adjacency has non-finite entries")
        if self.features.shape[0] != n:
            raise GraphFormatError(f"{self.features.shape[0]} feature rows for {n} nodes")
        if not np.all(np.isfinite(self.features)):
            raise GraphFormatError("features have non-finite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise GraphFormatError(f"{len(self.labels)} labels for {n} nodes")
        self.splits = {k: np.asarray(v, dtype=np.int64) for k, v in self.splits.items()}
        for name, idx in self.splits.items():
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise GraphFormatError(f"split {name!r} references a node outside 0..{n - 1}")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def d0(self) -> int:
        return self.features.shape[1]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def to_json(self) -> dict:
        rows, cols = np.nonzero(self.adjacency)
        edges = []
        for u, v in zip(rows.tolist(), cols.tolist()):
            w = float(self.adjacency[u, v])
            edges.append([u, v] if w == 1.0 else [u, v, w])
        out = {"n": self.n, "directed": True, "edges": edges, "features": self.features.tolist()}
        if self.labels is not None:
            out["labels"] = self.labels.tolist()
        if self.splits:
            out["splits"] = {k: v.tolist() for k, v in self.splits.items()}
        return out


def _add_edge(adj: np.ndarray, u, v, w, directed: bool, where: str) -> None:
    n = adj.shape[0]
    try:
        u, v, w = int(u), int(v), float(w)
    except (TypeError, ValueError):
        raise GraphFormatError(f"{where}: edge entries must be numeric") from None
    if not (0 <= u < n and 0 <= v < n):
        raise GraphFormatError(f"{where}: edge ({u}, {v}) references a node outside 0..{n - 1}")
    if not np.isfinite(w):
        raise GraphFormatError(f"{where}: non-finite edge weight")
    adj[u, v] = w
    if not directed:
        adj[v, u] = w


def graph_from_json(obj: dict, source: str = "<json>") -> PlainGraph:
    try:
        n = int(obj["n"])
    except (KeyError, TypeError, ValueError):
        raise GraphFormatError(f"{source}: missing or invalid 'n'") from None
    directed = bool(obj.get("directed", False))
    adj = np.zeros((n, n))
    for i, e in enumerate(obj.get("edges", [])):
        if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
            raise GraphFormatError(f"{source}: edges[{i}] must be [u, v] or [u, v, w]")
        _add_edge(adj, e[0], e[1], e[2] if len(e) == 3 else 1.0, directed, f"{source}: edges[{i}]")
    feats = obj.get("features")
    if feats is None:
        feats = np.ones((n, 1))
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] != n:
        raise GraphFormatError(f"{source}: features must be an {n} x d matrix")
    splits = obj.get("splits") or {}
    return PlainGraph(adj, feats, obj.get("labels"), splits)


def _load_edge_list(path: Path, features_path: Path | None) -> PlainGraph:
    edges = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"{path}:{lineno}: expected 'u v' or 'u v w', got {line!r}")
        edges.append((lineno, parts))
    labels = None
    if features_path is None:
        sidecar = path.with_suffix(".csv")
        features_path = sidecar if sidecar.exists() else None
    if features_path is not None:
        feats, labels = _load_feature_csv(features_path)
        n = feats.shape[0]
    else:
        ids = [int(p) for _, parts in edges for p in parts[:2] if p.lstrip("-").isdigit()]
        n = max(ids) + 1 if ids else 0
        feats = np.ones((n, 1))
    adj = np.zeros((n, n))
    for lineno, parts in edges:
        w = parts[2] if len(parts) == 3 else 1.0
        _add_edge(adj, parts[0], parts[1], w, False, f"{path}:{lineno}")
    return PlainGraph(adj, feats, labels)


def _load_feature_csv(path: Path) -> tuple[np.ndarray, np.ndarray | None]:
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise GraphFormatError(f"{path}: empty feature file")
    header = None
    try:
        float(rows[0][0])
    except ValueError:
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    label_col = header.index("label") if header and "label" in header else None
    feats, labels = [], []
    width = None
    for lineno, row in enumerate(rows, 2 if header else 1):
        vals = [c for i, c in enumerate(row) if i != label_col]
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise GraphFormatError(f"{path}:{lineno}: expected {width} features, got {len(vals)}")
        try:
            feats.append([float(c) for c in vals])
            if label_col is not None:
                labels.append(int(row[label_col]))
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: non-numeric entry") from None
    return np.array(feats), (np.array(labels) if label_col is not None else None)


def load_graph(path, features_path=None) -> PlainGraph:
    """Load a graph from JSON or from a whitespace edge list plus feature CSV."""
    path = Path(path)
    if not path.exists():
        raise GraphFormatError(f"{path}: no such file")
    if path.suffix == ".json":
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"{path}:{exc.lineno}: {exc.msg}") from None
        return graph_from_json(obj, str(path))
    return _load_edge_list(path, Path(features_path) if features_path else None)


def save_graph(g: PlainGraph, path) -> None:
    Path(path).write_text(json.dumps(g.to_json()))


@dataclass
class LayerWeights:
    W1: np.ndarray
    W2: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W1 = np.atleast_2d(np.asarray(self.W1, dtype=np.float64))
        self.W2 = np.atleast_2d(np.asarray(self.W2, dtype=np.float64))
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)

    @property
    def d_in(self) -> int:
        return self.W1.shape[0]

    @property
    def d_out(self) -> int:
        return self.W1.shape[1]


@dataclass
class ModelWeights:
    layers: list[LayerWeights]

    def __post_init__(self):
        self.validate()

    @property
    def L(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].d_in] + [lw.d_out for lw in self.layers]

    def validate(self, d0: int | None = None) -> None:
        if not self.layers:
            raise ModelError("model has no layers")
        prev = d0 if d0 is not None else self.layers[0].d_in
        for i, lw in enumerate(self.layers):
            for name, mat in (("W1", lw.W1), ("W2", lw.W2)):
                if mat.shape[0] != prev:
                    raise ModelError(f"layer {i} {name} expects input dim {mat.shape[0]}, chain has {prev}")
            if lw.W2.shape[1] != lw.W1.shape[1]:
                raise ModelError(f"layer {i} W1/W2 output dims differ")
            if lw.b.shape != (lw.W1.shape[1],):
                raise ModelError(f"layer {i} bias has length {lw.b.size}, expected {lw.W1.shape[1]}")
            for mat in (lw.W1, lw.W2, lw.b):
                if not np.all(np.isfinite(mat)):
                    raise ModelError(f"layer {i} has non-finite weights")
            prev = lw.W1.shape[1]

    def to_json(self) -> dict:
        return {"layers": [{"W1": lw.W1.tolist(), "W2": lw.W2.tolist(), "b": lw.b.tolist()}
                           for lw in self.layers]}

    @classmethod
    def from_json(cls, obj: dict) -> "ModelWeights":
        try:
            return cls([LayerWeights(l["W1"], l["W2"], l["b"]) for l in obj["layers"]])
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed weights: {exc}") from None


def load_weights(path) -> ModelWeights:
    return ModelWeights.from_json(json.loads(Path(path).read_text()))


def save_weights(w: ModelWeights, path) -> None:
    # repr-exact floats keep the roundtrip lossless
    Path(path).write_text(json.dumps(w.to_json()))


FIXTURES = ("demo16", "karate34")


def load_fixture(name: str) -> PlainGraph:
    """One of the bundled graphs (``demo16`` or ``karate34``)."""
    from importlib import resources

    if name not in FIXTURES:
        raise GraphFormatError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    text = resources.files("encgnn.data").joinpath(f"{name}.json").read_text()
    return graph_from_json(json.loads(text), name)
