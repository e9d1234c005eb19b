"""Regenerate the bundled graph fixtures (needs networkx, not a runtime dependency)."""
import json
from pathlib import Path

import networkx as nx
import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "encgnn" / "data"


def features(labels, rng, sep, noise):
    centers = np.array([[sep, 0.0, sep / 2, 0.0], [0.0, sep, 0.0, sep / 2]])
    return np.round(centers[labels] + rng.normal(0, noise, size=(len(labels), 4)), 4)


def splits(labels, rng, frac=(0.5, 0.25)):
    idx = {"train": [], "val": [], "test": []}
    for c in np.unique(labels):
        nodes = rng.permutation(np.nonzero(labels == c)[0])
        a = int(round(frac[0] * len(nodes)))
        b = a + int(round(frac[1] * len(nodes)))
        idx["train"] += nodes[:a].tolist()
        idx["val"] += nodes[a:b].tolist()
        idx["test"] += nodes[b:].tolist()
    return {k: sorted(v) for k, v in idx.items()}


def dump(name, n, edges, labels, feats, spl):
    obj = {"n": n, "directed": False, "edges": [list(e) for e in edges],
           "features": feats.tolist(), "labels": labels.tolist(), "splits": spl}
    (OUT / f"{name}.json").write_text(json.dumps(obj, indent=1))


def demo16():
    rng = np.random.default_rng(16)
    edges = [(i, j) for i in range(6) for j in range(i + 1, 6)]
    edges += [(i, j) for i in range(6, 12) for j in range(i + 1, 12)]
    edges += [(5, 6), (0, 12), (1, 13), (7, 14), (8, 15)]
    labels = np.array([0] * 6 + [1] * 6 + [0, 0, 1, 1])
    dump("demo16", 16, edges, labels, features(labels, rng, 1.0, 0.3), splits(labels, rng))


def karate34():
    rng = np.random.default_rng(34)
    g = nx.karate_club_graph()
    labels = np.array([0 if g.nodes[v]["club"] == "Mr. Hi" else 1 for v in range(34)])
    edges = sorted(tuple(sorted(e)) for e in g.edges())
    dump("karate34", 34, edges, labels, features(labels, rng, 1.0, 0.9), splits(labels, rng))


if __name__ == "__main__":
    demo16()
    karate34()
