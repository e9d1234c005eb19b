"""Regenerate data/poly_relu.json: least-squares ReLU fits per degree.

The interval is sized to cover the layer-1 pre-activations seen on the bundled
fixtures (raw adjacency sums reach |z| ~ 18 on karate34).
"""
import json
from pathlib import Path

import numpy as np

BOUND = 20.0
OUT = Path(__file__).resolve().parents[1] / "src" / "encgnn" / "data" / "poly_relu.json"


def fit(degree: int, bound: float = BOUND, points: int = 4001) -> list[float]:
    x = np.linspace(-bound, bound, points)
    coeffs = np.polynomial.polynomial.polyfit(x, np.maximum(x, 0.0), degree)
    # relu = x/2 + |x|/2 and |x| is even: on a symmetric grid the odd part is exactly x/2
    coeffs[1::2] = 0.0
    coeffs[1] = 0.5
    return [float(f"{c:.12g}") for c in coeffs]


def main():
    table = [{"degree": d, "interval": [-BOUND, BOUND], "coeffs": fit(d)} for d in range(1, 8)]
    OUT.write_text("[\n" + ",\n".join(" " + json.dumps(e) for e in table) + "\n]\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
