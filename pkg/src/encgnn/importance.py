"""Encrypted degree scoring and partitioning of nodes into prune/level masks."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graph.io import PlainGraph
from .graph.pack import EncGraph
from .he.api import CMP_COEFFS, STEP_COEFFS, Backend, Ciphertext, KeySet
from .he.errors import ParameterError

ONES_MODES = ("encrypted", "plaintext")


@dataclass(frozen=True)
class Thresholds:
    """Degree thresholds ``tau_1 > ... > tau_m`` in raw degree units."""

    tau: tuple[float, ...]

    def __post_init__(self):
        tau = tuple(float(t) for t in self.tau)
        object.__setattr__(self, "tau", tau)
        if not tau:
            raise ParameterError("need at least one threshold")
        if not all(np.isfinite(tau)):
            raise ParameterError("thresholds must be finite")
        if any(a <= b for a, b in zip(tau, tau[1:])):
            raise ParameterError(f"thresholds must be strictly decreasing, got {list(tau)}")

    @property
    def m(self) -> int:
        return len(self.tau)

    def __iter__(self):
        return iter(self.tau)


@dataclass
class ScoreVector:
    s_tilde: Ciphertext


@dataclass
class MaskSet:
    M0: Ciphertext
    levels: list[Ciphertext]

    @property
    def m(self) -> int:
        return len(self.levels)


@dataclass
class PlainMasks:
    """Hard (0/1) masks computed in plaintext; ``M0`` marks pruned nodes."""

    M0: np.ndarray
    levels: list[np.ndarray]

    @property
    def m(self) -> int:
        return len(self.levels)

    def level_of(self) -> np.ndarray:
        """0 for pruned nodes, ``i`` for nodes in band ``i``."""
        out = np.zeros(len(self.M0), dtype=np.int64)
        for i, mask in enumerate(self.levels, 1):
            out[mask.astype(bool)] = i
        return out

    def stack(self) -> np.ndarray:
        return np.stack([self.M0, *self.levels])


def encrypted_degree(g: EncGraph, backend: Backend, keys: KeySet,
                     ones_mode: str = "encrypted") -> ScoreVector:
    """Row sums of the encrypted adjacency via the diagonal matvec with a ones vector."""
    if ones_mode not in ONES_MODES:
        raise ParameterError(f"ones_mode must be one of {ONES_MODES}")
    if ones_mode == "plaintext":
        # every rotation of a public all-ones vector is all-ones: plain diagonal sum
        return ScoreVector(backend.sum_any(g.adj_diagonals))
    ones = backend.encrypt(np.ones(g.n), keys, g.adj_diagonals[0].level)
    terms = []
    rot = ones
    for d, diag in enumerate(g.adj_diagonals):
        if d:
            rot = backend.rotate(rot, 1, keys)
        terms.append(backend.mult_any(diag, rot, keys))
    return ScoreVector(backend.sum_any(terms))


def generate_masks(s: ScoreVector | Ciphertext, tau: Thresholds | Sequence[float], delta: float,
                   sharpen: int, backend: Backend, keys: KeySet, strategy: str = "horner",
                   levels: bool = True) -> MaskSet:
    """Prune mask ``1 - cmp(s, tau_m)`` and level masks ``cmp(s, tau_i) * (1 - cmp(s, tau_{i-1}))``.

    With ``levels=False`` only the prune mask is produced.
    """
    tau = tau if isinstance(tau, Thresholds) else Thresholds(tuple(tau))
    st = s.s_tilde if isinstance(s, ScoreVector) else s
    need = range(tau.m) if levels else [tau.m - 1]
    cmps = {i: backend.aprx_cmp(st, tau.tau[i], delta, sharpen, keys, strategy) for i in need}
    M0 = backend.one_minus(cmps[tau.m - 1])
    out = []
    if levels:
        for i in range(tau.m):
            if i == 0:
                out.append(cmps[0])  # cmp against tau_0 = inf is identically 0
            else:
                out.append(backend.mult_any(cmps[i], backend.one_minus(cmps[i - 1]), keys))
    return MaskSet(M0, out)


def oracle_masks(g: PlainGraph | np.ndarray, tau: Thresholds | Sequence[float]) -> PlainMasks:
    """Hard-threshold masks: band ``i`` iff ``tau_i <= deg < tau_{i-1}``, pruned iff ``deg < tau_m``."""
    tau = tau if isinstance(tau, Thresholds) else Thresholds(tuple(tau))
    deg = g.degrees() if isinstance(g, PlainGraph) else np.asarray(g, dtype=np.float64)
    upper = np.inf
    levels = []
    for t in tau:
        levels.append(((deg >= t) & (deg < upper)).astype(np.int64))
        upper = t
    return PlainMasks((deg < tau.tau[-1]).astype(np.int64), levels)


def _cubic_exact(coeffs, x: np.ndarray) -> np.ndarray:
    c0, c1, c2, c3 = (Fraction(c) for c in coeffs)
    return np.array([c0 + c1 * v + c2 * v * v + c3 * v * v * v for v in x], dtype=object)


def _cmp_exact(x: np.ndarray, sharpen: int) -> np.ndarray:
    for _ in range(sharpen - 1):
        x = _cubic_exact(STEP_COEFFS, x)
    return _cubic_exact(CMP_COEFFS, x)


def soft_masks(degrees, tau: Thresholds | Sequence[float], delta, sharpen: int,
               levels: bool = True) -> tuple[np.ndarray, list[np.ndarray]]:
    """Exact-rational evaluation of the mask formulas with the soft comparison."""
    tau = tau if isinstance(tau, Thresholds) else Thresholds(tuple(tau))
    deg = np.array([d if isinstance(d, Fraction) else Fraction(float(d)) for d in degrees], dtype=object)
    inv = Fraction(1) / Fraction(delta)
    need = range(tau.m) if levels else [tau.m - 1]
    cmps = {i: _cmp_exact((deg - Fraction(tau.tau[i])) * inv, sharpen) for i in need}
    M0 = 1 - cmps[tau.m - 1]
    out = []
    if levels:
        for i in range(tau.m):
            out.append(cmps[0] if i == 0 else cmps[i] * (1 - cmps[i - 1]))
    return M0, out


def thresholds_from_ratio(degrees, ratio: float, m: int) -> Thresholds:
    """Thresholds pruning roughly ``ratio`` of the nodes (lowest degrees first).

    ``tau_m`` sits midway between the k-th and (k+1)-th smallest degree with
    ``k = round(ratio * n)``; the upper thresholds split ``[tau_m, max + 0.5]``
    evenly.  Ties in the degree sequence can make the realised ratio smaller.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ParameterError(f"pruning ratio must lie in [0, 1], got {ratio}")
    if m < 1:
        raise ParameterError("m must be >= 1")
    deg = np.sort(np.asarray(degrees, dtype=np.float64))
    n = len(deg)
    if n == 0:
        raise ParameterError("empty graph")
    k = int(round(ratio * n))
    if k == 0:
        tau_m = deg[0] - 0.5
    elif k >= n:
        tau_m = deg[-1] + 0.5
    else:
        tau_m = (deg[k - 1] + deg[k]) / 2.0
    top = max(deg[-1] + 0.5, tau_m + 1.0)
    taus = [tau_m * i / m + top * (m - i) / m for i in range(1, m + 1)]
    return Thresholds(tuple(taus))
