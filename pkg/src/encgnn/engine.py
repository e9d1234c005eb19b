"""Encrypted GNN inference with mask-based pruning and adaptive activations.

Two execution modes share the same variants:

* ``protocol``: column-packed features, diagonal-packed adjacency.  The server
  never learns which nodes are pruned; pruning zeroes slots and every
  activation polynomial is evaluated on every column.
* ``compaction``: an experiment-harness mode where the partition is known in
  plaintext.  Pruned nodes are dropped, each retained node gets one ciphertext
  holding its feature row, and each node is activated with its own band's
  polynomial, so op counts track the number and importance of retained nodes.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph.io import ModelError, ModelWeights, PlainGraph
from .graph.pack import EncGraph
from .he.api import Backend, Ciphertext, KeySet, cmp_depth, poly_depth
from .he.errors import DepthExhaustedError, ParameterError
from .he.profile import OpProfile
from .importance import (
    MaskSet,
    PlainMasks,
    Thresholds,
    encrypted_degree,
    generate_masks,
    oracle_masks,
)

PRESET_DEGREES = {"PSet1": (7, 5, 3), "PSet2": (5, 3, 2), "PSet3": (3, 2, 1)}
MODES = ("protocol", "compaction")


class DepthBudgetError(DepthExhaustedError):
    def __init__(self, stage: str, needed: int, available: int):
        super().__init__(f"stage {stage!r} needs depth {needed} but only {available} levels are available")
        self.stage = stage
        self.needed = needed
        self.available = available


def _relu_table() -> dict[int, list[float]]:
    text = resources.files("encgnn.data").joinpath("poly_relu.json").read_text()
    return {int(e["degree"]): [float(c) for c in e["coeffs"]] for e in json.loads(text)}


@dataclass(frozen=True)
class PolyActivationSet:
    """One activation polynomial per importance band, highest degree first."""

    polys: tuple[tuple[float, ...], ...]
    name: str = "custom"

    def __post_init__(self):
        polys = tuple(tuple(float(c) for c in p) for p in self.polys)
        object.__setattr__(self, "polys", polys)
        if not polys:
            raise ParameterError("need at least one polynomial")
        degs = self.degrees
        if any(a <= b for a, b in zip(degs, degs[1:])):
            raise ParameterError(f"degrees must be strictly decreasing, got {list(degs)}")

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(p) - 1 for p in self.polys)

    @property
    def m(self) -> int:
        return len(self.polys)

    @classmethod
    def preset(cls, name: str) -> "PolyActivationSet":
        if name not in PRESET_DEGREES:
            raise ParameterError(f"unknown polynomial preset {name!r}")
        table = _relu_table()
        return cls(tuple(tuple(table[d]) for d in PRESET_DEGREES[name]), name)

    @classmethod
    def from_degrees(cls, degrees: Sequence[int], table: dict[int, list[float]] | None = None) -> "PolyActivationSet":
        table = table or _relu_table()
        missing = [d for d in degrees if d not in table]
        if missing:
            raise ParameterError(f"no coefficients for degrees {missing}")
        return cls(tuple(tuple(table[d]) for d in degrees), "degrees" + "-".join(map(str, degrees)))

    @classmethod
    def from_file(cls, path, degrees: Sequence[int] | None = None) -> "PolyActivationSet":
        entries = json.loads(Path(path).read_text())
        table = {int(e["degree"]): [float(c) for c in e["coeffs"]] for e in entries}
        for d, c in table.items():
            if len(c) != d + 1:
                raise ParameterError(f"degree {d} entry has {len(c)} coefficients")
        degrees = degrees or sorted(table, reverse=True)
        obj = cls.from_degrees(degrees, table)
        return cls(obj.polys, Path(path).stem)

    def to_json(self) -> list[dict]:
        return [{"degree": len(p) - 1, "coeffs": list(p)} for p in self.polys]


class VariantKind(str, enum.Enum):
    FF = "FF"
    PO = "PO"
    AAO = "AAO"
    BFG = "BFG"


@dataclass(frozen=True)
class InferenceVariant:
    kind: VariantKind
    polys: PolyActivationSet | None = None
    uniform: tuple[float, ...] | None = None

    def __post_init__(self):
        kind = VariantKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (VariantKind.FF, VariantKind.AAO):
            if self.polys is None:
                raise ParameterError(f"{kind.value} needs a PolyActivationSet")
        else:
            if self.uniform is None:
                raise ParameterError(f"{kind.value} needs a uniform polynomial")
            object.__setattr__(self, "uniform", tuple(float(c) for c in self.uniform))

    @classmethod
    def build(cls, kind: str, polys: PolyActivationSet, uniform: Sequence[float] | None = None) -> "InferenceVariant":
        """Variant from a band set; PO/BFG default to the top band's polynomial."""
        kind = VariantKind(kind)
        if kind in (VariantKind.FF, VariantKind.AAO):
            return cls(kind, polys=polys)
        return cls(kind, uniform=tuple(uniform) if uniform is not None else polys.polys[0])

    @property
    def uses_levels(self) -> bool:
        return self.kind in (VariantKind.FF, VariantKind.AAO)

    @property
    def prunes(self) -> bool:
        return self.kind in (VariantKind.FF, VariantKind.PO)

    @property
    def needs_masks(self) -> bool:
        return self.kind != VariantKind.BFG

    def band_polys(self) -> tuple[tuple[float, ...], ...]:
        return self.polys.polys if self.uses_levels else (self.uniform,)


@dataclass
class EngineConfig:
    mode: str = "protocol"
    delta: float | None = None
    sharpen: int = 1
    ones_mode: str = "encrypted"
    strategy: str = "horner"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")
        if self.sharpen < 1:
            raise ParameterError("sharpen must be >= 1")


@dataclass
class DepthEstimate:
    total: int
    trace: list[tuple[str, int]] = field(default_factory=list)

    def first_exceeding(self, budget: int) -> tuple[str, int] | None:
        for stage, depth in self.trace:
            if depth > budget:
                return stage, depth
        return None


@dataclass
class EncActivations:
    cols: list[Ciphertext]
    layer: int


# ---------------------------------------------------------------------------
# depth bookkeeping

def estimate_depth(variant: InferenceVariant, n_layers: int, cfg: EngineConfig | None = None,
                   m: int | None = None, bands_present: Sequence[int] | None = None) -> DepthEstimate:
    """Multiplicative depth of :func:`run_inference` and the per-stage trace.

    ``m`` is the number of thresholds (defaults to the variant's band count).
    ``bands_present`` (compaction mode) lists the band indices, 1-based, that
    contain at least one retained node.
    """
    cfg = cfg or EngineConfig()
    strat = cfg.strategy
    polys = variant.band_polys()
    m = m if m is not None else (variant.polys.m if variant.uses_levels else 1)
    trace: list[tuple[str, int]] = []

    if cfg.mode == "compaction":
        if variant.uses_levels:
            present = sorted(set(bands_present)) if bands_present is not None else list(range(1, len(polys) + 1))
            act = max((poly_depth(len(polys[i - 1]) - 1, strat) for i in present), default=0)
        else:
            act = poly_depth(len(polys[0]) - 1, strat)
        h = 0
        for layer in range(n_layers):
            h += 2
            trace.append((f"layer{layer}.combine", h))
            if layer < n_layers - 1:
                h += act
                trace.append((f"layer{layer}.activation", h))
        return DepthEstimate(max(d for _, d in trace), trace)

    d_score = 1 if cfg.ones_mode == "encrypted" else 0
    a = h = 0
    masks: list[int] = []
    if variant.needs_masks:
        trace.append(("scores", d_score))
        d_cmp = d_score + cmp_depth(cfg.sharpen, strat)
        if variant.uses_levels:
            masks = [d_cmp] + [d_cmp + 1] * (m - 1)
            trace.append(("masks", max(masks)))
        else:
            trace.append(("masks", d_cmp))
        if variant.prunes:
            h, a = d_cmp + 1, d_cmp + 2
            trace.append(("prune", a))
    for layer in range(n_layers):
        z = max(a, h) + 2
        trace.append((f"layer{layer}.combine", z))
        if layer < n_layers - 1:
            if variant.uses_levels:
                h = max(max(z + poly_depth(len(p) - 1, strat), mk) + 1 for p, mk in zip(polys, masks))
            else:
                h = z + poly_depth(len(polys[0]) - 1, strat)
            trace.append((f"layer{layer}.activation", h))
    return DepthEstimate(max(d for _, d in trace), trace)


def check_depth(est: DepthEstimate, levels: int) -> None:
    bad = est.first_exceeding(levels)
    if bad is not None:
        raise DepthBudgetError(bad[0], bad[1], levels)


# ---------------------------------------------------------------------------
# protocol-mode building blocks

def apply_prune(g: EncGraph, M0: Ciphertext, backend: Backend, keys: KeySet) -> EncGraph:
    """Zero pruned nodes' features and every edge touching a pruned node."""
    keep = backend.one_minus(M0)
    feats = [backend.mult_any(x, keep, keys) for x in g.feature_cols]
    diags = []
    rot = keep
    for d, diag in enumerate(g.adj_diagonals):
        if d:
            rot = backend.rotate(rot, 1, keys)
        diags.append(backend.mult_any(backend.mult_any(diag, keep, keys), rot, keys))
    return EncGraph(diags, feats, g.n, g.d0)


def aggregate(diags: Sequence[Ciphertext], col: Ciphertext, backend: Backend, keys: KeySet) -> Ciphertext:
    """``A @ col`` as ``sum_d diag_d * rot(col, d)``."""
    terms = []
    rot = col
    for d, diag in enumerate(diags):
        if d:
            rot = backend.rotate(rot, 1, keys)
        terms.append(backend.mult_any(diag, rot, keys))
    return backend.sum_any(terms)


def layer_preactivation(diags: Sequence[Ciphertext], H: EncActivations, layer, backend: Backend,
                        keys: KeySet) -> EncActivations:
    """``Z = (A H) W1 + H W2 + b`` on column-packed activations."""
    d_in, d_out = layer.W1.shape
    if len(H.cols) != d_in:
        raise ModelError(f"layer expects {d_in} input columns, got {len(H.cols)}")
    prof = backend.profiler
    with prof.stage(f"layer{H.layer}.aggregate"):
        agg = [aggregate(diags, col, backend, keys) for col in H.cols]
    out = []
    with prof.stage(f"layer{H.layer}.combine"):
        for j in range(d_out):
            terms = [backend.mult_const(agg[k], layer.W1[k, j]) for k in range(d_in)]
            terms += [backend.mult_const(H.cols[k], layer.W2[k, j]) for k in range(d_in)]
            out.append(backend.add_const(backend.sum_any(terms), layer.b[j]))
    return EncActivations(out, H.layer)


def adaptive_activation(Z: EncActivations, masks: MaskSet, polys: PolyActivationSet, backend: Backend,
                        keys: KeySet, strategy: str = "horner") -> EncActivations:
    """``sum_i M_i * P_i(Z)`` per column."""
    if masks.m != polys.m:
        raise ParameterError(f"{masks.m} level masks but {polys.m} polynomials")
    out = []
    with backend.profiler.stage(f"layer{Z.layer}.activation"):
        for col in Z.cols:
            branches = [backend.mult_any(mask, backend.poly_eval(p, col, keys, strategy), keys)
                        for mask, p in zip(masks.levels, polys.polys)]
            out.append(backend.sum_any(branches))
    return EncActivations(out, Z.layer + 1)


def uniform_activation(Z: EncActivations, coeffs, backend: Backend, keys: KeySet,
                       strategy: str = "horner") -> EncActivations:
    with backend.profiler.stage(f"layer{Z.layer}.activation"):
        cols = [backend.poly_eval(coeffs, c, keys, strategy) for c in Z.cols]
    return EncActivations(cols, Z.layer + 1)


def encrypt_masks(pm: PlainMasks, backend: Backend, keys: KeySet, level: int | None = None) -> MaskSet:
    """Encrypt plaintext (e.g. oracle) masks so they can stand in for generated ones."""
    return MaskSet(backend.encrypt(pm.M0, keys, level), [backend.encrypt(x, keys, level) for x in pm.levels])


# ---------------------------------------------------------------------------
# full pipeline

@dataclass
class InferenceResult:
    logits: list[Ciphertext]
    profile: OpProfile
    depth: DepthEstimate
    mode: str
    retained: np.ndarray | None = None   # compaction mode: node ids of the output rows
    fill: np.ndarray | None = None       # compaction mode: logits reported for dropped nodes

    def decrypt(self, backend: Backend, keys: KeySet, n: int | None = None) -> np.ndarray:
        """Decrypted ``n x classes`` logits matrix."""
        if self.mode == "protocol":
            return np.stack([backend.decrypt(c, keys) for c in self.logits], axis=1)
        width = len(self.fill)
        n = n if n is not None else (int(self.retained.max()) + 1 if len(self.retained) else 0)
        out = np.tile(self.fill, (n, 1)).astype(np.float64)
        for row, v in zip(self.logits, self.retained):
            out[v] = backend.decrypt(row, keys)[:width]
        return out


def run_inference(g: EncGraph | PlainGraph, w: ModelWeights, tau: Thresholds | Sequence[float] | None,
                  variant: InferenceVariant, backend: Backend, keys: KeySet,
                  cfg: EngineConfig | None = None, masks: MaskSet | PlainMasks | None = None) -> InferenceResult:
    """Run one variant end to end and return encrypted logits with the op profile.

    In protocol mode ``g`` is an :class:`EncGraph`; ``masks`` optionally replaces
    encrypted mask generation (e.g. with encrypted oracle masks).  In compaction
    mode ``g`` is the :class:`PlainGraph` known to the experiment harness and the
    partition comes from ``masks`` (plain) or hard thresholds.
    """
    cfg = cfg or EngineConfig()
    if cfg.mode == "compaction":
        if not isinstance(g, PlainGraph):
            raise ParameterError("compaction mode needs the plaintext graph")
        return _run_compacted(g, w, tau, variant, backend, keys, cfg, masks)
    if not isinstance(g, EncGraph):
        raise ParameterError("protocol mode needs an EncGraph")
    w.validate(g.d0)
    tau = _thresholds(tau, variant)
    m = tau.m if tau is not None else None
    if variant.uses_levels and m != variant.polys.m:
        raise ParameterError(f"{m} thresholds but {variant.polys.m} polynomials")
    est = estimate_depth(variant, w.L, cfg, m=m)
    top = g.feature_cols[0].level
    check_depth(est, top)
    prof = backend.profiler
    delta = cfg.delta if cfg.delta is not None else g.n

    with prof.scope() as profile:
        maskset = None
        if variant.needs_masks:
            if isinstance(masks, MaskSet):
                maskset = masks
            elif isinstance(masks, PlainMasks):
                maskset = encrypt_masks(masks, backend, keys, top)
            else:
                with prof.stage("scores"):
                    s = encrypted_degree(g, backend, keys, cfg.ones_mode)
                with prof.stage("masks"):
                    maskset = generate_masks(s, tau, delta, cfg.sharpen, backend, keys,
                                             cfg.strategy, levels=variant.uses_levels)
        graph = g
        if variant.prunes:
            with prof.stage("prune"):
                graph = apply_prune(g, maskset.M0, backend, keys)
        if variant.kind == VariantKind.AAO:
            lv = list(maskset.levels)
            lv[-1] = backend.add_any(lv[-1], maskset.M0)  # unpruned low-degree nodes join the last band
            maskset = MaskSet(maskset.M0, lv)
        H = EncActivations(graph.feature_cols, 0)
        for li, layer in enumerate(w.layers):
            Z = layer_preactivation(graph.adj_diagonals, H, layer, backend, keys)
            if li == w.L - 1:
                H = Z
            elif variant.uses_levels:
                H = adaptive_activation(Z, maskset, variant.polys, backend, keys, cfg.strategy)
            else:
                H = uniform_activation(Z, variant.uniform, backend, keys, cfg.strategy)
    return InferenceResult(H.cols, profile, est, "protocol")


def _thresholds(tau, variant: InferenceVariant) -> Thresholds | None:
    if tau is None:
        if variant.needs_masks:
            raise ParameterError(f"{variant.kind.value} needs thresholds")
        return None
    return tau if isinstance(tau, Thresholds) else Thresholds(tuple(tau))


def partition_for(variant: InferenceVariant, pm: PlainMasks | None, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Retained node ids and their 1-based band (0 = uniform polynomial)."""
    if variant.kind == VariantKind.BFG or pm is None:
        return np.arange(n), np.zeros(n, dtype=np.int64)
    lvl = pm.level_of()
    if variant.kind == VariantKind.AAO:
        lvl = np.where(lvl == 0, pm.m, lvl)
        return np.arange(n), lvl
    keep = np.nonzero(lvl > 0)[0]
    bands = lvl[keep] if variant.kind == VariantKind.FF else np.zeros(len(keep), dtype=np.int64)
    return keep, bands


def _row_diagonals(mat: np.ndarray, D: int) -> dict[int, np.ndarray]:
    """Nonzero in-slot diagonals of ``h -> mat.T @ h`` on width-``D`` rows."""
    pad = np.zeros((D, D))
    pad[: mat.shape[1], : mat.shape[0]] = mat.T
    j = np.arange(D)
    out = {}
    for t in range(D):
        diag = pad[j, (j + t) % D]
        if t == 0 or np.any(diag != 0):
            out[t] = diag
    return out


def _run_compacted(g: PlainGraph, w: ModelWeights, tau, variant: InferenceVariant, backend: Backend,
                   keys: KeySet, cfg: EngineConfig, masks) -> InferenceResult:
    w.validate(g.d0)
    if isinstance(masks, MaskSet):
        raise ParameterError("compaction mode takes plaintext masks")
    pm = masks
    if pm is None and variant.needs_masks:
        tau = _thresholds(tau, variant)
        pm = oracle_masks(g, tau)
    if variant.uses_levels and pm is not None and pm.m != variant.polys.m:
        raise ParameterError(f"{pm.m} bands but {variant.polys.m} polynomials")
    retained, bands = partition_for(variant, pm, g.n)
    present = sorted(set(bands.tolist())) if variant.uses_levels else None
    est = estimate_depth(variant, w.L, cfg, bands_present=present)
    check_depth(est, backend.params.levels)
    D = max(w.dims)
    if D > backend.params.slots:
        raise ParameterError("feature width exceeds slot capacity")
    polys = variant.band_polys()
    prof = backend.profiler
    sub = g.adjacency[np.ix_(retained, retained)]
    fill = w.layers[-1].b.copy()

    with prof.scope() as profile:
        rows = [backend.encrypt(np.pad(g.features[v], (0, D - g.d0)), keys) for v in retained]
        adj = [[backend.encrypt(np.full(D, sub[i, j]), keys) for j in range(len(retained))]
               for i in range(len(retained))]
        for li, layer in enumerate(w.layers):
            with prof.stage(f"layer{li}.aggregate"):
                agg = [backend.sum_any([backend.mult_any(adj[i][j], rows[j], keys)
                                        for j in range(len(rows))]) if rows else None
                       for i in range(len(rows))]
            with prof.stage(f"layer{li}.combine"):
                d1 = _row_diagonals(layer.W1, D)
                d2 = _row_diagonals(layer.W2, D)
                bias = np.pad(layer.b, (0, D - layer.b.size))
                new = []
                for i in range(len(rows)):
                    terms = [backend.mult_plain(backend.rotate(agg[i], t, keys), diag) for t, diag in d1.items()]
                    terms += [backend.mult_plain(backend.rotate(rows[i], t, keys), diag) for t, diag in d2.items()]
                    new.append(backend.add_const(backend.sum_any(terms), bias))
            if li < w.L - 1:
                with prof.stage(f"layer{li}.activation"):
                    new = [backend.poly_eval(polys[max(b, 1) - 1], z, keys, cfg.strategy)
                           for z, b in zip(new, bands)]
            rows = new
    return InferenceResult(rows, profile, est, "compaction", retained=retained, fill=fill)


def stage_counts(profile: OpProfile, suffix: str) -> dict[str, int]:
    """Counters summed over every stage whose name ends with ``suffix``."""
    total: dict[str, int] = {}
    for name, counts in profile.stages.items():
        if name.endswith(suffix):
            for k, v in counts.items():
                total[k] = total.get(k, 0) + v
    return total
