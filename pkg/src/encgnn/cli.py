"""Command-line experiment runner.

Verbs: run, ablation, sweep, train, keygen, inspect.  Every run writes a JSON
report, appends a row to ``results.csv`` and stores the encrypted logits plus
the secret key needed by ``inspect``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .ckks import kernels
from .engine import (
    EngineConfig,
    InferenceResult,
    InferenceVariant,
    PolyActivationSet,
    check_depth,
    estimate_depth,
    partition_for,
    run_inference,
    stage_counts,
)
from .graph import PlainGraph, encrypt_graph, load_fixture, load_graph, load_weights, save_weights
from .graph.io import FIXTURES, ModelWeights
from .he import COUNTERS, HEParams, make_backend
from .he.serialize import ContainerError, pack, unpack
from .importance import Thresholds, oracle_masks, thresholds_from_ratio
from .plain import TrainConfig, accuracy, forward_design_plain, train_toy

log = logging.getLogger("encgnn")

CSV_COLUMNS = (
    "experiment_id", "graph", "variant", "backend", "mode", "poly_preset", "thresholds",
    "pruning_ratio", "pruned_nodes", "seed", "ring_degree", "levels",
    *COUNTERS, "activation_mult_ct", "max_depth_consumed", "estimated_depth",
    "agreement_soft", "agreement_hard", "test_accuracy", "wall_time_ms",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    graph_path: str = "fixture:demo16"
    weights_path: str | None = None
    train: dict | bool | None = None
    thresholds: list[float] | None = None
    pruning_ratio: float | None = None
    poly_preset: str | None = "PSet2"
    poly_file: str | None = None
    variant: str = "FF"
    backend: str = "sim"
    mode: str = "protocol"
    he_params: dict | None = None
    preset: str | None = None
    seed: int = 0
    sharpen: int = 1
    delta: float | None = None
    ones_mode: str = "encrypted"
    strategy: str = "horner"
    output_dir: str = "results"
    timing: bool = True
    sweep: dict = field(default_factory=dict)
    jobs: int = 1

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigError(f"config: unknown field(s) {unknown}")
        cfg = cls(**obj)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def fail(path, msg):
            raise ConfigError(f"config.{path}: {msg}")

        if self.variant not in ("FF", "PO", "AAO", "BFG"):
            fail("variant", f"unknown variant {self.variant!r}")
        if self.backend not in ("sim", "ckks"):
            fail("backend", f"unknown backend {self.backend!r}")
        if self.mode not in ("protocol", "compaction"):
            fail("mode", f"unknown mode {self.mode!r}")
        if self.weights_path is None and not self.train:
            fail("weights_path", "missing weights path and training is not enabled")
        if self.thresholds is not None and self.pruning_ratio is not None:
            fail("thresholds", "give either thresholds or pruning_ratio, not both")
        sw = self.sweep or {}
        unknown = sorted(set(sw) - {"ratios", "presets"})
        if unknown:
            fail("sweep", f"unknown field(s) {unknown}")
        for key in ("ratios", "presets"):
            if key in sw and not sw[key]:
                fail(f"sweep.{key}", "empty grid")
        swept = bool(sw.get("ratios"))
        if self.variant != "BFG" and self.thresholds is None and self.pruning_ratio is None and not swept:
            fail("thresholds", f"variant {self.variant} needs thresholds or pruning_ratio")
        if self.thresholds is not None:
            try:
                Thresholds(tuple(self.thresholds))
            except (ValueError, TypeError) as exc:
                fail("thresholds", str(exc))
        if self.pruning_ratio is not None and not 0 <= self.pruning_ratio <= 1:
            fail("pruning_ratio", "must lie in [0, 1]")
        if self.poly_preset is None and self.poly_file is None:
            fail("poly_preset", "need poly_preset or poly_file")
        if self.he_params is not None and self.preset is not None:
            fail("he_params", "give either he_params or preset, not both")
        if self.he_params is not None:
            try:
                HEParams.from_json(self.he_params)
            except ValueError as exc:
                fail("he_params", str(exc))
        if self.sharpen < 1:
            fail("sharpen", "must be >= 1")
        if isinstance(self.train, dict):
            try:
                TrainConfig(**self.train)
            except (TypeError, ValueError) as exc:
                fail("train", str(exc))
        if self.jobs < 1:
            fail("jobs", "must be >= 1")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            obj = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    else:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    return RunConfig.from_dict(obj)


def resolve_graph(spec: str) -> tuple[str, PlainGraph]:
    if spec.startswith("fixture:"):
        name = spec.split(":", 1)[1]
        return name, load_fixture(name)
    if spec in FIXTURES:
        return spec, load_fixture(spec)
    return Path(spec).stem, load_graph(spec)


def resolve_polys(cfg: RunConfig) -> PolyActivationSet:
    if cfg.poly_file:
        degrees = None
        if cfg.poly_preset:
            from .engine import PRESET_DEGREES
            degrees = PRESET_DEGREES.get(cfg.poly_preset)
        return PolyActivationSet.from_file(cfg.poly_file, degrees)
    return PolyActivationSet.preset(cfg.poly_preset)


def resolve_weights(cfg: RunConfig, g: PlainGraph) -> ModelWeights:
    if cfg.weights_path:
        return load_weights(cfg.weights_path)
    tc = TrainConfig(**cfg.train) if isinstance(cfg.train, dict) else TrainConfig(seed=cfg.seed)
    return train_toy(g, tc)


def resolve_thresholds(cfg: RunConfig, g: PlainGraph, m: int) -> Thresholds | None:
    if cfg.thresholds is not None:
        return Thresholds(tuple(cfg.thresholds))
    if cfg.pruning_ratio is not None:
        return thresholds_from_ratio(g.degrees(), cfg.pruning_ratio, m)
    return None


def resolve_params(cfg: RunConfig, depth: int) -> HEParams:
    if cfg.he_params is not None:
        return HEParams.from_json(cfg.he_params)
    if cfg.preset is not None:
        return HEParams.preset(cfg.preset)
    return HEParams.for_depth(max(depth, 1))


def _versions() -> dict:
    return {"encgnn": __version__, "numpy": np.__version__, "kernels": kernels.impl.IMPLEMENTATION}


def _experiment_id(cfg: RunConfig, graph_name: str, polys: PolyActivationSet) -> str:
    sel = (f"r{cfg.pruning_ratio:g}" if cfg.pruning_ratio is not None
           else "t" + "_".join(f"{t:g}" for t in cfg.thresholds) if cfg.thresholds else "none")
    return f"{graph_name}-{cfg.variant}-{cfg.backend}-{cfg.mode}-{polys.name}-{sel}-s{cfg.seed}"


def _agreement(a: np.ndarray, b: np.ndarray, idx: np.ndarray) -> float:
    if len(idx) == 0:
        return 1.0
    return float(np.mean(np.argmax(a[idx], 1) == np.argmax(b[idx], 1)))


def execute(cfg: RunConfig, weights: ModelWeights | None = None, write: bool = True,
            csv_row_out: bool = True) -> dict:
    """Run one experiment cell and return its report dictionary."""
    t0 = time.perf_counter()
    graph_name, g = resolve_graph(cfg.graph_path)
    polys = resolve_polys(cfg)
    w = weights if weights is not None else resolve_weights(cfg, g)
    w.validate(g.d0)
    variant = InferenceVariant.build(cfg.variant, polys)
    tau = resolve_thresholds(cfg, g, polys.m)
    ecfg = EngineConfig(mode=cfg.mode, delta=cfg.delta, sharpen=cfg.sharpen,
                        ones_mode=cfg.ones_mode, strategy=cfg.strategy)
    pm = oracle_masks(g, tau) if tau is not None else None
    present = None
    if cfg.mode == "compaction" and variant.uses_levels:
        present = sorted(set(partition_for(variant, pm, g.n)[1].tolist()))
    est = estimate_depth(variant, w.L, ecfg, m=tau.m if tau else None, bands_present=present)
    params = resolve_params(cfg, est.total)
    check_depth(est, params.levels)  # before any encryption work

    backend = make_backend(cfg.backend, params, cfg.seed)
    keys = backend.keygen()
    if cfg.mode == "protocol":
        enc = encrypt_graph(g, backend, keys)
        result = run_inference(enc, w, tau, variant, backend, keys, ecfg)
    else:
        result = run_inference(g, w, tau, variant, backend, keys, ecfg)
    logits = result.decrypt(backend, keys, g.n)

    soft = forward_design_plain(g, w, tau, variant, "soft", cfg.delta, cfg.sharpen).astype(np.float64)
    hard = forward_design_plain(g, w, tau, variant, "hard").astype(np.float64)
    retained = np.arange(g.n) if pm is None or not variant.prunes else np.nonzero(pm.M0 == 0)[0]
    test = g.splits.get("test")
    report = {
        "experiment_id": _experiment_id(cfg, graph_name, polys),
        "graph": graph_name,
        "variant": cfg.variant,
        "backend": cfg.backend,
        "mode": cfg.mode,
        "he_params": params.to_json(),
        "thresholds": list(tau.tau) if tau is not None else None,
        "pruning_ratio": cfg.pruning_ratio,
        "pruned_nodes": int(pm.M0.sum()) if pm is not None and variant.prunes else 0,
        "poly_preset": polys.name,
        "poly_degrees": list(variant.polys.degrees) if variant.uses_levels else [len(variant.uniform) - 1],
        "profile": result.profile.to_dict(timing=False),
        "activation_mult_ct": stage_counts(result.profile, ".activation").get("mult_ct", 0),
        "depth_estimate": {"total": est.total, "trace": [list(t) for t in est.trace]},
        "accuracy": {
            # the soft mirror follows protocol mode; compaction uses hard partitions
            "agreement_soft": _agreement(logits, soft, retained) if cfg.mode == "protocol" else None,
            "agreement_hard": _agreement(logits, hard, retained),
            "max_abs_error_soft": (float(np.max(np.abs(logits - soft))) if logits.size else 0.0)
            if cfg.mode == "protocol" else None,
            "test_accuracy": accuracy(logits, g.labels, test) if g.labels is not None and test is not None else None,
            "plain_hard_test_accuracy": accuracy(hard, g.labels, test) if g.labels is not None and test is not None else None,
            "plain_hard_accuracy_all": accuracy(hard, g.labels) if g.labels is not None else None,
        },
        "seed": cfg.seed,
        "versions": _versions(),
    }
    # timing fields are the only nondeterministic entries; timing=False zeroes them
    report["wall_time_ms"] = (time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0
    report["inference_time_ms"] = result.profile.wall_time_ms if cfg.timing else 0.0
    if write:
        _write_outputs(cfg, report, result, backend, keys, g.n, csv_row_out)
    return report


def _key_id(sk_meta: dict, sk_arrays: list) -> str:
    h = hashlib.sha256(json.dumps(sk_meta, sort_keys=True).encode())
    for a in sk_arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def _write_outputs(cfg: RunConfig, report: dict, result: InferenceResult, backend, keys, n: int,
                   with_csv: bool = True) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rid = report["experiment_id"]
    (out / f"{rid}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    arrays = []
    for ct in result.logits:
        arrays += list(ct.payload) if isinstance(ct.payload, tuple) else [ct.payload]
    sk_arrays = [keys.material.secret.coeffs] if hasattr(keys.material, "secret") else []
    sk_meta = {"backend": cfg.backend, "seed": cfg.seed, "params": report["he_params"]}
    sk_meta["key_id"] = _key_id(sk_meta, sk_arrays)
    meta = {
        "mode": result.mode, "n": n, "key_id": sk_meta["key_id"],
        "cts": [{"level": c.level, "scale": c.scale, "slot_count": c.slot_count, "valid": c.valid}
                for c in result.logits],
        "retained": result.retained.tolist() if result.retained is not None else None,
        "fill": result.fill.tolist() if result.fill is not None else None,
    }
    (out / f"{rid}.logits.bin").write_bytes(pack("logits", meta, arrays))
    (out / f"{rid}.secret.bin").write_bytes(pack("secret_key", sk_meta, sk_arrays))
    if with_csv:
        append_csv(out / "results.csv", report)


def csv_row(report: dict) -> dict:
    prof = report["profile"]
    acc = report["accuracy"]
    row = {
        "experiment_id": report["experiment_id"], "graph": report["graph"], "variant": report["variant"],
        "backend": report["backend"], "mode": report["mode"], "poly_preset": report["poly_preset"],
        "thresholds": " ".join(f"{t:g}" for t in report["thresholds"] or []),
        "pruning_ratio": "" if report["pruning_ratio"] is None else report["pruning_ratio"],
        "pruned_nodes": report["pruned_nodes"], "seed": report["seed"],
        "ring_degree": report["he_params"]["ring_degree"],
        "levels": len(report["he_params"]["prime_bits"]) - 2,
        **{k: prof[k] for k in COUNTERS},
        "activation_mult_ct": report["activation_mult_ct"],
        "max_depth_consumed": prof["max_depth_consumed"],
        "estimated_depth": report["depth_estimate"]["total"],
        "agreement_soft": "" if acc["agreement_soft"] is None else acc["agreement_soft"],
        "agreement_hard": acc["agreement_hard"],
        "test_accuracy": "" if acc["test_accuracy"] is None else acc["test_accuracy"],
        "wall_time_ms": report["wall_time_ms"],
    }
    return row


def append_csv(path: Path, report: dict) -> None:
    new = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            writer.writeheader()
        writer.writerow(csv_row(report))


# ---------------------------------------------------------------------------
# verbs

def cmd_run(cfg: RunConfig) -> dict:
    return execute(cfg)


def cmd_ablation(cfg: RunConfig) -> list[dict]:
    _, g = resolve_graph(cfg.graph_path)
    w = resolve_weights(cfg, g)
    reports = []
    for kind in ("BFG", "PO", "AAO", "FF"):
        cell = RunConfig(**{**asdict(cfg), "variant": kind})
        reports.append(execute(cell, weights=w))
    return reports


def sweep_cells(cfg: RunConfig) -> list[RunConfig]:
    sw = cfg.sweep or {}
    ratios = sw.get("ratios")
    presets = sw.get("presets")
    if ratios is None and presets is None:
        raise ConfigError("config.sweep: give 'ratios' and/or 'presets'")
    if ratios is not None and len(ratios) == 0 or presets is not None and len(presets) == 0:
        raise ConfigError("config.sweep: empty grid")
    ratios = ratios if ratios is not None else [cfg.pruning_ratio]
    presets = presets if presets is not None else [cfg.poly_preset]
    cells = []
    for preset in presets:
        for r in ratios:
            d = {**asdict(cfg), "poly_preset": preset, "pruning_ratio": r, "sweep": {}}
            if r is not None:
                d["thresholds"] = None
            cells.append(RunConfig.from_dict(d))
    return cells


def _execute_with(args):
    cfg, w = args
    return execute(cfg, weights=w, csv_row_out=False)


def cmd_sweep(cfg: RunConfig) -> list[dict]:
    cells = sweep_cells(cfg)
    _, g = resolve_graph(cfg.graph_path)
    w = resolve_weights(cfg, g)
    if cfg.jobs > 1:
        # workers write their own report files; rows land in results.csv in grid order
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            reports = list(pool.map(_execute_with, [(c, w) for c in cells]))
    else:
        reports = [execute(c, weights=w, csv_row_out=False) for c in cells]
    for rep in reports:
        append_csv(Path(cfg.output_dir) / "results.csv", rep)
    return reports


def _agree(r: dict) -> float:
    a = r["accuracy"]
    return a["agreement_soft"] if a["agreement_soft"] is not None else a["agreement_hard"]


def _table(reports: list[dict]) -> str:
    head = f"{'variant':<8}{'preset':<8}{'ratio':>7}{'pruned':>8}{'mult_ct':>9}{'act_mult':>9}{'rotate':>8}{'depth':>7}{'agree':>7}"
    lines = [head]
    for r in reports:
        ratio = "" if r["pruning_ratio"] is None else f"{r['pruning_ratio']:g}"
        lines.append(
            f"{r['variant']:<8}{r['poly_preset']:<8}{ratio:>7}{r['pruned_nodes']:>8}{r['profile']['mult_ct']:>9}"
            f"{r['activation_mult_ct']:>9}{r['profile']['rotate']:>8}{r['profile']['max_depth_consumed']:>7}"
            f"{_agree(r):>7.2f}"
        )
    return "\n".join(lines)


def cmd_inspect(report_path, secret_path=None) -> np.ndarray:
    report_path = Path(report_path)
    report = json.loads(report_path.read_text())
    base = report_path.with_suffix("")
    logits_path = base.with_name(base.name + ".logits.bin")
    secret_path = Path(secret_path) if secret_path else base.with_name(base.name + ".secret.bin")
    kind, meta, arrays = unpack(logits_path.read_bytes())
    skind, smeta, sarrays = unpack(secret_path.read_bytes())
    if kind != "logits" or skind != "secret_key":
        raise ContainerError("unexpected container kinds")
    if meta.get("key_id") != smeta.get("key_id"):
        raise ContainerError("secret key does not belong to these logits")
    smeta = {k: v for k, v in smeta.items() if k != "key_id"}
    params = HEParams.from_json(smeta["params"])
    backend = make_backend(smeta["backend"], params, smeta["seed"])
    keys = backend.keygen(rotation_steps=[])
    if sarrays:
        if _key_id(smeta, sarrays) != meta["key_id"] or not np.array_equal(keys.material.secret.coeffs, sarrays[0]):
            raise ContainerError("secret key does not match the recorded seed")
    from .he.api import Ciphertext

    per = 2 if smeta["backend"] == "ckks" else 1
    cts = [Ciphertext(tuple(arrays[i * per:(i + 1) * per]) if per == 2 else arrays[i], m["level"],
                      m["scale"], m["slot_count"], m["valid"]) for i, m in enumerate(meta["cts"])]
    res = InferenceResult(cts, None, None, meta["mode"],
                          np.array(meta["retained"]) if meta["retained"] is not None else None,
                          np.array(meta["fill"]) if meta["fill"] is not None else None)
    return res.decrypt(backend, keys, meta["n"])


def _config_from_args(args) -> RunConfig:
    obj: dict[str, Any] = {}
    if args.config:
        obj = asdict(load_config(args.config))
    for name in ("graph_path", "weights_path", "variant", "backend", "mode", "preset", "poly_preset",
                 "output_dir", "seed", "sharpen", "pruning_ratio", "jobs", "strategy", "ones_mode"):
        val = getattr(args, name, None)
        if val is not None:
            obj[name] = val
    if getattr(args, "thresholds", None):
        obj["thresholds"] = [float(t) for t in args.thresholds.split(",")]
        obj["pruning_ratio"] = None
    if getattr(args, "pruning_ratio", None) is not None:
        obj["thresholds"] = None
    if getattr(args, "train", False):
        obj["train"] = obj.get("train") or True
    if getattr(args, "paper_params", False):
        obj["preset"] = "paper"
        obj["he_params"] = None
    if getattr(args, "no_timing", False):
        obj["timing"] = False
    if getattr(args, "ratios", None):
        obj.setdefault("sweep", {})
        obj["sweep"] = {**obj["sweep"], "ratios": [float(r) for r in args.ratios.split(",") if r]}
    if getattr(args, "presets", None):
        obj.setdefault("sweep", {})
        obj["sweep"] = {**obj["sweep"], "presets": [p for p in args.presets.split(",") if p]}
    return RunConfig.from_dict(obj)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="encgnn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON or TOML config file")
        sp.add_argument("--graph", dest="graph_path", help="graph file or fixture:<name>")
        sp.add_argument("--weights", dest="weights_path")
        sp.add_argument("--train", action="store_true", help="train weights instead of loading them")
        sp.add_argument("--thresholds", help="comma-separated decreasing degree thresholds")
        sp.add_argument("--pruning-ratio", type=float)
        sp.add_argument("--poly-preset", choices=["PSet1", "PSet2", "PSet3"])
        sp.add_argument("--backend", choices=["sim", "ckks"])
        sp.add_argument("--mode", choices=["protocol", "compaction"])
        sp.add_argument("--preset", help="HE parameter preset (desk, desk30, paper, sim)")
        sp.add_argument("--paper-params", action="store_true", help="use the large N=2^15 preset (timing studies)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--sharpen", type=int)
        sp.add_argument("--strategy", choices=["horner", "paterson-stockmeyer"])
        sp.add_argument("--ones-mode", choices=["encrypted", "plaintext"])
        sp.add_argument("--output-dir")
        sp.add_argument("--no-timing", action="store_true", help="write zero wall-clock fields (byte-stable reports)")

    sp = sub.add_parser("run", help="run one variant")
    common(sp)
    sp.add_argument("--variant", choices=["FF", "PO", "AAO", "BFG"])
    sp = sub.add_parser("ablation", help="run BFG, PO, AAO and FF on identical inputs")
    common(sp)
    sp = sub.add_parser("sweep", help="sweep pruning ratios and/or polynomial presets")
    common(sp)
    sp.add_argument("--variant", choices=["FF", "PO", "AAO", "BFG"])
    sp.add_argument("--ratios", help="comma-separated pruning ratios")
    sp.add_argument("--presets", help="comma-separated polynomial presets")
    sp.add_argument("--jobs", type=int)

    sp = sub.add_parser("train", help="train the toy two-layer GCN")
    sp.add_argument("--graph", dest="graph_path", default="fixture:demo16")
    sp.add_argument("--out", required=True)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--hidden-dim", type=int, default=2)
    sp.add_argument("--activation", choices=["square", "relu"], default="square")
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("keygen", help="generate and serialize key material")
    sp.add_argument("--preset", default="desk")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--steps", default="1", help="comma-separated rotation steps")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("inspect", help="decrypt and print a report's logits")
    sp.add_argument("report")
    sp.add_argument("--secret", help="secret key file (defaults to the one next to the report)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.verb == "run":
            rep = cmd_run(_config_from_args(args))
            print(json.dumps({k: rep[k] for k in ("experiment_id", "profile", "accuracy")}, indent=2))
        elif args.verb == "ablation":
            print(_table(cmd_ablation(_config_from_args(args))))
        elif args.verb == "sweep":
            print(_table(cmd_sweep(_config_from_args(args))))
        elif args.verb == "train":
            _, g = resolve_graph(args.graph_path)
            w = train_toy(g, TrainConfig(epochs=args.epochs, hidden_dim=args.hidden_dim,
                                         activation=args.activation, seed=args.seed))
            save_weights(w, args.out)
            print(f"wrote {args.out} (dims {w.dims})")
        elif args.verb == "keygen":
            from .he.serialize import dump_keys

            params = HEParams.preset(args.preset)
            be = make_backend("ckks", params, args.seed)
            keys = be.keygen([int(s) for s in args.steps.split(",") if s])
            Path(args.out).write_bytes(dump_keys(keys))
            print(f"wrote {args.out}")
        elif args.verb == "inspect":
            np.set_printoptions(precision=6, suppress=True)
            print(cmd_inspect(args.report, args.secret))
    except (ConfigError, ValueError, ContainerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
