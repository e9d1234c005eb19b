import csv
import json

import numpy as np
import pytest

from encgnn.cli import (
    CSV_COLUMNS,
    ConfigError,
    RunConfig,
    cmd_ablation,
    cmd_inspect,
    cmd_sweep,
    execute,
    load_config,
    main,
    sweep_cells,
)
from encgnn.graph import load_fixture, load_weights

GOLDEN_HEADER = (
    "experiment_id,graph,variant,backend,mode,poly_preset,thresholds,pruning_ratio,pruned_nodes,seed,"
    "ring_degree,levels,add,add_plain,mult_ct,mult_plain,rotate,rescale,relinearize,activation_mult_ct,"
    "max_depth_consumed,estimated_depth,agreement_soft,agreement_hard,test_accuracy,wall_time_ms"
)


def cfg(tmp_path, **kw):
    base = {"train": True, "pruning_ratio": 0.3, "output_dir": str(tmp_path), "timing": False}
    return RunConfig.from_dict({**base, **kw})


def numbers(obj, path=""):
    """Yield (path, value) for every leaf of a report."""
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from numbers(v, f"{path}.{k}")
    else:
        yield path, obj


def test_run_ff_sim(tmp_path):
    rep = execute(cfg(tmp_path))
    assert rep["profile"]["mult_ct"] > 0
    assert rep["accuracy"]["agreement_soft"] == 1.0
    assert rep["depth_estimate"]["total"] == rep["profile"]["max_depth_consumed"]
    for stem in (".json", ".logits.bin", ".secret.bin"):
        assert (tmp_path / (rep["experiment_id"] + stem)).exists()
    for key in ("wall_time_ms", "inference_time_ms", "pruned_nodes", "activation_mult_ct"):
        assert isinstance(rep[key], (int, float))
    for path, v in numbers(rep["profile"]):
        assert isinstance(v, int) and v >= 0, path


@pytest.mark.slow
def test_run_bfg_ckks(tmp_path):
    rep = execute(cfg(tmp_path, variant="BFG", backend="ckks", pruning_ratio=None))
    assert rep["accuracy"]["agreement_soft"] >= 0.9
    assert rep["accuracy"]["max_abs_error_soft"] < 1e-1


def test_report_is_deterministic(tmp_path):
    a = execute(cfg(tmp_path / "a"))
    b = execute(cfg(tmp_path / "b"))
    pa = tmp_path / "a" / (a["experiment_id"] + ".json")
    pb = tmp_path / "b" / (b["experiment_id"] + ".json")
    assert pa.read_bytes() == pb.read_bytes()
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_csv_schema(tmp_path):
    execute(cfg(tmp_path))
    execute(cfg(tmp_path, variant="PO"))
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == GOLDEN_HEADER == ",".join(CSV_COLUMNS)
    rows = list(csv.DictReader(lines))
    assert len(rows) == 2 and {r["variant"] for r in rows} == {"FF", "PO"}
    assert rows[0]["agreement_soft"] == "1.0" and int(rows[0]["mult_ct"]) > 0


# -- config errors ---------------------------------------------------------------

@pytest.mark.parametrize("obj,where", [
    ({"pruning_ratio": 0.3}, "weights_path"),
    ({"train": True}, "thresholds"),
    ({"train": True, "pruning_ratio": 1.5}, "pruning_ratio"),
    ({"train": True, "thresholds": [1, 3]}, "thresholds"),
    ({"train": True, "pruning_ratio": 0.3, "thresholds": [3]}, "thresholds"),
    ({"train": True, "pruning_ratio": 0.3, "variant": "XX"}, "variant"),
    ({"train": True, "pruning_ratio": 0.3, "sharpen": 0}, "sharpen"),
    ({"train": {"epochs": 0}, "pruning_ratio": 0.3}, "train"),
    ({"train": True, "pruning_ratio": 0.3, "he_params": {"ring_degree": 1000}}, "he_params"),
])
def test_config_errors(obj, where):
    with pytest.raises(ConfigError, match=f"config.{where}"):
        RunConfig.from_dict(obj)


def test_unknown_field():
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_dict({"train": True, "pruning_ratio": 0.3, "colour": "red"})


def test_bfg_needs_no_thresholds():
    assert RunConfig.from_dict({"train": True, "variant": "BFG"}).thresholds is None


def test_config_files(tmp_path):
    (tmp_path / "c.toml").write_text('train = true\npruning_ratio = 0.5\nvariant = "PO"\n')
    (tmp_path / "c.json").write_text(json.dumps({"train": True, "thresholds": [4.5, 2.5]}))
    assert load_config(tmp_path / "c.toml").variant == "PO"
    assert load_config(tmp_path / "c.json").thresholds == [4.5, 2.5]
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def test_main_exit_codes(tmp_path, capsys):
    assert main(["run", "--output-dir", str(tmp_path), "--pruning-ratio", "0.3"]) == 2
    assert "weights_path" in capsys.readouterr().err
    assert main(["run", "--train", "--output-dir", str(tmp_path), "--pruning-ratio", "0.3", "--no-timing"]) == 0
    assert "experiment_id" in capsys.readouterr().out


# -- ablation and sweep ----------------------------------------------------------

def test_ablation_orderings(tmp_path):
    reps = cmd_ablation(cfg(tmp_path, mode="compaction", pruning_ratio=0.3))
    by = {r["variant"]: r for r in reps}
    assert [r["variant"] for r in reps] == ["BFG", "PO", "AAO", "FF"]
    assert len({r["seed"] for r in reps}) == 1
    assert by["FF"]["pruned_nodes"] >= 0.25 * 16
    assert by["PO"]["profile"]["mult_ct"] < by["BFG"]["profile"]["mult_ct"]
    assert by["FF"]["activation_mult_ct"] < by["AAO"]["activation_mult_ct"]


def test_sweep_ratios(tmp_path):
    base = cfg(tmp_path, mode="compaction", pruning_ratio=None, sweep={"ratios": [0.1, 0.3, 0.5, 0.7, 0.9]})
    reps = cmd_sweep(base)
    assert len(reps) == 5
    counts = [r["profile"]["mult_ct"] for r in reps]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    rows = list(csv.DictReader((tmp_path / "results.csv").open()))
    assert [float(r["pruning_ratio"]) for r in rows] == [0.1, 0.3, 0.5, 0.7, 0.9]


def test_sweep_parallel_matches_serial(tmp_path):
    grid = {"ratios": [0.2, 0.6], "presets": ["PSet1", "PSet3"]}
    a = cmd_sweep(cfg(tmp_path / "a", pruning_ratio=None, sweep=grid))
    b = cmd_sweep(cfg(tmp_path / "b", pruning_ratio=None, sweep=grid, jobs=2))
    assert [r["experiment_id"] for r in a] == [r["experiment_id"] for r in b]
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_empty_sweep_grid(tmp_path):
    with pytest.raises(ConfigError, match="empty"):
        sweep_cells(cfg(tmp_path, pruning_ratio=None, sweep={"ratios": []}))
    with pytest.raises(ConfigError):
        sweep_cells(cfg(tmp_path))


# -- artifacts -------------------------------------------------------------------

def test_inspect_decrypts_logits(tmp_path):
    rep = execute(cfg(tmp_path))
    logits = cmd_inspect(tmp_path / (rep["experiment_id"] + ".json"))
    assert logits.shape == (16, 2)
    other = execute(cfg(tmp_path / "o", seed=5))
    with pytest.raises(ValueError):
        cmd_inspect(tmp_path / (rep["experiment_id"] + ".json"),
                    tmp_path / "o" / (other["experiment_id"] + ".secret.bin"))


def test_train_and_keygen_verbs(tmp_path):
    out = tmp_path / "w.json"
    assert main(["train", "--out", str(out), "--epochs", "20"]) == 0
    w = load_weights(out)
    assert w.dims == [4, 2, 2]
    rep = execute(cfg(tmp_path, train=None, weights_path=str(out)))
    assert rep["accuracy"]["agreement_soft"] == 1.0
    keys = tmp_path / "k.bin"
    assert main(["keygen", "--preset", "sim", "--steps", "1,2", "--out", str(keys)]) == 0
    assert keys.stat().st_size > 0


def test_fixture_accuracy_fields(tmp_path):
    rep = execute(cfg(tmp_path, graph_path="karate34"))
    acc = rep["accuracy"]
    g = load_fixture("karate34")
    assert rep["graph"] == "karate34" and 0 <= acc["test_accuracy"] <= 1
    assert acc["plain_hard_accuracy_all"] == pytest.approx(
        np.round(acc["plain_hard_accuracy_all"] * g.n) / g.n)
