from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from encgnn.engine import (
    DepthBudgetError,
    EncActivations,
    EngineConfig,
    InferenceVariant,
    PolyActivationSet,
    adaptive_activation,
    aggregate,
    apply_prune,
    encrypt_masks,
    estimate_depth,
    layer_preactivation,
    run_inference,
    stage_counts,
    uniform_activation,
)
from encgnn.graph import LayerWeights, ModelWeights, PlainGraph, encrypt_graph, load_fixture, unpack_graph
from encgnn.he import HEParams, make_backend
from encgnn.he.errors import ParameterError
from encgnn.importance import MaskSet, oracle_masks, thresholds_from_ratio
from encgnn.plain import forward_design_plain, forward_plain, train_toy

from conftest import SMALL, path_graph, random_graph

SQUARE = (0.0, 0.0, 1.0)
IDENT = (0.0, 1.0)


def weights(d0, h, c, seed=0, bias=True):
    rng = np.random.default_rng(seed)
    b = (lambda k: rng.normal(scale=0.3, size=k)) if bias else (lambda k: np.zeros(k))
    return ModelWeights([
        LayerWeights(rng.normal(scale=0.5, size=(d0, h)), rng.normal(scale=0.5, size=(d0, h)), b(h)),
        LayerWeights(rng.normal(scale=0.5, size=(h, c)), rng.normal(scale=0.5, size=(h, c)), b(c)),
    ])


def sim_backend(levels=40):
    return make_backend("sim", HEParams(8192, (60,) + (40,) * levels + (60,)), seed=0)


# -- poly sets and variants ------------------------------------------------------

def test_poly_sets():
    for name, degs in (("PSet1", (7, 5, 3)), ("PSet2", (5, 3, 2)), ("PSet3", (3, 2, 1))):
        ps = PolyActivationSet.preset(name)
        assert ps.degrees == degs and ps.m == 3
    with pytest.raises(ParameterError):
        PolyActivationSet((SQUARE, (0.0, 0.0, 0.0, 1.0)))
    with pytest.raises(ParameterError):
        PolyActivationSet.preset("PSet9")
    with pytest.raises(ParameterError):
        PolyActivationSet.from_degrees([9, 2])


def test_poly_file(tmp_path):
    import json

    p = tmp_path / "mine.json"
    p.write_text(json.dumps([{"degree": 2, "coeffs": [0, 0, 1]}, {"degree": 1, "coeffs": [0, 1]}]))
    ps = PolyActivationSet.from_file(p)
    assert ps.polys == (SQUARE, IDENT) and ps.name == "mine"
    p.write_text(json.dumps([{"degree": 2, "coeffs": [0, 1]}]))
    with pytest.raises(ParameterError):
        PolyActivationSet.from_file(p)


def test_variant_invariants():
    ps = PolyActivationSet.preset("PSet2")
    assert InferenceVariant.build("PO", ps).uniform == ps.polys[0]
    assert InferenceVariant.build("BFG", ps, SQUARE).uniform == SQUARE
    assert InferenceVariant.build("FF", ps).polys is ps
    with pytest.raises(ParameterError):
        InferenceVariant("FF")
    with pytest.raises(ParameterError):
        InferenceVariant("BFG")
    with pytest.raises(ValueError):
        InferenceVariant.build("XX", ps)


# -- building blocks -------------------------------------------------------------

def test_apply_prune_examples(backend, keys):
    g = path_graph(3)
    enc = encrypt_graph(g, backend, keys)
    for keep, want_adj, want_x in (
        (np.ones(3), g.adjacency, g.features),
        (np.zeros(3), np.zeros((3, 3)), np.zeros((3, 2))),
    ):
        pruned = apply_prune(enc, backend.encrypt(1 - keep, keys), backend, keys)
        adj, x = unpack_graph(pruned, backend, keys)
        np.testing.assert_allclose(adj, want_adj, atol=1e-2)
        np.testing.assert_allclose(x, want_x, atol=1e-2)
    adj, x = unpack_graph(apply_prune(enc, backend.encrypt([1, 0, 0], keys), backend, keys), backend, keys)
    want = np.zeros((3, 3))
    want[1, 2] = want[2, 1] = 1
    np.testing.assert_allclose(adj, want, atol=1e-2)
    np.testing.assert_allclose(x[0], 0, atol=1e-2)
    np.testing.assert_allclose(x[1:], g.features[1:], atol=1e-2)


def test_layer_examples(backend, keys):
    X = np.array([[1.0, -2.0], [0.5, 3.0]])
    H = EncActivations([backend.encrypt(X[:, j], keys) for j in range(2)], 0)
    zero = encrypt_graph(PlainGraph(np.zeros((2, 2)), X), backend, keys).adj_diagonals
    Z = layer_preactivation(zero, H, LayerWeights(np.zeros((2, 2)), np.eye(2), np.zeros(2)), backend, keys)
    np.testing.assert_allclose(np.stack([backend.decrypt(c, keys) for c in Z.cols], 1), X, atol=1e-2)
    swap = encrypt_graph(PlainGraph(np.array([[0, 1], [1, 0]]), X), backend, keys).adj_diagonals
    Z = layer_preactivation(swap, H, LayerWeights(np.eye(2), np.zeros((2, 2)), np.zeros(2)), backend, keys)
    np.testing.assert_allclose(np.stack([backend.decrypt(c, keys) for c in Z.cols], 1), X[::-1], atol=1e-2)


def test_activation_examples(backend, keys):
    Z = EncActivations([backend.encrypt([3.0, -2.0], keys)], 0)
    ones = backend.encrypt([1.0, 1.0], keys)
    out = adaptive_activation(Z, MaskSet(backend.encrypt([0, 0], keys), [ones]), PolyActivationSet((SQUARE,)),
                              backend, keys)
    np.testing.assert_allclose(backend.decrypt(out.cols[0], keys), [9, 4], atol=1e-2)
    pruned = MaskSet(ones, [backend.encrypt([0.0, 0.0], keys)])
    out = adaptive_activation(Z, pruned, PolyActivationSet((SQUARE,)), backend, keys)
    np.testing.assert_allclose(backend.decrypt(out.cols[0], keys), [0, 0], atol=1e-2)
    Z = EncActivations([backend.encrypt([3.0, 3.0], keys)], 0)
    two = MaskSet(backend.encrypt([0, 0], keys), [backend.encrypt([1, 0], keys), backend.encrypt([0, 1], keys)])
    out = adaptive_activation(Z, two, PolyActivationSet((SQUARE, IDENT)), backend, keys)
    np.testing.assert_allclose(backend.decrypt(out.cols[0], keys), [9, 3], atol=1e-2)
    with pytest.raises(ParameterError):
        adaptive_activation(Z, two, PolyActivationSet((SQUARE,)), backend, keys)
    out = uniform_activation(Z, SQUARE, backend, keys)
    np.testing.assert_allclose(backend.decrypt(out.cols[0], keys), [9, 9], atol=1e-2)


@given(n=st.integers(1, 8), seed=st.integers(0, 10**6))
def test_diagonal_matvec_identity(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 4, (n, n)).astype(float)
    v = rng.integers(-5, 6, n).astype(float)
    be = sim_backend(4)
    keys = be.keygen()
    enc = encrypt_graph(PlainGraph(A, v), be, keys)
    got = be.decrypt_exact(aggregate(enc.adj_diagonals, enc.feature_cols[0], be, keys), keys)
    assert [int(x) for x in got] == (A @ v).astype(int).tolist()


# -- depth -----------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["FF", "PO", "AAO", "BFG"])
@pytest.mark.parametrize("preset", ["PSet1", "PSet3"])
@pytest.mark.parametrize("cfg", [EngineConfig(), EngineConfig(ones_mode="plaintext", sharpen=2),
                                 EngineConfig(strategy="paterson-stockmeyer")])
def test_depth_estimate_matches(kind, preset, cfg):
    g = path_graph(5)
    w = weights(2, 2, 2)
    variant = InferenceVariant.build(kind, PolyActivationSet.preset(preset))
    tau = [3.5, 1.5, 0.5]
    est = estimate_depth(variant, w.L, cfg, m=3)
    be = sim_backend(est.total)
    keys = be.keygen()
    res = run_inference(encrypt_graph(g, be, keys), w, tau, variant, be, keys, cfg)
    assert res.profile.max_depth_consumed == est.total == res.depth.total
    assert all(ct.level == be.params.levels - est.total for ct in res.logits)


def test_depth_budget_error_before_any_work():
    g = path_graph(4)
    variant = InferenceVariant.build("FF", PolyActivationSet.preset("PSet1"))
    be = sim_backend(5)
    keys = be.keygen()
    enc = encrypt_graph(g, be, keys)
    with be.profile_scope() as prof:
        with pytest.raises(DepthBudgetError) as info:
            run_inference(enc, weights(2, 2, 2), [2.5, 1.5, 0.5], variant, be, keys)
    assert info.value.stage == "masks" and info.value.available == 5 and info.value.needed > 5
    assert sum(prof.counts.values()) == 0


# -- end-to-end semantics --------------------------------------------------------

def test_bfg_matches_plain_gcn(backend_name):
    g = path_graph(3)
    w = weights(2, 2, 2, seed=3)
    variant = InferenceVariant.build("BFG", PolyActivationSet.preset("PSet2"), SQUARE)
    be = make_backend(backend_name, SMALL, seed=1)
    keys = be.keygen()
    res = run_inference(encrypt_graph(g, be, keys), w, None, variant, be, keys)
    np.testing.assert_allclose(res.decrypt(be, keys), forward_plain(g, w), atol=1e-1 if backend_name == "ckks" else 1e-9)


def test_ff_without_pruning_matches_aao(backend_name):
    # 4-cycle: every degree is 2, so (s - tau) / delta = 1 saturates the comparison
    g = PlainGraph(np.roll(np.eye(4), 1, 1) + np.roll(np.eye(4), -1, 1), np.arange(8.0).reshape(4, 2) / 8)
    w = weights(2, 2, 2, seed=4)
    ps = PolyActivationSet((SQUARE,))
    be = make_backend(backend_name, HEParams(1024, (60,) + (40,) * 14 + (60,)), seed=1)
    keys = be.keygen()
    enc = encrypt_graph(g, be, keys)
    cfg = EngineConfig(delta=1, sharpen=1)
    out = [run_inference(enc, w, [1.0], InferenceVariant.build(k, ps), be, keys, cfg).decrypt(be, keys)
           for k in ("FF", "AAO")]
    np.testing.assert_allclose(out[0], out[1], atol=1e-2)


@pytest.mark.parametrize("kind", ["FF", "PO", "AAO", "BFG"])
def test_simulator_equals_exact_soft_mirror(kind):
    g = random_graph(np.random.default_rng(5), 7, 0.5)
    w = weights(2, 2, 2, seed=6)
    variant = InferenceVariant.build(kind, PolyActivationSet.preset("PSet3"))
    tau = [3.5, 2.5, 1.5]
    be = sim_backend()
    keys = be.keygen()
    res = run_inference(encrypt_graph(g, be, keys), w, tau, variant, be, keys, EngineConfig(sharpen=2))
    got = np.stack([be.decrypt_exact(c, keys) for c in res.logits], 1)
    want = forward_design_plain(g, w, tau, variant, "soft", sharpen=2, exact=True)
    assert (got == want).all()


@pytest.mark.parametrize("bias", [False, True])
def test_pruned_nodes_with_oracle_masks(bias):
    g = path_graph(5)
    w = weights(2, 2, 2, seed=8, bias=bias)
    tau = [1.5]
    variant = InferenceVariant.build("FF", PolyActivationSet((SQUARE,)))
    be = sim_backend(16)
    keys = be.keygen()
    pm = oracle_masks(g, tau)
    res = run_inference(encrypt_graph(g, be, keys), w, tau, variant, be, keys, masks=pm)
    logits = np.stack([be.decrypt_exact(c, keys) for c in res.logits], 1)
    pruned = np.nonzero(pm.M0)[0]
    assert pruned.tolist() == [0, 4]
    # zero propagation leaves only the final bias on pruned rows
    want = np.array([Fraction(float(b)) for b in w.layers[-1].b])
    for v in pruned:
        assert (logits[v] == want).all()
    hard = forward_design_plain(g, w, tau, variant, "hard")
    np.testing.assert_allclose(logits.astype(float), hard, atol=1e-12)


def test_backend_equivalence_small_graphs():
    rng = np.random.default_rng(9)
    params = HEParams(1024, (60,) + (40,) * 15 + (60,))
    for n in (3, 8, 16):
        g = random_graph(rng, n, 0.3)
        w = weights(2, 2, 2, seed=n)
        variant = InferenceVariant.build("FF", PolyActivationSet.preset("PSet3"))
        tau = thresholds_from_ratio(g.degrees(), 0.3, 3)
        out = []
        for name in ("sim", "ckks"):
            be = make_backend(name, params, seed=2)
            keys = be.keygen()
            res = run_inference(encrypt_graph(g, be, keys), w, tau, variant, be, keys, EngineConfig(delta=n))
            out.append(res.decrypt(be, keys))
        np.testing.assert_allclose(out[1], out[0], atol=1e-2)


def test_encrypted_oracle_masks(sim):
    keys = sim.keygen()
    g = path_graph(4)
    ms = encrypt_masks(oracle_masks(g, [1.5]), sim, keys)
    assert [sim.decrypt(c, keys).tolist() for c in [ms.M0, *ms.levels]] == [[1, 0, 0, 1], [0, 1, 1, 0]]


# -- compaction ------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["FF", "PO", "AAO", "BFG"])
def test_compaction_matches_hard_mirror(kind):
    g = load_fixture("demo16")
    w = train_toy(g)
    variant = InferenceVariant.build(kind, PolyActivationSet.preset("PSet2"))
    tau = thresholds_from_ratio(g.degrees(), 0.3, 3)
    cfg = EngineConfig(mode="compaction")
    be = sim_backend(20)
    keys = be.keygen()
    res = run_inference(g, w, tau, variant, be, keys, cfg)
    logits = res.decrypt(be, keys, g.n)
    hard = forward_design_plain(g, w, tau, variant, "hard")
    np.testing.assert_allclose(logits[res.retained], hard[res.retained], atol=1e-9)
    dropped = np.setdiff1d(np.arange(g.n), res.retained)
    assert (len(dropped) > 0) == variant.prunes
    for v in dropped:
        np.testing.assert_array_equal(logits[v], w.layers[-1].b)
    assert res.profile.max_depth_consumed == res.depth.total


def test_compaction_costs():
    g = load_fixture("karate34")
    w = weights(4, 2, 2, seed=1)
    be = sim_backend(20)
    keys = be.keygen()
    cfg = EngineConfig(mode="compaction")

    def run(kind, ratio, preset="PSet2"):
        ps = PolyActivationSet.preset(preset)
        tau = thresholds_from_ratio(g.degrees(), ratio, 3)
        return run_inference(g, w, tau, InferenceVariant.build(kind, ps), be, keys, cfg).profile

    counts = [run("FF", r).mult_ct for r in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert run("PO", 0.3).mult_ct < run("BFG", 0.3).mult_ct
    act = [stage_counts(run("FF", 0.5, p), ".activation")["mult_ct"] for p in ("PSet1", "PSet2", "PSet3")]
    assert act[0] > act[1] > act[2]


def test_compaction_needs_plain_graph(sim):
    keys = sim.keygen()
    enc = encrypt_graph(path_graph(), sim, keys)
    with pytest.raises(ParameterError):
        run_inference(enc, weights(2, 2, 2), [1.5], InferenceVariant.build("PO", PolyActivationSet.preset("PSet3")),
                      sim, keys, EngineConfig(mode="compaction"))
