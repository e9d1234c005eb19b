import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from encgnn.engine import InferenceVariant, PolyActivationSet
from encgnn.graph import LayerWeights, ModelWeights, PlainGraph, load_fixture
from encgnn.importance import oracle_masks
from encgnn.plain import (
    DataError,
    TrainConfig,
    accuracy,
    check_gradients,
    forward_design_plain,
    forward_plain,
    loss_and_grads,
    train_toy,
)

from conftest import path_graph, random_graph


def two_clique(k=8):
    """Two k-cliques joined by one edge; every node carries its class indicator."""
    n = 2 * k
    A = np.zeros((n, n))
    A[:k, :k] = 1
    A[k:, k:] = 1
    np.fill_diagonal(A, 0)
    A[k - 1, k] = A[k, k - 1] = 1
    labels = np.repeat([0, 1], k)
    X = np.eye(2)[labels]
    return PlainGraph(A, X, labels, {"train": np.arange(n)})


def rand_weights(dims, seed=0, bias=True):
    rng = np.random.default_rng(seed)
    return ModelWeights([LayerWeights(rng.normal(size=(a, b)), rng.normal(size=(a, b)),
                                      rng.normal(size=b) if bias else np.zeros(b))
                         for a, b in zip(dims, dims[1:])])


def test_zero_weights_give_zero_logits():
    g = load_fixture("demo16")
    w = ModelWeights([LayerWeights(np.zeros((4, 2)), np.zeros((4, 2)), np.zeros(2)),
                      LayerWeights(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2))])
    assert not forward_plain(g, w).any()


def test_one_layer_identity():
    g = path_graph(3)
    g = PlainGraph(np.zeros((3, 3)), g.features)
    w = ModelWeights([LayerWeights(np.zeros((2, 2)), np.eye(2), np.zeros(2))])
    np.testing.assert_array_equal(forward_plain(g, w, "identity"), g.features)


def test_quadratic_scaling_of_isolated_node():
    X = np.array([[1.0, -0.5], [0.3, 2.0]])
    g1 = PlainGraph(np.zeros((2, 2)), X)
    g2 = PlainGraph(np.zeros((2, 2)), 2 * X)
    # two squarings before the last linear layer make the logits degree 4
    w = rand_weights([2, 3, 3, 2], bias=False)
    np.testing.assert_allclose(forward_plain(g2, w), 16 * forward_plain(g1, w), rtol=1e-12)
    w = rand_weights([2, 3, 2], bias=False)
    np.testing.assert_allclose(forward_plain(g2, w), 4 * forward_plain(g1, w), rtol=1e-12)


@given(seed=st.integers(0, 1000), n=st.integers(1, 10))
def test_bfg_design_equals_gcn(seed, n):
    g = random_graph(np.random.default_rng(seed), n, 0.4)
    w = rand_weights([2, 3, 2], seed)
    variant = InferenceVariant.build("BFG", PolyActivationSet.preset("PSet2"), (0.0, 0.0, 1.0))
    np.testing.assert_allclose(forward_design_plain(g, w, None, variant), forward_plain(g, w), rtol=1e-12)


def test_hard_mode_zeroes_pruned_rows():
    g = path_graph(5)
    w = rand_weights([2, 2, 2], bias=False)
    pm = oracle_masks(g, [1.5])
    out = forward_design_plain(g, w, [1.5], InferenceVariant.build("FF", PolyActivationSet.preset("PSet3")))
    assert not out[pm.M0 == 1].any()
    assert out[pm.M0 == 0].any()
    # a uniform polynomial with a constant term revives pruned rows
    out = forward_design_plain(g, w, [1.5], InferenceVariant.build("PO", PolyActivationSet.preset("PSet3")))
    assert out[pm.M0 == 1].any()


def test_design_mode_validation():
    g = path_graph()
    with pytest.raises(ValueError):
        forward_design_plain(g, rand_weights([2, 2]), [1.5],
                             InferenceVariant.build("FF", PolyActivationSet.preset("PSet3")), "fuzzy")


def test_accuracy_helper():
    logits = np.array([[1, 0], [0, 1], [1, 0]])
    assert accuracy(logits, np.array([0, 1, 1])) == pytest.approx(2 / 3)
    assert accuracy(logits, np.array([0, 1, 1]), np.array([0, 1])) == 1.0


# -- training --------------------------------------------------------------------

@pytest.mark.parametrize("activation", ["square", "relu"])
def test_gradient_check_five_nodes(activation):
    g = random_graph(np.random.default_rng(3), 5, 0.5, d0=3, labels=True)
    assert check_gradients(g, activation=activation, seed=1) < 1e-4


def test_gradients_with_dropout_mask():
    g = random_graph(np.random.default_rng(4), 5, 0.5, d0=3, labels=True)
    rng = np.random.default_rng(0)
    params = {"W1_0": rng.normal(size=(3, 2)), "W2_0": rng.normal(size=(3, 2)), "b_0": rng.normal(size=2),
              "W1_1": rng.normal(size=(2, 2)), "W2_1": rng.normal(size=(2, 2)), "b_1": rng.normal(size=2)}
    drop = (rng.random((5, 2)) < 0.5) * 2.0
    idx = np.arange(5)
    _, grads = loss_and_grads(params, g.adjacency, g.features, g.labels, idx, "square", drop)
    eps = 1e-6
    for k in ("W1_0", "b_1"):
        p = params[k]
        i = (0,) * p.ndim
        old = p[i]
        p[i] = old + eps
        lp, _ = loss_and_grads(params, g.adjacency, g.features, g.labels, idx, "square", drop)
        p[i] = old - eps
        lm, _ = loss_and_grads(params, g.adjacency, g.features, g.labels, idx, "square", drop)
        p[i] = old
        assert abs((lp - lm) / (2 * eps) - grads[k][i]) < 1e-5 * max(1, abs(grads[k][i]))


@pytest.mark.parametrize("seed", range(5))
def test_two_clique_trains(seed):
    g = two_clique()
    w = train_toy(g, TrainConfig(epochs=200, seed=seed))
    assert accuracy(forward_plain(g, w), g.labels, g.splits["train"]) >= 0.95


def test_two_clique_trains_relu():
    # two ReLU units can both die at init; seed 0 keeps them alive
    g = two_clique()
    w = train_toy(g, TrainConfig(activation="relu", seed=0))
    assert accuracy(forward_plain(g, w, "relu"), g.labels, g.splits["train"]) >= 0.95


def test_training_is_deterministic():
    g = load_fixture("demo16")
    a, b = train_toy(g, TrainConfig(seed=3)), train_toy(g, TrainConfig(seed=3))
    for la, lb in zip(a.layers, b.layers):
        np.testing.assert_array_equal(la.W1, lb.W1)
        np.testing.assert_array_equal(la.W2, lb.W2)
        np.testing.assert_array_equal(la.b, lb.b)


def test_training_errors():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(activation="tanh")
    g = path_graph()
    with pytest.raises(DataError):
        train_toy(g)
    g = PlainGraph(g.adjacency, g.features, np.array([0, 1, 0]))
    with pytest.raises(DataError):
        train_toy(g)
