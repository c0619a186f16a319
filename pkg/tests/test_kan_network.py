"""Spline-edge network: forward mechanics, gradients, training, pruning,
checkpointing."""

import numpy as np
import pytest

from autopl.errors import CheckpointError, TrainingError
from autopl.kan import (
    KanConfig,
    build_network,
    edge_importance,
    load_kan,
    prune,
    save_kan,
    train,
)
from autopl.kan.train import _loss_and_grad, grid_search


def _toy_net(shape=(2, 3, 1), seed=0, steps=60, **kw):
    cfg = KanConfig(shape=shape, grid_size=5, order=3, steps=steps, seed=seed, **kw)
    return build_network(cfg)


def test_forward_shapes_and_determinism():
    net = _toy_net()
    X = np.random.default_rng(0).uniform(-1, 1, (13, 2))
    out = net.forward(X)
    assert out.shape == (13, 1)
    assert np.array_equal(out, net.forward(X))
    net2 = _toy_net(seed=0)
    assert np.array_equal(out, net2.forward(X))
    net3 = _toy_net(seed=1)
    assert not np.array_equal(out, net3.forward(X))


def test_forward_rejects_wrong_width():
    net = _toy_net()
    with pytest.raises(ValueError):
        net.forward(np.zeros((4, 3)))


def test_inputs_clamped_to_spline_interval():
    net = _toy_net()
    lo, hi = net.layers[0].basis.lo, net.layers[0].basis.hi
    inside = net.forward(np.array([[hi, lo]]))
    beyond = net.forward(np.array([[hi + 50.0, lo - 50.0]]))
    assert np.allclose(inside, beyond)


def test_param_vector_round_trip():
    net = _toy_net()
    theta = net.get_params()
    net2 = _toy_net(seed=7)
    net2.set_params(theta)
    X = np.random.default_rng(1).uniform(-1, 1, (9, 2))
    assert np.array_equal(net.forward(X), net2.forward(X))
    with pytest.raises(ValueError):
        net.set_params(theta[:-1])


def test_gradients_match_finite_differences():
    net = _toy_net(reg_lambda=0.001)
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, (20, 2))
    y2d = rng.normal(size=(20, 1))
    theta0 = net.get_params()
    _, grad, _, _ = _loss_and_grad(net, X, y2d, 0.001)
    eps = 1e-6
    for i in rng.choice(theta0.size, 30, replace=False):
        tp = theta0.copy()
        tp[i] += eps
        net.set_params(tp)
        lp = _loss_and_grad(net, X, y2d, 0.001)[0]
        tm = theta0.copy()
        tm[i] -= eps
        net.set_params(tm)
        lm = _loss_and_grad(net, X, y2d, 0.001)[0]
        numeric = (lp - lm) / (2 * eps)
        assert grad[i] == pytest.approx(numeric, abs=1e-6, rel=1e-5)


def test_train_fits_smooth_target():
    net = _toy_net()
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, (200, 2))
    y = X[:, 0] ** 2 + np.sin(2.0 * X[:, 1]) + 100.0
    res = train(net, X, y)
    assert res.final_mse < 0.01 * np.var(y)
    assert res.history[-1]["mse"] == pytest.approx(res.final_mse)
    assert res.history[0]["mse"] > res.final_mse
    assert len(res.history) <= net.config.steps + 1
    # predictions live in original units, offset included
    assert net.predict(X).mean() == pytest.approx(y.mean(), abs=1.0)


def test_train_is_deterministic():
    rng = np.random.default_rng(4)
    X = rng.uniform(-1, 1, (80, 2))
    y = np.cos(X[:, 0]) + X[:, 1]
    a = train(_toy_net(), X, y).final_mse
    b = train(_toy_net(), X, y).final_mse
    assert a == b


def test_train_continues_without_degrading():
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, (120, 2))
    y = 3.0 * X[:, 0] - X[:, 1] ** 2 + 50.0
    net = _toy_net()
    first = train(net, X, y).final_mse
    second = train(net, X, y).final_mse
    assert second <= first * 1.01


def test_train_validation_errors():
    net = _toy_net()
    X = np.zeros((10, 2))
    with pytest.raises(TrainingError):
        train(net, X, np.ones(10))  # constant target
    with pytest.raises(ValueError):
        train(net, X, np.ones(9))
    cfg = KanConfig(shape=(2, 2), grid_size=5, steps=10)
    with pytest.raises(ValueError):
        train(build_network(cfg), X, np.ones(10))


def test_kan_config_validation():
    with pytest.raises(ValueError):
        KanConfig(shape=(4,))
    with pytest.raises(ValueError):
        KanConfig(shape=(4, 0, 1))
    with pytest.raises(ValueError):
        KanConfig(shape=(4, 1), steps=0)
    with pytest.raises(ValueError):
        KanConfig(shape=(4, 1), reg_lambda=-1.0)


def test_edge_importance_normalized_per_layer():
    net = _toy_net()
    rng = np.random.default_rng(6)
    X = rng.uniform(-1, 1, (60, 2))
    y = X[:, 0] + 10.0
    train(net, X, y)
    scores = edge_importance(net, X)
    assert len(scores) == 2
    for layer, imp in zip(net.layers, scores):
        assert imp.shape == (layer.d_in, layer.d_out)
        assert imp.max() == pytest.approx(1.0)
        assert imp.min() >= 0.0


def test_prune_masks_weak_edges():
    # the sparsity penalty is what pushes useless edges toward zero
    net = _toy_net(shape=(2, 4, 1), reg_lambda=0.01, steps=120)
    rng = np.random.default_rng(7)
    X = rng.uniform(-1, 1, (300, 2))
    # only the first feature matters; edges from x1 should score low
    y = 40.0 * X[:, 0] + 100.0
    train(net, X, y)
    pruned = prune(net, X, threshold=0.05)
    assert pruned.layers[0].prune_mask.sum() < net.layers[0].prune_mask.sum()
    # original is untouched, pruned edges output exactly zero
    assert net.layers[0].prune_mask.all()
    _, caches = pruned.forward(X, want_caches=True)
    dead = ~pruned.layers[0].prune_mask
    assert np.all(caches[0]["edge"][:, dead] == 0.0)
    # prediction quality survives pruning of irrelevant edges
    mse = np.mean((pruned.predict(X) - y) ** 2)
    assert mse < 0.05 * np.var(y)


def test_prune_refuses_to_empty_a_layer():
    net = _toy_net()
    for layer in net.layers:
        layer.w_base[:] = 0.0
        layer.coeffs[:] = 0.0
    X = np.random.default_rng(8).uniform(-1, 1, (20, 2))
    with pytest.raises(TrainingError):
        prune(net, X, threshold=0.01)
    with pytest.raises(ValueError):
        prune(net, X, threshold=1.5)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    net = _toy_net(reg_lambda=0.002)
    rng = np.random.default_rng(9)
    X = rng.uniform(-1, 1, (150, 2))
    y = X[:, 0] * 3.0 + np.sin(3 * X[:, 1]) + 80.0
    train(net, X, y)
    net2 = prune(net, X, threshold=0.01)
    path = tmp_path / "net.json"
    save_kan(net2, path)
    back = load_kan(path)
    assert back.shape == net2.shape
    assert np.array_equal(back.predict(X), net2.predict(X))
    assert all(np.array_equal(a.prune_mask, b.prune_mask)
               for a, b in zip(back.layers, net2.layers))


def test_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointError):
        load_kan(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(CheckpointError):
        load_kan(bad)
    wrong = tmp_path / "wrong.json"
    wrong.write_text('{"format": "something-else"}')
    with pytest.raises(CheckpointError):
        load_kan(wrong)
    truncated = tmp_path / "trunc.json"
    truncated.write_text('{"format": "kan-checkpoint", "version": 1, "config": {}}')
    with pytest.raises(CheckpointError):
        load_kan(truncated)


def test_grid_search_picks_best_validation_grid():
    rng = np.random.default_rng(10)
    X = rng.uniform(-1, 1, (300, 2))
    y = np.sin(4.0 * X[:, 0]) + X[:, 1] + 30.0
    Xv = rng.uniform(-1, 1, (100, 2))
    yv = np.sin(4.0 * Xv[:, 0]) + Xv[:, 1] + 30.0

    def builder(g):
        return build_network(KanConfig(shape=(2, 1), grid_size=g, steps=40, seed=0))

    net, best_grid, rows = grid_search(builder, X, y, Xv, yv, grids=(3, 8, 15))
    assert best_grid in (3, 8, 15)
    assert len(rows) == 3
    best_row = min(rows, key=lambda r: r["val_mse"])
    assert best_row["grid"] == best_grid
    assert np.mean((net.predict(Xv) - yv) ** 2) == pytest.approx(best_row["val_mse"])
