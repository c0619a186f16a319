"""Constant fitting inside expression trees."""

import numpy as np
import pytest

from autopl.expr import ExpressionTree, Token, evaluate, optimize_constants

ADD = Token.binary("add")
MUL = Token.binary("mul")
SUB = Token.binary("sub")
LOG = Token.unary("log10")
C = Token.const()
X0 = Token.variable("x", 0)


def test_fit_linear_constants():
    rng = np.random.default_rng(0)
    X = rng.uniform(1.0, 10.0, size=(80, 1))
    y = 3.5 * X[:, 0] - 2.0
    tree = ExpressionTree((ADD, MUL, C, X0, C))
    res = optimize_constants(tree, X, y)
    assert res.fittable
    assert res.mse == pytest.approx(0.0, abs=1e-8)
    assert res.tree.constants[0] == pytest.approx(3.5, abs=1e-3)
    assert res.tree.constants[1] == pytest.approx(-2.0, abs=1e-3)


def test_fit_log_model():
    rng = np.random.default_rng(1)
    X = rng.uniform(1.0, 500.0, size=(120, 1))
    y = 20.0 * np.log10(X[:, 0]) + 32.4
    tree = ExpressionTree((ADD, MUL, C, LOG, X0, C))
    res = optimize_constants(tree, X, y)
    assert res.fittable and res.mse < 1e-6
    assert res.tree.constants[0] == pytest.approx(20.0, abs=1e-2)


def test_no_constants_returns_plain_mse():
    X = np.array([[1.0], [2.0], [3.0]])
    y = X[:, 0] + 1.0
    res = optimize_constants(ExpressionTree((X0,)), X, y)
    assert res.fittable
    assert res.mse == pytest.approx(1.0)
    assert res.tree.constants == ()


def test_unfittable_tree_flagged():
    X = np.array([[1.0], [2.0]])
    y = np.array([0.0, 0.0])
    # log10(x - x) is -inf for every row, no constant can rescue it
    tree = ExpressionTree((ADD, C, LOG, SUB, X0, X0))
    res = optimize_constants(tree, X, y)
    assert not res.fittable
    assert res.mse == float("inf")


def test_fit_is_deterministic():
    rng = np.random.default_rng(2)
    X = rng.uniform(0.5, 4.0, size=(60, 1))
    y = 1.7 * X[:, 0] ** 2
    tree = ExpressionTree((MUL, C, Token.unary("square"), X0))
    a = optimize_constants(tree, X, y)
    b = optimize_constants(tree, X, y)
    assert a.tree.constants == b.tree.constants
    assert a.mse == b.mse


def test_fit_improves_over_default_constants():
    rng = np.random.default_rng(3)
    X = rng.uniform(1.0, 9.0, size=(50, 1))
    y = 0.05 * X[:, 0] + 40.0
    tree = ExpressionTree((ADD, MUL, C, X0, C))
    before = float(np.mean((evaluate(tree, X) - y) ** 2))
    res = optimize_constants(tree, X, y)
    assert res.mse < before
