"""Fitness of a candidate expression against a training dataset."""

from __future__ import annotations

import numpy as np

from autopl.errors import DataError
from autopl.expr.constraints import ConstraintSet, repeat_penalty
from autopl.expr.tree import ExpressionTree, evaluate
from autopl.plmodels import Dataset


def nrmse(pred: np.ndarray, y: np.ndarray) -> float:
    """Root-mean-square error scaled by the population std of the target."""
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    if pred.shape != y.shape or y.ndim != 1 or y.size == 0:
        raise DataError("nrmse needs matching 1-d arrays")
    sigma = float(np.std(y))
    if sigma == 0.0:
        raise DataError("target is constant, nrmse undefined")
    # huge-but-finite predictions may overflow the square; that is just
    # an infinitely bad fit, not an error
    with np.errstate(over="ignore"):
        rmse = float(np.sqrt(np.mean((pred - y) ** 2)))
    return rmse / sigma


def reward(e: ExpressionTree, train: Dataset, cs: ConstraintSet) -> float:
    """Squashed inverse NRMSE in [0, 1], discounted for unmet minimum
    token-repeat rules; any non-finite prediction zeroes the reward."""
    y = train.y
    if float(np.std(y)) == 0.0:
        raise DataError("target is constant, reward undefined")
    pred = evaluate(e, train.X)
    if not np.all(np.isfinite(pred)):
        return 0.0
    r = 1.0 / (1.0 + nrmse(pred, y))
    return float(r * repeat_penalty(e.tokens, cs))
