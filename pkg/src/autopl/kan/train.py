"""Whole-network training, edge importance, and pruning.

Training is full-batch: mean squared error plus an L1 penalty on mean
absolute edge outputs, minimized with bounded-memory BFGS so the step
count in the config is the only schedule knob.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from autopl.errors import TrainingError
from autopl.kan.network import KanNetwork

GRID_CHOICES = (5, 8, 10, 15, 20, 30, 40, 50)


@dataclass(frozen=True)
class TrainResult:
    net: KanNetwork
    history: list[dict]
    final_mse: float


def _loss_and_grad(net: KanNetwork, X: np.ndarray, y2d: np.ndarray,
                   lamb: float):
    out, caches = net.forward(X, want_caches=True)
    n = X.shape[0]
    resid = out - y2d
    mse = float(np.mean(resid ** 2))
    d_y = (2.0 / resid.size) * resid
    reg = 0.0
    grads = [None] * len(net.layers)
    for li in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[li]
        edge = caches[li]["edge"]
        extra = None
        if lamb > 0.0:
            reg += lamb * float(np.abs(edge).mean(axis=0).sum())
            extra = (lamb / n) * np.sign(edge)
        grads[li], d_y = layer.backward(caches[li], d_y, extra)
    flat = np.concatenate([np.concatenate([g["w_base"].ravel(),
                                           g["w_spline"].ravel(),
                                           g["coeffs"].ravel()])
                           for g in grads])
    return mse + reg, flat, mse, reg


def _shift_output(net: KanNetwork, offset: float) -> None:
    """Add a constant to the network output, exactly.

    Splines sum to one on the clamped interval, so a uniform shift of
    the last layer's coefficients moves the output by the same amount.
    """
    last = net.layers[-1]
    shiftable = last.prune_mask & (last.w_spline != 0.0)
    live = int(shiftable.sum())
    if live == 0:
        raise TrainingError("no trainable edge reaches the output node")
    delta = np.zeros_like(last.w_spline)
    delta[shiftable] = offset / (live * last.w_spline[shiftable])
    last.coeffs += delta[:, :, None]


def _scale_output(net: KanNetwork, factor: float) -> None:
    last = net.layers[-1]
    last.w_base *= factor
    last.coeffs *= factor


def train(net: KanNetwork, X: np.ndarray, y: np.ndarray) -> TrainResult:
    """Fit the network to (X, y) in place and report the loss history.

    Optimization runs against the standardized target: pathloss spans
    hundreds of dB, and chasing it in raw units forces the first layer
    far outside the spline interval where clamping kills gradients.
    The target mean and scale are folded back into the last layer
    afterwards, exactly, so predictions stay in original units.  The
    history reports MSE in original units; the regularizer sums mean
    absolute edge outputs in standardized space.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError("y must be 1-d and aligned with X")
    if net.shape[-1] != 1:
        raise ValueError("training expects a single output node")
    cfg = net.config
    mu = float(np.mean(y))
    sigma = float(np.std(y))
    if sigma == 0.0 or not np.isfinite(sigma):
        raise TrainingError("target is constant or non-finite")
    z2d = ((y - mu) / sigma)[:, None]

    # move the network itself into standardized space and zero its mean
    # prediction (exact; also maps an already-trained network back for
    # further training)
    _scale_output(net, 1.0 / sigma)
    _shift_output(net, -float(np.mean(net.predict(X))))

    history: list[dict] = []

    def objective(theta: np.ndarray):
        net.set_params(theta)
        loss, grad, _, _ = _loss_and_grad(net, X, z2d, cfg.reg_lambda)
        return loss, grad

    def record(theta: np.ndarray):
        net.set_params(theta)
        _, _, mse, reg = _loss_and_grad(net, X, z2d, cfg.reg_lambda)
        history.append({"step": len(history) + 1, "mse": mse * sigma ** 2,
                        "reg": reg, "loss": mse + reg})

    res = optimize.minimize(objective, net.get_params(), jac=True,
                            method="L-BFGS-B", callback=record,
                            options={"maxiter": cfg.steps,
                                     "maxcor": 20, "ftol": 1e-14,
                                     "gtol": 1e-12})
    net.set_params(res.x)
    # fold mean and scale back so predictions are in original units
    _scale_output(net, sigma)
    _shift_output(net, mu)
    final_mse = float(np.mean((net.predict(X) - y) ** 2))
    if not np.isfinite(final_mse):
        raise TrainingError("training diverged to a non-finite loss")
    history.append({"step": len(history) + 1, "mse": final_mse,
                    "reg": float(res.fun) - final_mse / sigma ** 2,
                    "loss": float(res.fun)})
    return TrainResult(net=net, history=history, final_mse=final_mse)


def edge_importance(net: KanNetwork, X: np.ndarray) -> list[np.ndarray]:
    """Mean |edge output| per edge, scaled to [0, 1] within each layer."""
    _, caches = net.forward(np.asarray(X, dtype=float), want_caches=True)
    scores = []
    for layer, cache in zip(net.layers, caches):
        imp = np.abs(cache["edge"]).mean(axis=0) * layer.prune_mask
        top = imp.max()
        scores.append(imp / top if top > 0 else imp)
    return scores


def prune(net: KanNetwork, X: np.ndarray, threshold: float = 0.01) -> KanNetwork:
    """New network with low-importance edges masked out.

    Importances are relative within each layer, so the threshold is a
    fraction of the strongest edge.  Refuses to empty a layer.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    scores = edge_importance(net, X)
    out = net.copy()
    for layer, imp in zip(out.layers, scores):
        keep = layer.prune_mask & (imp >= threshold)
        if not keep.any():
            raise TrainingError("pruning would remove every edge in a layer")
        layer.prune_mask = keep
    return out


def grid_search(base_net_builder, X, y, X_val, y_val,
                grids=GRID_CHOICES) -> tuple[KanNetwork, int, list[dict]]:
    """Train one fresh network per grid size, pick the best validation MSE.

    base_net_builder maps a grid size to an untrained network.  Ties go
    to the coarser grid.
    """
    rows = []
    best = None
    for g in grids:
        net = base_net_builder(int(g))
        result = train(net, X, y)
        val_mse = float(np.mean((net.predict(X_val) - y_val) ** 2))
        rows.append({"grid": int(g), "train_mse": result.final_mse,
                     "val_mse": val_mse})
        if best is None or val_mse < best[0]:
            best = (val_mse, int(g), net)
    return best[2], best[1], rows
