"""Lossless persistence for spline-edge networks.

Checkpoints are JSON: Python float repr round-trips doubles exactly, so
a save/load cycle reproduces predictions bit for bit.
"""

from __future__ import annotations

import json
import os

import numpy as np

from autopl.errors import CheckpointError
from autopl.kan.bspline import BSplineBasis
from autopl.kan.network import KanConfig, KanLayer, KanNetwork

_FORMAT = "kan-checkpoint"
_VERSION = 1


def save_kan(net: KanNetwork, path) -> None:
    cfg = net.config
    doc = {
        "format": _FORMAT,
        "version": _VERSION,
        "config": {
            "shape": list(cfg.shape),
            "grid_size": cfg.grid_size,
            "order": cfg.order,
            "steps": cfg.steps,
            "reg_lambda": cfg.reg_lambda,
            "seed": cfg.seed,
            "lo": cfg.lo,
            "hi": cfg.hi,
        },
        "layers": [
            {
                "w_base": layer.w_base.tolist(),
                "w_spline": layer.w_spline.tolist(),
                "coeffs": layer.coeffs.tolist(),
                "prune_mask": layer.prune_mask.astype(int).tolist(),
            }
            for layer in net.layers
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_kan(path) -> KanNetwork:
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
        raise CheckpointError(f"not a network checkpoint: {path}")
    if doc.get("version") != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
    try:
        c = doc["config"]
        cfg = KanConfig(shape=tuple(c["shape"]), grid_size=int(c["grid_size"]),
                        order=int(c["order"]), steps=int(c["steps"]),
                        reg_lambda=float(c["reg_lambda"]), seed=int(c["seed"]),
                        lo=float(c["lo"]), hi=float(c["hi"]))
        basis = BSplineBasis(cfg.grid_size, cfg.order, cfg.lo, cfg.hi)
        layers = [
            KanLayer(basis,
                     np.asarray(entry["w_base"], dtype=float),
                     np.asarray(entry["w_spline"], dtype=float),
                     np.asarray(entry["coeffs"], dtype=float),
                     np.asarray(entry["prune_mask"], dtype=bool))
            for entry in doc["layers"]
        ]
        return KanNetwork(layers, cfg)
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
