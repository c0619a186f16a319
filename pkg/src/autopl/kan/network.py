"""Spline-edge network: every edge carries its own learnable 1-d function.

An edge maps a scalar input x to w_base * silu(x) + w_spline * spline(x)
where the spline is a B-spline curve over a fixed interval; layer inputs
are clamped to that interval first.  Node values are plain sums of their
incoming edge outputs, so the whole network is a composition of sums of
univariate functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from autopl.kan.bspline import BSplineBasis


@dataclass(frozen=True)
class KanConfig:
    shape: tuple[int, ...]
    grid_size: int = 5
    order: int = 3
    steps: int = 100
    reg_lambda: float = 0.0
    seed: int = 0
    lo: float = -1.0
    hi: float = 1.05

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(w) for w in self.shape))
        if len(self.shape) < 2 or any(w < 1 for w in self.shape):
            raise ValueError("shape needs at least two positive widths")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be non-negative")


def silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def silu_prime(x: np.ndarray) -> np.ndarray:
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


class KanLayer:
    """One dense block of spline edges between two node rows."""

    def __init__(self, basis: BSplineBasis, w_base: np.ndarray,
                 w_spline: np.ndarray, coeffs: np.ndarray,
                 prune_mask: np.ndarray | None = None):
        self.basis = basis
        self.w_base = np.asarray(w_base, dtype=float)
        self.w_spline = np.asarray(w_spline, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)
        d_in, d_out = self.w_base.shape
        if self.w_spline.shape != (d_in, d_out):
            raise ValueError("w_spline shape mismatch")
        if self.coeffs.shape != (d_in, d_out, basis.n_basis):
            raise ValueError("coeffs shape mismatch")
        if prune_mask is None:
            prune_mask = np.ones((d_in, d_out), dtype=bool)
        self.prune_mask = np.asarray(prune_mask, dtype=bool)
        if self.prune_mask.shape != (d_in, d_out):
            raise ValueError("prune_mask shape mismatch")

    @property
    def d_in(self) -> int:
        return self.w_base.shape[0]

    @property
    def d_out(self) -> int:
        return self.w_base.shape[1]

    def forward(self, X: np.ndarray, want_cache: bool = False):
        """Node outputs (N, d_out); optionally the cache for backprop."""
        X = np.asarray(X, dtype=float)
        xc = np.clip(X, self.basis.lo, self.basis.hi)
        n, d_in = xc.shape
        s = silu(xc)
        flat = self.basis.design_matrix(xc.ravel())
        b = flat.reshape(n, d_in, self.basis.n_basis)
        spl = np.einsum("nim,ijm->nij", b, self.coeffs)
        edge = self.prune_mask * (self.w_base * s[:, :, None]
                                  + self.w_spline * spl)
        out = edge.sum(axis=1)
        if not want_cache:
            return out
        cache = {"X": X, "xc": xc, "s": s, "b": b, "spl": spl, "edge": edge}
        return out, cache

    def backward(self, cache: dict, d_out: np.ndarray,
                 d_edge_extra: np.ndarray | None = None):
        """Gradients for one layer.

        d_out is dL/d(node outputs), d_edge_extra an optional direct
        dL/d(edge output) term (used by the edge-sparsity penalty).
        Returns (grads dict, dL/dX of the layer input).
        """
        xc, s, b, spl = cache["xc"], cache["s"], cache["b"], cache["spl"]
        d_edge = np.broadcast_to(d_out[:, None, :],
                                 (xc.shape[0], self.d_in, self.d_out)).copy()
        if d_edge_extra is not None:
            d_edge += d_edge_extra
        d_edge *= self.prune_mask
        g_wb = np.einsum("nij,ni->ij", d_edge, s)
        g_ws = np.einsum("nij,nij->ij", d_edge, spl)
        g_c = np.einsum("nij,nim->ijm", d_edge * self.w_spline, b)
        # input gradient: through the base path and the spline path;
        # clamping zeroes it outside the interval
        flat_d = self.basis.derivative_matrix(xc.ravel())
        db = flat_d.reshape(xc.shape[0], self.d_in, self.basis.n_basis)
        dspl_dx = np.einsum("nim,ijm->nij", db, self.coeffs)
        d_xc = silu_prime(xc) * np.einsum("nij,ij->ni", d_edge, self.w_base)
        d_xc += np.einsum("nij,nij->ni", d_edge * self.w_spline, dspl_dx)
        inside = (cache["X"] > self.basis.lo) & (cache["X"] < self.basis.hi)
        d_x = d_xc * inside
        return {"w_base": g_wb, "w_spline": g_ws, "coeffs": g_c}, d_x

    def copy(self) -> "KanLayer":
        return KanLayer(self.basis, self.w_base.copy(), self.w_spline.copy(),
                        self.coeffs.copy(), self.prune_mask.copy())


class KanNetwork:
    def __init__(self, layers: Sequence[KanLayer], config: KanConfig):
        self.layers = list(layers)
        self.config = config
        widths = [layers[0].d_in] + [l.d_out for l in layers]
        if tuple(widths) != config.shape:
            raise ValueError("layer widths do not match config shape")
        for a, b in zip(layers, layers[1:]):
            if a.d_out != b.d_in:
                raise ValueError("adjacent layer widths disagree")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.config.shape

    def forward(self, X: np.ndarray, want_caches: bool = False):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.shape[0]:
            raise ValueError(f"expected (n, {self.shape[0]}) input")
        caches = []
        h = X
        for layer in self.layers:
            if want_caches:
                h, cache = layer.forward(h, want_cache=True)
                caches.append(cache)
            else:
                h = layer.forward(h)
        return (h, caches) if want_caches else h

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = self.forward(X)
        if out.shape[1] != 1:
            raise ValueError("predict needs a single output node")
        return out[:, 0]

    def copy(self) -> "KanNetwork":
        return KanNetwork([l.copy() for l in self.layers], self.config)

    # flat parameter vector helpers for whole-network optimizers
    def get_params(self) -> np.ndarray:
        parts = []
        for l in self.layers:
            parts += [l.w_base.ravel(), l.w_spline.ravel(), l.coeffs.ravel()]
        return np.concatenate(parts)

    def set_params(self, theta: np.ndarray) -> None:
        pos = 0
        for l in self.layers:
            for arr in (l.w_base, l.w_spline, l.coeffs):
                n = arr.size
                arr[...] = theta[pos:pos + n].reshape(arr.shape)
                pos += n
        if pos != theta.size:
            raise ValueError("parameter vector length mismatch")


def build_network(config: KanConfig) -> KanNetwork:
    """Fresh network with small random spline curves.

    Base weights scale with 1/sqrt(fan-in) so node sums start modest;
    spline coefficients get low-amplitude noise to break symmetry.
    """
    rng = np.random.default_rng(config.seed)
    basis = BSplineBasis(config.grid_size, config.order, config.lo, config.hi)
    layers = []
    for d_in, d_out in zip(config.shape[:-1], config.shape[1:]):
        w_base = rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_in, d_out))
        w_spline = np.ones((d_in, d_out))
        coeffs = rng.normal(0.0, 0.1, size=(d_in, d_out, basis.n_basis))
        layers.append(KanLayer(basis, w_base, w_spline, coeffs))
    return KanNetwork(layers, config)
