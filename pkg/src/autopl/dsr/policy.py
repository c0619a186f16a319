"""Autoregressive sequence policy for symbolic regression.

A single gated recurrent cell conditions each generation step on the
parent and sibling of the position being filled, emits logits over the
token vocabulary, and samples under the hard constraint mask.  Sampling
records the per-step masks and inputs so trainers can replay the exact
distributions when computing gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from autopl.errors import TrainingError
from autopl.expr.constraints import ConstraintSet, PrefixState
from autopl.expr.tokens import Vocabulary
from autopl.expr.tree import ExpressionTree

_INIT_SCALE = 0.1
_RESAMPLE_CAP = 50


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class PolicyNetwork:
    """Gated recurrent policy over a fixed token vocabulary."""

    PARAM_NAMES = ("wz", "wr", "wc", "uz", "ur", "uc",
                   "bz", "br", "bc", "wo", "bo")

    def __init__(self, vocab: Vocabulary, hidden_size: int = 32, seed: int = 0):
        if hidden_size < 1:
            raise ValueError("hidden_size must be positive")
        self.vocab = vocab
        self.n_tokens = len(vocab)
        self.hidden_size = int(hidden_size)
        # parent and sibling slots, each with an extra "empty" marker
        self.input_size = 2 * (self.n_tokens + 1)
        rng = np.random.default_rng(seed)
        d, h, v = self.input_size, self.hidden_size, self.n_tokens
        self.params: dict[str, np.ndarray] = {}
        for name, shape in (("wz", (d, h)), ("wr", (d, h)), ("wc", (d, h)),
                            ("uz", (h, h)), ("ur", (h, h)), ("uc", (h, h)),
                            ("bz", (h,)), ("br", (h,)), ("bc", (h,)),
                            ("wo", (h, v)), ("bo", (v,))):
            self.params[name] = rng.uniform(-_INIT_SCALE, _INIT_SCALE, shape)

    # -- parameter vector ---------------------------------------------------

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in self.PARAM_NAMES])

    def set_params(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        pos = 0
        for n in self.PARAM_NAMES:
            p = self.params[n]
            block = theta[pos:pos + p.size]
            if block.size != p.size:
                raise ValueError("parameter vector has wrong length")
            self.params[n] = block.reshape(p.shape).copy()
            pos += p.size
        if pos != theta.size:
            raise ValueError("parameter vector has wrong length")

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {n: np.zeros_like(p) for n, p in self.params.items()}

    # -- recurrent step -----------------------------------------------------

    def step(self, x: np.ndarray, h: np.ndarray):
        """One cell update for a batch of step inputs; returns the pieces
        needed for backprop."""
        p = self.params
        z = _sigmoid(x @ p["wz"] + h @ p["uz"] + p["bz"])
        r = _sigmoid(x @ p["wr"] + h @ p["ur"] + p["br"])
        rh = r * h
        c = np.tanh(x @ p["wc"] + rh @ p["uc"] + p["bc"])
        h_new = (1.0 - z) * h + z * c
        logits = h_new @ p["wo"] + p["bo"]
        return h_new, logits, (z, r, rh, c)

    def encode_step_input(self, state: PrefixState) -> np.ndarray:
        """Parent/sibling one-hot pair for the next position of a prefix."""
        x = np.zeros(self.input_size)
        empty = self.n_tokens
        parent, sibling = state.parent, state.sibling
        ip = self.vocab.index[parent.name] if parent is not None else empty
        isb = self.vocab.index[sibling.name] if sibling is not None else empty
        x[ip] = 1.0
        x[self.n_tokens + 1 + isb] = 1.0
        return x


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax restricted to masked-in entries; masked-out mass is exactly 0.

    Rows whose mask is entirely false come back as all zeros.
    """
    logits = np.asarray(logits, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    shifted = np.where(mask, logits, -np.inf)
    rowmax = np.max(np.where(mask, logits, -np.inf), axis=-1, keepdims=True)
    any_valid = np.isfinite(rowmax)
    rowmax = np.where(any_valid, rowmax, 0.0)
    with np.errstate(invalid="ignore"):
        e = np.exp(shifted - rowmax)
    e = np.where(mask, e, 0.0)
    total = e.sum(axis=-1, keepdims=True)
    return np.divide(e, total, out=np.zeros_like(e), where=total > 0)


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log(p), 0.0)
    return -t.sum(axis=-1)


@dataclass
class SequenceData:
    """Replay record for one sampled sequence: chosen token indices plus
    the constraint masks and step inputs seen while sampling."""

    indices: np.ndarray
    masks: np.ndarray
    inputs: np.ndarray

    @property
    def length(self) -> int:
        return int(self.indices.size)


@dataclass
class SampledBatch:
    sequences: list[ExpressionTree]
    log_probs: np.ndarray
    entropies: np.ndarray
    data: list[SequenceData]
    rewards: np.ndarray | None = field(default=None)

    @property
    def n(self) -> int:
        return len(self.sequences)


def sample_batch(policy: PolicyNetwork, n: int, cs: ConstraintSet,
                 rng: np.random.Generator) -> SampledBatch:
    """Sample n complete constraint-clean sequences (rewards unset).

    Prefixes whose mask empties out are dropped and resampled; if the
    grammar keeps dead-ending past a retry cap, that is a hard error.
    """
    if n < 1:
        raise ValueError("need at least one sequence")
    vocab = policy.vocab
    sequences: list[ExpressionTree] = []
    log_probs: list[float] = []
    entropies: list[float] = []
    data: list[SequenceData] = []
    dropped = 0
    while len(sequences) < n:
        want = n - len(sequences)
        if dropped > _RESAMPLE_CAP * n:
            raise TrainingError(
                f"sampling dead-ended {dropped} times for {n} sequences")
        out = _sample_round(policy, want, cs, rng)
        for seq, lp, ent, rec in out["finished"]:
            sequences.append(seq)
            log_probs.append(lp)
            entropies.append(ent)
            data.append(rec)
        dropped += out["dropped"]
    return SampledBatch(sequences, np.asarray(log_probs),
                        np.asarray(entropies), data)


def _sample_round(policy: PolicyNetwork, m: int, cs: ConstraintSet,
                  rng: np.random.Generator):
    vocab = policy.vocab
    v = policy.n_tokens
    states = [PrefixState() for _ in range(m)]
    h = np.zeros((m, policy.hidden_size))
    logp = np.zeros(m)
    ent_sum = np.zeros(m)
    steps = np.zeros(m, dtype=int)
    tokens: list[list] = [[] for _ in range(m)]
    rec_idx: list[list[int]] = [[] for _ in range(m)]
    rec_mask: list[list[np.ndarray]] = [[] for _ in range(m)]
    rec_input: list[list[np.ndarray]] = [[] for _ in range(m)]
    done = np.zeros(m, dtype=bool)
    dead = np.zeros(m, dtype=bool)

    while True:
        open_rows = np.flatnonzero(~done & ~dead)
        if open_rows.size == 0:
            break
        masks = np.zeros((m, v), dtype=bool)
        x = np.zeros((m, policy.input_size))
        for i in open_rows:
            mk = states[i].mask(cs, vocab)
            if not mk.any():
                dead[i] = True
                continue
            masks[i] = mk
            x[i] = policy.encode_step_input(states[i])
        active = ~done & ~dead
        if not active.any():
            break
        h_new, logits, _ = policy.step(x, h)
        h = np.where(active[:, None], h_new, h)
        probs = masked_softmax(logits, masks)
        cum = np.cumsum(probs, axis=1)
        u = rng.random(m)
        scaled = u * cum[:, -1]
        choice = (scaled[:, None] >= cum).sum(axis=1)
        for i in np.flatnonzero(active):
            a = int(choice[i])
            tok = vocab[a]
            logp[i] += float(np.log(probs[i, a]))
            ent_sum[i] += float(_entropy_rows(probs[i]))
            steps[i] += 1
            tokens[i].append(tok)
            rec_idx[i].append(a)
            rec_mask[i].append(masks[i].copy())
            rec_input[i].append(x[i].copy())
            states[i].push(tok)
            if states[i].is_complete:
                done[i] = True

    finished = []
    for i in np.flatnonzero(done):
        rec = SequenceData(np.asarray(rec_idx[i], dtype=int),
                           np.asarray(rec_mask[i], dtype=bool),
                           np.asarray(rec_input[i]))
        finished.append((ExpressionTree(tuple(tokens[i])), float(logp[i]),
                         float(ent_sum[i] / steps[i]), rec))
    return {"finished": finished, "dropped": int(dead.sum())}


# ---------------------------------------------------------------------------
# teacher-forced replay and gradients


def teacher_forward(policy: PolicyNetwork, data: list[SequenceData]):
    """Replay recorded sequences under current parameters.

    Returns per-sequence log probs, mean step entropies, and the cache
    needed by policy_backward.
    """
    n = len(data)
    if n == 0:
        raise ValueError("empty sequence batch")
    t_max = max(d.length for d in data)
    v = policy.n_tokens
    x_all = np.zeros((n, t_max, policy.input_size))
    m_all = np.zeros((n, t_max, v), dtype=bool)
    a_all = np.zeros((n, t_max), dtype=int)
    valid = np.zeros((n, t_max), dtype=bool)
    for i, d in enumerate(data):
        t = d.length
        x_all[i, :t] = d.inputs
        m_all[i, :t] = d.masks
        a_all[i, :t] = d.indices
        valid[i, :t] = True

    h = np.zeros((n, policy.hidden_size))
    steps = []
    logp = np.zeros(n)
    ent_sum = np.zeros(n)
    rows = np.arange(n)
    for t in range(t_max):
        vt = valid[:, t]
        h_new, logits, (z, r, rh, c) = policy.step(x_all[:, t], h)
        probs = masked_softmax(logits, m_all[:, t])
        h_next = np.where(vt[:, None], h_new, h)
        steps.append({"x": x_all[:, t], "h_prev": h, "z": z, "r": r,
                      "rh": rh, "c": c, "p": probs, "valid": vt,
                      "a": a_all[:, t]})
        chosen = probs[rows, a_all[:, t]]
        with np.errstate(divide="ignore"):
            logp += np.where(vt, np.log(np.where(chosen > 0, chosen, 1.0)), 0.0)
        ent_sum += np.where(vt, _entropy_rows(probs), 0.0)
        h = h_next
    lengths = valid.sum(axis=1)
    return logp, ent_sum / lengths, {"steps": steps, "lengths": lengths}


def policy_backward(policy: PolicyNetwork, cache: dict,
                    dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate per-step logit gradients through the recurrent cell."""
    p = policy.params
    steps = cache["steps"]
    n = steps[0]["p"].shape[0]
    grads = policy.zero_grads()
    dh_next = np.zeros((n, policy.hidden_size))
    for t in range(len(steps) - 1, -1, -1):
        st = steps[t]
        vt = st["valid"][:, None].astype(float)
        dl = dlogits[:, t, :] * vt
        z, r, rh, c, h_prev, x = (st["z"], st["r"], st["rh"], st["c"],
                                  st["h_prev"], st["x"])
        h_new = (1.0 - z) * h_prev + z * c
        grads["wo"] += h_new.T @ dl
        grads["bo"] += dl.sum(axis=0)
        dh = dh_next + dl @ p["wo"].T
        # masked pre-activation gradients keep rows that had already
        # finished by step t from touching the parameters
        dz_pre = dh * (c - h_prev) * z * (1.0 - z) * vt
        dc_pre = dh * z * (1.0 - c * c) * vt
        drh = dc_pre @ p["uc"].T
        dr_pre = drh * h_prev * r * (1.0 - r)
        dh_prev = (dh * (1.0 - z) + drh * r
                   + dz_pre @ p["uz"].T + dr_pre @ p["ur"].T)
        for nm, dpre in (("z", dz_pre), ("r", dr_pre), ("c", dc_pre)):
            grads["w" + nm] += x.T @ dpre
            grads["b" + nm] += dpre.sum(axis=0)
        grads["uz"] += h_prev.T @ dz_pre
        grads["ur"] += h_prev.T @ dr_pre
        grads["uc"] += rh.T @ dc_pre
        # finished rows carry their gradient through the frozen state
        dh_next = np.where(st["valid"][:, None], dh_prev, dh)
    return grads


def surrogate_loss(policy: PolicyNetwork, data: list[SequenceData],
                   weights: np.ndarray, entropy_weight: float):
    """Loss -sum_i w_i log p(tau_i) - beta * mean_i entropy_i and its
    parameter gradients under the recorded masks."""
    weights = np.asarray(weights, dtype=float)
    logp, ents, cache = teacher_forward(policy, data)
    n = len(data)
    loss = -float(weights @ logp) - entropy_weight * float(ents.mean())
    steps = cache["steps"]
    lengths = cache["lengths"]
    t_max = len(steps)
    v = policy.n_tokens
    dlogits = np.zeros((n, t_max, v))
    rows = np.arange(n)
    for t, st in enumerate(steps):
        probs = st["p"]
        onehot = np.zeros_like(probs)
        onehot[rows, st["a"]] = 1.0
        term = weights[:, None] * (probs - onehot)
        if entropy_weight != 0.0:
            with np.errstate(divide="ignore", invalid="ignore"):
                plogp = np.where(probs > 0, probs * np.log(probs), 0.0)
            h_t = -plogp.sum(axis=1, keepdims=True)
            dent = plogp + probs * h_t
            term = term + (entropy_weight / (n * lengths))[:, None] * dent
        dlogits[:, t, :] = term * st["valid"][:, None]
    grads = policy_backward(policy, cache, dlogits)
    return loss, grads
