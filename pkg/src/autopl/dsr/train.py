"""Policy-gradient training loops for expression discovery.

Three trainers share one sampled-batch pipeline: a risk-seeking step
that only rewards the top quantile, a vanilla REINFORCE step with an
EWMA baseline, and a priority-queue step that maximizes the likelihood
of the best sequences seen so far.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from autopl.errors import DataError
from autopl.expr.constfit import optimize_constants
from autopl.expr.constraints import ConstraintSet
from autopl.expr.tokens import Vocabulary
from autopl.expr.tree import ExpressionTree, to_infix
from autopl.plmodels import Dataset
from autopl.dsr.optim import Adam
from autopl.dsr.policy import (
    PolicyNetwork,
    SampledBatch,
    SequenceData,
    sample_batch,
    surrogate_loss,
)
from autopl.dsr.reward import reward

POLICY_KINDS = ("rspg", "vpg", "pqt")


@dataclass(frozen=True)
class TrainerConfig:
    policy_kind: str = "rspg"
    batch_size: int = 200
    learning_rate: float = 0.002
    entropy_weight: float = 0.008
    epsilon: float = 0.05
    ewma_alpha: float = 0.25
    queue_k: int = 10
    sample_budget: int = 10000
    reward_threshold: float = 0.999
    hidden_size: int = 32
    const_fit_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.policy_kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.policy_kind!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        if not 0.0 < self.ewma_alpha <= 1.0:
            raise ValueError("ewma_alpha must be in (0, 1]")
        if self.queue_k < 1:
            raise ValueError("queue_k must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.sample_budget < self.batch_size:
            raise ValueError("sample_budget must cover one batch")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.const_fit_iters < 1:
            raise ValueError("const_fit_iters must be positive")


@dataclass
class _QueueEntry:
    reward: float
    order: int
    key: tuple
    data: SequenceData
    infix: str


class MaxRewardPriorityQueue:
    """Top-k sequences by reward, deduplicated by token structure."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = int(capacity)
        self._entries: list[_QueueEntry] = []
        self._keys: set[tuple] = set()
        self._counter = 0

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def min_reward(self) -> float:
        return min(e.reward for e in self._entries) if self._entries else float("-inf")

    @property
    def max_reward(self) -> float:
        return max(e.reward for e in self._entries) if self._entries else float("-inf")

    def add(self, r: float, key: tuple, data: SequenceData, infix: str = "") -> bool:
        """Insert unless a duplicate or below the full queue's minimum."""
        if key in self._keys:
            return False
        if len(self._entries) >= self.capacity:
            worst = min(self._entries, key=lambda e: (e.reward, -e.order))
            if r <= worst.reward:
                return False
            self._entries.remove(worst)
            self._keys.discard(worst.key)
        self._entries.append(_QueueEntry(float(r), self._counter, key, data, infix))
        self._keys.add(key)
        self._counter += 1
        return True

    def absorb(self, batch: SampledBatch) -> int:
        """Feed a rewarded batch through the queue; returns insert count."""
        if batch.rewards is None:
            raise ValueError("batch rewards are unset")
        n_in = 0
        for seq, r, data in zip(batch.sequences, batch.rewards, batch.data):
            n_in += self.add(float(r), seq.key(), data, to_infix(seq))
        return n_in

    def items(self) -> list[_QueueEntry]:
        return sorted(self._entries, key=lambda e: (-e.reward, e.order))


def rspg_step(policy: PolicyNetwork, batch: SampledBatch, epsilon: float,
              entropy_weight: float, opt: Adam) -> dict:
    """Risk-seeking update: only rewards strictly above the empirical
    (1 - epsilon) quantile contribute, weighted by their margin."""
    if batch.rewards is None:
        raise ValueError("batch rewards are unset")
    r = np.asarray(batch.rewards, dtype=float)
    n = r.size
    quantile = float(np.quantile(r, 1.0 - epsilon))
    above = r > quantile
    weights = np.where(above, (r - quantile) / (epsilon * n), 0.0)
    loss, grads = surrogate_loss(policy, batch.data, weights, entropy_weight)
    opt.step(policy.params, grads)
    return {"loss": loss, "quantile": quantile, "n_above": int(above.sum()),
            "no_survivors": not bool(above.any())}


def vpg_step(policy: PolicyNetwork, batch: SampledBatch, baseline: float | None,
             ewma_alpha: float, entropy_weight: float, opt: Adam) -> tuple[dict, float]:
    """REINFORCE update against an EWMA baseline; returns the new baseline."""
    if batch.rewards is None:
        raise ValueError("batch rewards are unset")
    r = np.asarray(batch.rewards, dtype=float)
    mean_r = float(r.mean())
    b = mean_r if baseline is None else float(baseline)
    weights = (r - b) / r.size
    loss, grads = surrogate_loss(policy, batch.data, weights, entropy_weight)
    opt.step(policy.params, grads)
    new_b = ewma_alpha * mean_r + (1.0 - ewma_alpha) * b
    return {"loss": loss, "baseline": b}, new_b


def pqt_step(policy: PolicyNetwork, batch: SampledBatch,
             queue: MaxRewardPriorityQueue, entropy_weight: float,
             opt: Adam) -> dict:
    """Priority-queue update: maximize likelihood of the stored top-k,
    with the entropy bonus taken over the freshly sampled batch."""
    queue.absorb(batch)
    items = queue.items()
    qdata = [e.data for e in items]
    w = np.full(len(qdata), 1.0 / queue.capacity)
    loss_q, grads = surrogate_loss(policy, qdata, w, 0.0)
    if entropy_weight != 0.0:
        loss_e, grads_e = surrogate_loss(policy, batch.data,
                                         np.zeros(batch.n), entropy_weight)
        for name in grads:
            grads[name] += grads_e[name]
        loss_q += loss_e
    opt.step(policy.params, grads)
    return {"loss": loss_q, "queue_min": queue.min_reward,
            "queue_max": queue.max_reward}


@dataclass
class DsrResult:
    best_tree: ExpressionTree | None
    best_reward: float
    history: list[dict] = field(default_factory=list)
    samples_used: int = 0


def _score_batch(batch: SampledBatch, ds: Dataset, cs: ConstraintSet,
                 cache: dict, threads: int = 1,
                 fit_iters: int = 100) -> list[ExpressionTree]:
    """Fill batch.rewards, fitting constants once per unique structure."""
    fitted: list[ExpressionTree | None] = [None] * batch.n
    todo: dict[tuple, list[int]] = {}
    rewards = np.zeros(batch.n)
    for i, seq in enumerate(batch.sequences):
        key = seq.key()
        if key in cache:
            rewards[i], fitted[i] = cache[key]
        else:
            todo.setdefault(key, []).append(i)

    def fit_one(seq: ExpressionTree) -> ExpressionTree:
        if seq.n_constants == 0:
            return seq
        return optimize_constants(seq, ds.X, ds.y, max_iter=fit_iters).tree

    groups = list(todo.items())
    firsts = [batch.sequences[idxs[0]] for _, idxs in groups]
    if threads > 1 and len(firsts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fit_one, firsts))
    else:
        results = [fit_one(s) for s in firsts]
    for (key, idxs), tree in zip(groups, results):
        r = reward(tree, ds, cs)
        cache[key] = (r, tree)
        for i in idxs:
            rewards[i] = r
            fitted[i] = tree
    batch.rewards = rewards
    return fitted  # same order as batch.sequences


def train(config: TrainerConfig, train_ds: Dataset, cs: ConstraintSet,
          vocab: Vocabulary | None = None, threads: int = 1) -> DsrResult:
    """Sample/score/update until the budget runs out or the reward
    threshold is reached; deterministic for a given config seed."""
    if float(np.std(train_ds.y)) == 0.0:
        raise DataError("target is constant")
    if vocab is None:
        vocab = Vocabulary.default(train_ds.feature_names)
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    policy = PolicyNetwork(vocab, hidden_size=config.hidden_size,
                           seed=seeds[0])
    rng = np.random.default_rng(seeds[1])
    opt = Adam(config.learning_rate)
    queue = MaxRewardPriorityQueue(config.queue_k)
    baseline: float | None = None
    cache: dict[tuple, tuple[float, ExpressionTree]] = {}

    best_tree: ExpressionTree | None = None
    best_reward = float("-inf")
    history: list[dict] = []
    samples_used = 0
    step = 0
    while samples_used < config.sample_budget:
        want = min(config.batch_size, config.sample_budget - samples_used)
        batch = sample_batch(policy, want, cs, rng)
        fitted = _score_batch(batch, train_ds, cs, cache, threads,
                              config.const_fit_iters)
        samples_used += batch.n
        step += 1
        i_best = int(np.argmax(batch.rewards))
        if float(batch.rewards[i_best]) > best_reward:
            best_reward = float(batch.rewards[i_best])
            best_tree = fitted[i_best]
        row = {"step": step, "samples": samples_used,
               "best_reward": best_reward,
               "mean_reward": float(np.mean(batch.rewards)),
               "best_expression": to_infix(best_tree)}
        if best_reward >= config.reward_threshold:
            history.append(row)
            break
        if config.policy_kind == "rspg":
            stats = rspg_step(policy, batch, config.epsilon,
                              config.entropy_weight, opt)
        elif config.policy_kind == "vpg":
            stats, baseline = vpg_step(policy, batch, baseline,
                                       config.ewma_alpha,
                                       config.entropy_weight, opt)
        else:
            stats = pqt_step(policy, batch, queue, config.entropy_weight, opt)
        row.update(stats)
        history.append(row)
    return DsrResult(best_tree, best_reward, history, samples_used)
