"""Sequence policy: masked sampling, replay consistency, gradients."""

import numpy as np
import pytest

from autopl.expr.constraints import ConstraintSet, PrefixState, valid_next_tokens
from autopl.expr.tokens import INVERSE_UNARY, TRIG_NAMES, TokenKind, Vocabulary
from autopl.dsr.policy import (
    PolicyNetwork,
    masked_softmax,
    sample_batch,
    surrogate_loss,
    teacher_forward,
)


def _vocab():
    return Vocabulary.default(["x0", "x1"])


def _tiny_policy(seed=1):
    vocab = Vocabulary.default(["x0"], unary=("log10",), literals=[1],
                               include_const=False)
    return PolicyNetwork(vocab, hidden_size=4, seed=seed)


def test_masked_softmax_zeros_are_exact():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(6, 9)) * 3.0
    mask = rng.random((6, 9)) > 0.4
    mask[0] = False
    mask[1] = True
    p = masked_softmax(logits, mask)
    assert np.all(p[~mask] == 0.0)
    sums = p.sum(axis=1)
    assert np.all(p >= 0.0)
    assert sums[0] == 0.0
    assert np.allclose(sums[1:], 1.0, atol=1e-12)


def test_policy_param_vector_round_trip():
    pol = PolicyNetwork(_vocab(), hidden_size=6, seed=3)
    theta = pol.get_params()
    other = PolicyNetwork(_vocab(), hidden_size=6, seed=9)
    other.set_params(theta)
    for name in pol.PARAM_NAMES:
        assert np.array_equal(pol.params[name], other.params[name])
    with pytest.raises(ValueError):
        other.set_params(theta[:-1])


def test_sample_batch_lengths_and_window():
    pol = PolicyNetwork(_vocab(), seed=0)
    cs = ConstraintSet()
    batch = sample_batch(pol, 200, cs, np.random.default_rng(1))
    assert batch.n == 200
    lens = [len(s.tokens) for s in batch.sequences]
    assert min(lens) >= cs.min_length
    assert max(lens) <= cs.max_length
    assert np.all(batch.log_probs <= 0.0)
    assert np.all(batch.entropies >= 0.0)
    assert batch.rewards is None


def test_sample_batch_deterministic_per_seed():
    cs = ConstraintSet()
    a = sample_batch(PolicyNetwork(_vocab(), seed=4), 40, cs,
                     np.random.default_rng(7))
    b = sample_batch(PolicyNetwork(_vocab(), seed=4), 40, cs,
                     np.random.default_rng(7))
    c = sample_batch(PolicyNetwork(_vocab(), seed=4), 40, cs,
                     np.random.default_rng(8))
    assert [s.key() for s in a.sequences] == [s.key() for s in b.sequences]
    assert np.array_equal(a.log_probs, b.log_probs)
    assert [s.key() for s in a.sequences] != [s.key() for s in c.sequences]


def test_sampled_sequences_pass_independent_replay():
    # replay every sequence through a fresh mask check, token by token
    vocab = _vocab()
    pol = PolicyNetwork(vocab, seed=2)
    cs = ConstraintSet()
    batch = sample_batch(pol, 300, cs, np.random.default_rng(3))
    for seq in batch.sequences:
        state = PrefixState()
        for tok in seq.tokens:
            mask = valid_next_tokens(state, cs, vocab)
            assert mask[vocab.index[tok.name]], seq.tokens
            state.push(tok)
        assert state.is_complete


def test_sampled_sequences_respect_composition_rules():
    vocab = _vocab()
    pol = PolicyNetwork(vocab, seed=5)
    cs = ConstraintSet()
    batch = sample_batch(pol, 300, cs, np.random.default_rng(6))
    for seq in batch.sequences:
        stack = []
        trig_depth = 0
        for tok in seq.tokens:
            if trig_depth > 0:
                assert tok.name not in TRIG_NAMES
            if stack and stack[-1][0].kind is TokenKind.UNARY:
                parent = stack[-1][0]
                assert not tok.is_constant_leaf
                assert INVERSE_UNARY.get(parent.name) != tok.name
            if tok.is_operator:
                stack.append([tok, tok.arity, True])
                if tok.name in TRIG_NAMES:
                    trig_depth += 1
            else:
                const = tok.is_constant_leaf
                while stack:
                    stack[-1][1] -= 1
                    stack[-1][2] = stack[-1][2] and const
                    if stack[-1][1] > 0:
                        break
                    top, _, all_const = stack.pop()
                    assert not all_const, "operator with all-constant children"
                    if top.name in TRIG_NAMES:
                        trig_depth -= 1
                    const = False


def test_min_length_relaxation_allows_short_trees():
    pol = PolicyNetwork(_vocab(), seed=0)
    batch = sample_batch(pol, 150, ConstraintSet(min_length=1),
                         np.random.default_rng(2))
    lens = [len(s.tokens) for s in batch.sequences]
    assert min(lens) < 4


def test_teacher_replay_matches_sampled_log_probs():
    pol = PolicyNetwork(_vocab(), seed=11)
    batch = sample_batch(pol, 60, ConstraintSet(), np.random.default_rng(12))
    logp, ents, _ = teacher_forward(pol, batch.data)
    assert np.allclose(logp, batch.log_probs, atol=1e-10, rtol=0.0)
    assert np.allclose(ents, batch.entropies, atol=1e-10, rtol=0.0)


def test_surrogate_gradients_match_finite_differences():
    pol = _tiny_policy()
    batch = sample_batch(pol, 12, ConstraintSet(min_length=1),
                         np.random.default_rng(2))
    w = np.random.default_rng(3).uniform(-1.0, 1.0, 12)
    beta = 0.37
    _, grads = surrogate_loss(pol, batch.data, w, beta)
    flat = np.concatenate([grads[n].ravel() for n in pol.PARAM_NAMES])
    theta = pol.get_params()
    eps = 1e-5
    for i in np.random.default_rng(4).choice(theta.size, 60, replace=False):
        tp = theta.copy()
        tp[i] += eps
        pol.set_params(tp)
        lp = surrogate_loss(pol, batch.data, w, beta)[0]
        tm = theta.copy()
        tm[i] -= eps
        pol.set_params(tm)
        lm = surrogate_loss(pol, batch.data, w, beta)[0]
        numeric = (lp - lm) / (2.0 * eps)
        assert flat[i] == pytest.approx(numeric, rel=1e-4, abs=1e-6)


def test_entropy_only_loss_still_produces_gradients():
    pol = _tiny_policy(seed=6)
    batch = sample_batch(pol, 10, ConstraintSet(min_length=1),
                         np.random.default_rng(5))
    _, grads = surrogate_loss(pol, batch.data, np.zeros(10), 0.5)
    total = sum(float(np.abs(g).sum()) for g in grads.values())
    assert total > 0.0


def test_zero_weights_zero_entropy_is_exactly_no_gradient():
    pol = _tiny_policy(seed=7)
    batch = sample_batch(pol, 10, ConstraintSet(min_length=1),
                         np.random.default_rng(8))
    loss, grads = surrogate_loss(pol, batch.data, np.zeros(10), 0.0)
    assert loss == 0.0
    for g in grads.values():
        assert np.all(g == 0.0)


def test_sample_batch_rejects_bad_count():
    with pytest.raises(ValueError):
        sample_batch(PolicyNetwork(_vocab()), 0, ConstraintSet(),
                     np.random.default_rng(0))
