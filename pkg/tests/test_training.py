import numpy as np
import pytest

from elcrf.data import SYNTH_LABELS, SyntheticTaskSpec, TokenSequence, generate_synthetic
from elcrf.features import build_charset, build_vocabulary
from elcrf.model import init_model_params
from elcrf.training import (
    AdamState,
    TrainConfig,
    adam_step,
    finite_difference_check,
    nll_and_gradients,
    predict_labels,
    train,
)

import oracles


def small_model(states_per_label=2, rank=2, mode="low-rank", seed=0, n_seqs=4):
    spec = SyntheticTaskSpec(seed=seed, length_range=(3, 6), pairs_range=(0, 1))
    corpus = generate_synthetic(spec, n_seqs)
    vocab = build_vocabulary(corpus)
    charset = build_charset(corpus)
    params = init_model_params(
        SYNTH_LABELS,
        states_per_label,
        rank,
        mode,
        vocab,
        charset,
        np.random.default_rng(seed),
    )
    return corpus, params


class TestNllAndGradients:
    def test_single_label_model_is_certain(self):
        from elcrf.model import LabelSet

        corpus = [TokenSequence(tokens=("a", "b"), labels=("O", "O"))]
        vocab = build_vocabulary(corpus)
        charset = build_charset(corpus)
        params = init_model_params(
            LabelSet(("O",)), 3, 2, "low-rank", vocab, charset, np.random.default_rng(0)
        )
        nll, grads = nll_and_gradients(corpus, params)
        assert nll == pytest.approx(0.0, abs=1e-10)
        for arr in grads.values():
            np.testing.assert_allclose(arr, 0.0, atol=1e-10)

    def test_emission_gradient_matches_posterior_difference(self):
        corpus, params = small_model()
        seq = corpus[0]
        from elcrf.model import sentence_lattice

        lattice = sentence_lattice(params, seq.tokens)
        y = params.label_set.encode(seq.labels)
        node_free, _ = oracles.enum_marginals(lattice.emit, lattice.trans)
        emit_c = np.where(
            params.partition.consistent_mask(y), lattice.emit, -np.inf
        )
        node_clamped, _ = oracles.enum_marginals(emit_c, lattice.trans)

        # gradient w.r.t. out_b equals the summed per-cell lattice gradient
        _, grads = nll_and_gradients([seq], params)
        expected_bias_grad = (node_free - node_clamped).sum(axis=0)
        np.testing.assert_allclose(grads["out_b"], expected_bias_grad, atol=1e-9)

    def test_matches_finite_differences(self):
        corpus, params = small_model()
        err = finite_difference_check(
            params, corpus, epsilon=1e-5, samples=60, rng=np.random.default_rng(1)
        )
        assert err < 1e-5

    def test_full_rank_matches_finite_differences(self):
        corpus, params = small_model(mode="full-rank")
        err = finite_difference_check(
            params, corpus, epsilon=1e-5, samples=60, rng=np.random.default_rng(2)
        )
        assert err < 1e-5

    def test_batch_gradient_is_mean_of_sequences(self):
        corpus, params = small_model(n_seqs=3)
        _, batch_grads = nll_and_gradients(corpus, params)
        sums = {}
        for seq in corpus:
            _, g = nll_and_gradients([seq], params)
            for name, arr in g.items():
                sums[name] = sums.get(name, 0) + arr
        for name, arr in batch_grads.items():
            np.testing.assert_allclose(arr, sums[name] / len(corpus), atol=1e-12)

    def test_requires_labels(self):
        corpus, params = small_model()
        unlabeled = [TokenSequence(tokens=corpus[0].tokens)]
        with pytest.raises(ValueError):
            nll_and_gradients(unlabeled, params)

    def test_nll_nonnegative(self):
        corpus, params = small_model(n_seqs=6)
        nll, _ = nll_and_gradients(corpus, params)
        assert nll >= 0.0

    def test_workers_agree_with_serial(self):
        corpus, params = small_model(n_seqs=6)
        nll1, g1 = nll_and_gradients(corpus, params, workers=1)
        nll4, g4 = nll_and_gradients(corpus, params, workers=4)
        assert nll1 == pytest.approx(nll4, rel=1e-15)
        for name in g1:
            np.testing.assert_allclose(g1[name], g4[name], atol=1e-15)


class TestFiniteDifferenceCheck:
    def test_detects_corrupted_gradient(self):
        corpus, params = small_model()
        from elcrf import training

        original = training.nll_and_gradients

        def corrupted(batch, p, **kw):
            nll, grads = original(batch, p, **kw)
            # ff_w is large enough that random coordinate sampling hits it
            grads["ff_w"] = grads["ff_w"] * 2.0
            return nll, grads

        training.nll_and_gradients = corrupted
        try:
            err = finite_difference_check(
                params,
                corpus,
                epsilon=1e-5,
                samples=200,
                rng=np.random.default_rng(3),
            )
        finally:
            training.nll_and_gradients = original
        assert err > 0.5

    def test_epsilon_validation(self):
        corpus, params = small_model()
        with pytest.raises(ValueError):
            finite_difference_check(params, corpus, epsilon=1e-2)


class TestAdam:
    def make_state(self, params):
        return AdamState.for_params(params)

    def test_zero_gradient_no_motion(self):
        _, params = small_model()
        state = self.make_state(params)
        before = {k: v.copy() for k, v in params.tensors().items()}
        grads = {k: np.zeros_like(v) for k, v in params.tensors().items()}
        adam_step(params, grads, state)
        assert state.t == 1
        for name, arr in params.tensors().items():
            np.testing.assert_array_equal(arr, before[name])

    def test_first_step_is_signed_learning_rate(self):
        _, params = small_model()
        state = self.make_state(params)
        grads = {k: np.zeros_like(v) for k, v in params.tensors().items()}
        grads["out_b"][0] = 2.0
        before = params.emission.out_b[0]
        adam_step(params, grads, state)
        expected = before - state.learning_rate * 2.0 / (2.0 + state.eps)
        assert params.emission.out_b[0] == pytest.approx(expected, rel=1e-12)

    def test_three_step_trace_matches_hand_recurrence(self):
        _, params = small_model()
        state = self.make_state(params)
        lr, b1, b2, eps = (
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.eps,
        )
        theta = params.emission.out_b[0]
        m = v = 0.0
        for step in range(1, 4):
            g = theta  # gradient of theta^2 / 2
            grads = {k: np.zeros_like(a) for k, a in params.tensors().items()}
            grads["out_b"][0] = g
            adam_step(params, grads, state)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta = theta - lr * (m / (1 - b1**step)) / (
                np.sqrt(v / (1 - b2**step)) + eps
            )
            assert params.emission.out_b[0] == pytest.approx(theta, rel=1e-12)

    def test_nan_gradient_rejected(self):
        _, params = small_model()
        state = self.make_state(params)
        grads = {k: np.zeros_like(v) for k, v in params.tensors().items()}
        grads["out_b"][0] = np.nan
        with pytest.raises(FloatingPointError):
            adam_step(params, grads, state)


class TestTrainLoop:
    def test_step_count_one_epoch(self):
        spec = SyntheticTaskSpec(seed=5, length_range=(3, 5), pairs_range=(0, 1))
        corpus = generate_synthetic(spec, 40)
        vocab = build_vocabulary(corpus)
        charset = build_charset(corpus)
        params = init_model_params(
            SYNTH_LABELS, 2, 2, "low-rank", vocab, charset, np.random.default_rng(0)
        )
        from elcrf import training

        steps = []
        original = training.adam_step

        def counting(p, g, s):
            steps.append(s.t)
            return original(p, g, s)

        training.adam_step = counting
        try:
            cfg = TrainConfig(
                batch_size=20, max_epochs=1, seed=0, dropout=0.0, unk_replace_prob=0.0
            )
            train(cfg, corpus, corpus[:5], params)
        finally:
            training.adam_step = original
        assert len(steps) == 2

    def test_full_batch_descent_monotone(self):
        corpus, params = small_model(n_seqs=6)
        step = 0.05
        prev, grads = nll_and_gradients(corpus, params)
        for _ in range(10):
            tensors = params.tensors()
            for name in tensors:
                tensors[name] -= step * grads[name]
            nll, grads = nll_and_gradients(corpus, params)
            assert nll <= prev + 1e-12
            prev = nll

    def test_memorization(self):
        spec = SyntheticTaskSpec(seed=6, length_range=(5, 9), pairs_range=(1, 1))
        corpus = generate_synthetic(spec, 10)
        vocab = build_vocabulary(corpus)
        charset = build_charset(corpus)
        params = init_model_params(
            SYNTH_LABELS, 8, 8, "low-rank", vocab, charset, np.random.default_rng(0)
        )
        cfg = TrainConfig(
            batch_size=10,
            max_epochs=200,
            patience=200,
            seed=0,
            dropout=0.0,
            unk_replace_prob=0.0,
        )
        best, report = train(cfg, corpus, corpus, params)
        pred = predict_labels(best, corpus)
        gold = [list(s.labels) for s in corpus]
        correct = sum(
            g == p for gs, ps in zip(gold, pred) for g, p in zip(gs, ps)
        )
        total = sum(len(g) for g in gold)
        assert correct == total

    def test_early_stopping_patience(self):
        corpus, params = small_model(n_seqs=10)
        cfg = TrainConfig(
            batch_size=5,
            max_epochs=50,
            patience=1,
            seed=0,
            dropout=0.0,
            unk_replace_prob=0.0,
        )
        _, report = train(cfg, corpus, corpus, params)
        # halts one evaluation after the best epoch (or at max epochs)
        if report.epochs[-1].epoch < 50:
            assert report.epochs[-1].epoch == report.best_epoch + 1

    def test_empty_corpus_rejected(self):
        _, params = small_model()
        with pytest.raises(ValueError):
            train(TrainConfig(), [], [], params)
