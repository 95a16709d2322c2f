import numpy as np
import pytest

from emotichat.emotion import (
    ClassifierError,
    CnnConfig,
    _backward,
    _forward,
    cnn_forward,
    init_classifier,
    load_classifier,
    predict_emotion,
    save_classifier,
    train_classifier,
)
from emotichat.embeddings import WordVectorTable
from emotichat.text import TokenSequence, build_vocabulary

from naive_reference import naive_cnn_logits
from synth import make_marker_dataset


def tiny_setup(rng, widths=(2, 3), filters=2, num_classes=3, emb_dim=6, keep=1.0, seed=2):
    words = [f"w{i}" for i in range(9)]
    table = WordVectorTable(emb_dim, {w: rng.normal(size=emb_dim) for w in words[:5]})
    vocab = build_vocabulary([words], min_count=1)
    config = CnnConfig(
        filter_widths=widths, filters_per_width=filters, embedding_dim=emb_dim,
        num_classes=num_classes, dropout_keep=keep, max_len=10, seed=seed,
    )
    params = init_classifier(config, vocab, table, [f"c{i}" for i in range(num_classes)])
    return params, vocab, table


def seq(ids, true_length, max_len=10):
    arr = np.full(max_len, 0, dtype=np.int64)
    arr[: len(ids)] = ids
    return TokenSequence(ids=arr, true_length=true_length)


class TestConfig:
    def test_bad_widths(self):
        with pytest.raises(ClassifierError):
            CnnConfig(filter_widths=(0, 2))

    def test_bad_classes(self):
        with pytest.raises(ClassifierError):
            CnnConfig(num_classes=1)

    def test_bad_dropout(self):
        with pytest.raises(ClassifierError):
            CnnConfig(dropout_keep=0.0)


class TestInit:
    def test_reserved_rows_zero(self, rng):
        params, _, _ = tiny_setup(rng)
        np.testing.assert_array_equal(params.tensors["embedding"][0], np.zeros(6))
        np.testing.assert_array_equal(params.tensors["embedding"][1], np.zeros(6))

    def test_table_words_copied(self, rng):
        params, vocab, table = tiny_setup(rng)
        idx = vocab.token_to_id["w0"]
        np.testing.assert_array_equal(params.tensors["embedding"][idx], table.get("w0"))

    def test_out_of_table_words_nonzero(self, rng):
        params, vocab, _ = tiny_setup(rng)
        idx = vocab.token_to_id["w7"]  # not in the 5-word table
        assert np.abs(params.tensors["embedding"][idx]).max() > 0

    def test_dimension_mismatch_rejected(self, rng):
        words = ["a", "b"]
        table = WordVectorTable(4, {w: rng.normal(size=4) for w in words})
        vocab = build_vocabulary([words])
        with pytest.raises(ClassifierError):
            init_classifier(CnnConfig(embedding_dim=8, num_classes=2), vocab, table, ["x", "y"])


class TestForward:
    def test_zero_params_give_uniform(self, rng):
        params, _, _ = tiny_setup(rng)
        for name in params.trainable():
            params.tensors[name][:] = 0.0
        logits = cnn_forward(params, seq([3, 4, 5, 6], 4))
        np.testing.assert_array_equal(logits, np.zeros(3))

    def test_single_width_one_token_hand_computed(self, rng):
        # width 1, one filter: logit = out_w * relu(kernel . emb + bias) + out_b
        words = ["a", "b"]
        table = WordVectorTable(3, {"a": np.array([1.0, -2.0, 0.5]), "b": np.zeros(3)})
        vocab = build_vocabulary([words])
        config = CnnConfig(filter_widths=(1,), filters_per_width=1, embedding_dim=3,
                           num_classes=2, dropout_keep=1.0, max_len=4, seed=0)
        params = init_classifier(config, vocab, table, ["x", "y"])
        params.tensors["conv1.kernel"] = np.array([[[2.0], [1.0], [-1.0]]])
        params.tensors["conv1.bias"] = np.array([0.25])
        params.tensors["out.weight"] = np.array([[3.0, -1.0]])
        params.tensors["out.bias"] = np.array([0.5, 0.5])
        feature = max(0.0, 2.0 * 1.0 + 1.0 * (-2.0) + (-1.0) * 0.5 + 0.25)  # relu(-0.25) = 0
        expected = np.array([3.0 * feature + 0.5, -1.0 * feature + 0.5])
        logits = cnn_forward(params, seq([vocab.token_to_id["a"]], 1, max_len=4))
        np.testing.assert_allclose(logits, expected)

    def test_matches_naive_reference(self, rng):
        for trial in range(3):
            params, _, _ = tiny_setup(rng, seed=trial)
            length = int(rng.integers(3, 9))
            ids = list(rng.integers(3, 12, size=length))
            logits = cnn_forward(params, seq(ids, length))
            naive = naive_cnn_logits(params.tensors, (2, 3), 2, ids, length)
            np.testing.assert_allclose(logits, naive, atol=1e-10)

    def test_short_sequence_rejected(self, rng):
        params, _, _ = tiny_setup(rng)
        with pytest.raises(ClassifierError):
            cnn_forward(params, seq([3, 4], 2))  # max width is 3

    def test_appending_pad_never_changes_logits(self, rng):
        params, _, _ = tiny_setup(rng)
        base = cnn_forward(params, seq([3, 4, 5, 6], 4))
        padded = cnn_forward(params, seq([3, 4, 5, 6, 0, 0, 0], 4))
        np.testing.assert_array_equal(base, padded)


class TestGradients:
    def test_finite_differences_all_groups(self, rng):
        params, _, _ = tiny_setup(rng, seed=5)
        ids = np.array([[3, 4, 5, 6, 7, 0], [8, 9, 10, 11, 0, 0]])
        lengths = np.array([5, 4])
        gold = np.array([1, 2])

        def loss():
            logits, _ = _forward(params, ids, lengths)
            shifted = logits - logits.max(axis=1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            return float(-log_probs[np.arange(2), gold].mean())

        logits, cache = _forward(params, ids, lengths)
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True)))
        d_logits = probs.copy()
        d_logits[np.arange(2), gold] -= 1.0
        d_logits /= 2
        grads = _backward(params, cache, d_logits)

        eps = 1e-5
        for name, grad_arr in grads.items():
            flat = params.tensors[name].reshape(-1)
            fd = np.empty_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                plus = loss()
                flat[i] = orig - eps
                minus = loss()
                flat[i] = orig
                fd[i] = (plus - minus) / (2 * eps)
            np.testing.assert_allclose(
                grad_arr.reshape(-1), fd, rtol=1e-4, atol=1e-8,
                err_msg=f"gradient mismatch in {name}",
            )

    def test_embedding_is_frozen(self, rng):
        params, _, _ = tiny_setup(rng)
        assert "embedding" not in params.trainable()


class TestTraining:
    def test_separable_classes_learned(self):
        data, labels = make_marker_dataset(n_classes=2, per_class=400, filler_words=10, seed=1)
        table = WordVectorTable(8, {})
        config = CnnConfig(embedding_dim=8, num_classes=2, filters_per_width=8,
                           learning_rate=0.02, epochs=2, batch_size=32, max_len=16, seed=1)
        params, trace = train_classifier(data, config, table, labels)
        preds = [predict_emotion(params, text)[0] for text, _ in data]
        accuracy = np.mean([p == lab for p, (_, lab) in zip(preds, data)])
        assert accuracy >= 0.99
        assert all(np.isfinite(v) for v in trace)

    def test_zero_learning_rate_freezes(self):
        data, labels = make_marker_dataset(n_classes=2, per_class=40, filler_words=8, seed=2)
        table = WordVectorTable(8, {})
        config = CnnConfig(embedding_dim=8, num_classes=2, filters_per_width=4,
                           learning_rate=0.0, epochs=1, batch_size=16, max_len=16, seed=2)
        params, _ = train_classifier(data, config, table, labels)
        fresh = init_classifier(config, params.vocab, table, labels)
        for name in params.trainable():
            np.testing.assert_array_equal(params.tensors[name], fresh.tensors[name])

    def test_unknown_label_rejected_before_training(self):
        table = WordVectorTable(8, {})
        config = CnnConfig(embedding_dim=8, num_classes=2, batch_size=2, max_len=16)
        with pytest.raises(ClassifierError, match="rogue"):
            train_classifier([("some text here", "rogue")] * 4, config, table, ["a", "b"])

    def test_deterministic(self):
        data, labels = make_marker_dataset(n_classes=2, per_class=30, filler_words=8, seed=3)
        table = WordVectorTable(8, {})
        config = CnnConfig(embedding_dim=8, num_classes=2, filters_per_width=4,
                           learning_rate=0.005, epochs=2, batch_size=16, max_len=16, seed=3)
        _, trace1 = train_classifier(data, config, table, labels)
        _, trace2 = train_classifier(data, config, table, labels)
        assert trace1 == trace2


class TestPredict:
    def test_uniform_logits_tie_goes_to_first_label(self, rng):
        params, _, _ = tiny_setup(rng)
        for name in params.trainable():
            params.tensors[name][:] = 0.0
        label, probs = predict_emotion(params, "w0 w1 w2 w3")
        assert label == "c0"
        np.testing.assert_allclose(probs, np.full(3, 1 / 3))

    def test_marker_model_predicts_marker_class(self):
        data, labels = make_marker_dataset(n_classes=2, per_class=400, filler_words=10, seed=1)
        table = WordVectorTable(8, {})
        config = CnnConfig(embedding_dim=8, num_classes=2, filters_per_width=8,
                           learning_rate=0.02, epochs=2, batch_size=32, max_len=16, seed=1)
        params, _ = train_classifier(data, config, table, labels)
        label, _ = predict_emotion(params, "f1 marker1 f2 f3 f4")
        assert label == "class1"

    def test_short_text_padded_not_rejected(self, rng):
        params, _, _ = tiny_setup(rng)
        label, probs = predict_emotion(params, "w0")
        assert label in ("c0", "c1", "c2")
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_probabilities_sum_to_one(self, rng):
        params, _, _ = tiny_setup(rng)
        for text in ("w0 w3 w5 w8 w2", "w1", "w8 w8 w8 w8 w8 w8"):
            _, probs = predict_emotion(params, text)
            assert probs.sum() == pytest.approx(1.0, abs=1e-9)


class TestCheckpoint:
    def test_round_trip(self, tmp_path, rng):
        params, _, _ = tiny_setup(rng)
        path = tmp_path / "classifier.ectf"
        save_classifier(path, params)
        loaded = load_classifier(path)
        assert loaded.labels == params.labels
        assert loaded.config == params.config
        assert loaded.vocab.token_to_id == params.vocab.token_to_id
        for name in params.tensors:
            np.testing.assert_array_equal(loaded.tensors[name], params.tensors[name])
        text = "w0 w1 w8 w3"
        assert predict_emotion(loaded, text)[0] == predict_emotion(params, text)[0]
