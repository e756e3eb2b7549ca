import numpy as np
import pytest

from vdparse import kernels, rst
from vdparse.binio import BadMagic, TruncatedFile
from vdparse.model import (
    ModelConfig,
    ModelParams,
    Vocab,
    attend,
    decode_forward,
    encode,
    greedy_decode,
    init_params,
    load_checkpoint,
    load_embeddings,
    loss_and_grads,
    predict_tokens,
    save_checkpoint,
    softmax_rows,
    tensor_shapes,
)
from vdparse.model.network import LengthExceeded

VOCAB = Vocab(rst.RESERVED_TOKENS + tuple(f"w{i}" for i in range(8)))  # V = 12


def small_config(**kw):
    base = dict(rnn_type="LSTM", hidden_units=8, bidirectional=False,
                encoder_layers=1, attention="general", embed_dim=6,
                feature_dim=5, vocab_size=len(VOCAB), dropout_rate=0.0,
                max_decode_len=12, max_encode_len=32)
    base.update(kw)
    return ModelConfig(**base)


def small_params(rng=None, **kw):
    cfg = small_config(**kw)
    return init_params(cfg, VOCAB, rng or np.random.default_rng(1))


def gold_ids(rng, n=5):
    return ([VOCAB.bos_id]
            + [int(rng.integers(4, len(VOCAB))) for _ in range(n)]
            + [VOCAB.eos_id])


class TestConfig:
    def test_validate_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ModelConfig(rnn_type="ELMAN").validate()
        with pytest.raises(ValueError):
            ModelConfig(attention="luong").validate()
        with pytest.raises(ValueError):
            ModelConfig(dropout_rate=1.0).validate()
        with pytest.raises(ValueError):
            ModelConfig(hidden_units=0).validate()

    def test_round_trip_dict(self):
        cfg = small_config(attention="concat")
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(ValueError):
            ModelConfig.from_dict({"hidden": 3})

    def test_gate_dim(self):
        assert small_config(rnn_type="LSTM").gate_dim == 32
        assert small_config(rnn_type="GRU").gate_dim == 24


class TestTensorShapes:
    def test_attention_variants(self):
        assert "attn.Wa" in tensor_shapes(small_config(attention="general"))
        assert "attn.va" in tensor_shapes(small_config(attention="concat"))
        dot = tensor_shapes(small_config(attention="dot"))
        assert "attn.Wa" not in dot and "attn.Wc" in dot
        none = tensor_shapes(small_config(attention="none"))
        assert not any(k.startswith("attn.") for k in none)

    def test_bidirectional_layers(self):
        shapes = tensor_shapes(small_config(bidirectional=True, encoder_layers=2))
        assert shapes["enc.l0.fwd.W"] == (32, 8)
        assert shapes["enc.l1.bwd.U"] == (32, 8)
        assert shapes["enc.l0.proj.W"] == (8, 16)

    def test_grad_keys_match(self, rng):
        params = small_params()
        _, _, grads = loss_and_grads(params, rng.normal(size=(4, 5)),
                                     gold_ids(rng), train=False)
        assert set(grads) == set(params.tensors)


class TestInit:
    def test_forget_gate_bias(self):
        params = small_params()
        b = params.tensors["enc.l0.b"]
        assert np.all(b[8:16] == 1.0)
        assert np.all(np.abs(b[:8]) <= 0.08)

    def test_gru_has_no_forget_bias(self):
        params = small_params(rnn_type="GRU")
        assert np.all(np.abs(params.tensors["enc.l0.b"]) <= 0.08)

    def test_uniform_range(self):
        params = small_params()
        w = params.tensors["out.W"]
        assert np.all(np.abs(w) <= 0.08)

    def test_embedding_bootstrap(self, tmp_path):
        path = tmp_path / "emb.txt"
        vec = " ".join(["0.5"] * 6)
        path.write_text(f"w0 {vec}\nunseen {vec}\n")
        emb = load_embeddings(path, 6)
        params = init_params(small_config(), VOCAB, np.random.default_rng(0),
                             embeddings=emb)
        row = params.tensors["dec.embed.E"][VOCAB.encode("w0")]
        assert np.array_equal(row, np.full(6, 0.5))

    def test_embedding_dim_mismatch(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("w0 1.0 2.0\n")
        with pytest.raises(ValueError):
            load_embeddings(path, 6)


class TestVocab:
    def test_reserved_ids(self):
        assert VOCAB.encode("<pad>") == 0
        assert VOCAB.encode("<s>") == 1
        assert VOCAB.encode("</s>") == 2
        assert VOCAB.encode("never-seen") == 3

    def test_build_is_order_independent(self):
        seq_a = [["a", "b"], ["c"]]
        seq_b = [["c"], ["b", "a"]]
        va = Vocab.build(seq_a, relations=("Cause",))
        vb = Vocab.build(seq_b, relations=("Cause",))
        assert va.tokens == vb.tokens

    def test_build_includes_grammar(self):
        v = Vocab.build([], relations=("Cause", "Joint"))
        for tok in ("(", ")", "<edu>", "</edu>", "NUC:LEFT", "NUC:RIGHT",
                    "REL:Cause", "REL:Joint"):
            assert tok in v.index

    def test_decode_inverts_encode(self):
        ids = VOCAB.encode_sequence(["w1", "w5"])
        assert VOCAB.decode(ids) == ["w1", "w5"]


class TestEncode:
    def test_single_frame_equals_one_cell_step(self, rng):
        params = small_params()
        t = params.tensors
        x = rng.normal(size=(1, 5))
        enc = encode(x, params)
        x0 = x @ t["enc.proj.W"].T + t["enc.proj.b"]
        xp = x0 @ t["enc.l0.W"].T + t["enc.l0.b"]
        h_seq, c_seq, _, _ = kernels.lstm_forward(xp, np.zeros(8), np.zeros(8),
                                                  t["enc.l0.U"])
        np.testing.assert_allclose(enc.outputs, h_seq, rtol=1e-13)
        np.testing.assert_allclose(enc.final_c, c_seq[-1], rtol=1e-13)

    def test_single_layer_equals_raw_recurrence(self, rng):
        params = small_params()
        x = rng.normal(size=(6, 5))
        enc = encode(x, params)
        t = params.tensors
        xp = (x @ t["enc.proj.W"].T + t["enc.proj.b"]) @ t["enc.l0.W"].T + t["enc.l0.b"]
        h_seq, _, _, _ = kernels.lstm_forward(xp, np.zeros(8), np.zeros(8), t["enc.l0.U"])
        np.testing.assert_allclose(enc.outputs, h_seq, rtol=1e-13)

    def test_bidirectional_palindrome_mirrors(self, rng):
        params = small_params(bidirectional=True)
        t = params.tensors
        for name in ("W", "U", "b"):
            t[f"enc.l0.bwd.{name}"] = t[f"enc.l0.fwd.{name}"].copy()
        half = rng.normal(size=(3, 5))
        x = np.concatenate([half, half[::-1]], axis=0)  # palindrome
        enc = encode(x, params)
        cat = enc.cache["layers"][0]["cat"]
        np.testing.assert_allclose(cat[:, 8:], cat[::-1, :8], rtol=1e-12)

    def test_length_exceeded(self, rng):
        params = small_params(max_encode_len=4)
        with pytest.raises(LengthExceeded):
            encode(rng.normal(size=(5, 5)), params)

    def test_feature_dim_checked(self, rng):
        params = small_params()
        with pytest.raises(ValueError):
            encode(rng.normal(size=(3, 7)), params)


class TestAttend:
    def test_identical_states_give_uniform(self, rng):
        params = small_params(attention="general")
        memory = np.tile(rng.normal(size=8), (5, 1))
        _, alpha = attend(rng.normal(size=8), memory, "general", params)
        np.testing.assert_allclose(alpha, np.full(5, 0.2), rtol=1e-12)

    def test_dominant_score_saturates(self, rng):
        params = small_params(attention="dot")
        h = rng.normal(size=8)
        memory = 1e-3 * rng.normal(size=(4, 8))
        memory[2] = 50.0 * h  # overwhelming dot product
        ctx, alpha = attend(h, memory, "dot", params)
        assert alpha[2] > 1.0 - 1e-10
        np.testing.assert_allclose(ctx, memory[2], rtol=1e-6)

    def test_dot_orthonormal_rows_match_independent_softmax(self):
        params = small_params(attention="dot", hidden_units=4, feature_dim=5)
        memory = np.eye(4)
        k = 2
        h = 10.0 * np.eye(4)[k]
        _, alpha = attend(h, memory, "dot", params)
        scores = np.array([10.0 if j == k else 0.0 for j in range(4)])
        expected = np.exp(scores - scores.max())
        expected /= expected.sum()
        np.testing.assert_allclose(alpha, expected, rtol=1e-12)
        assert all(alpha[k] > alpha[j] for j in range(4) if j != k)

    def test_rows_sum_to_one_all_kinds(self, rng):
        for kind in ("general", "dot", "concat"):
            params = small_params(attention=kind)
            memory = rng.normal(size=(6, 8))
            _, alpha = attend(rng.normal(size=8), memory, kind, params)
            assert alpha.min() >= 0
            assert abs(alpha.sum() - 1.0) < 1e-6


class TestDecodeForward:
    def test_zero_output_projection_is_uniform(self, rng):
        params = small_params()
        params.tensors["out.W"][:] = 0.0
        params.tensors["out.b"][:] = 0.0
        enc = encode(rng.normal(size=(4, 5)), params)
        ids = gold_ids(rng, n=4)
        dec = decode_forward(enc, ids, params)
        np.testing.assert_allclose(dec.step_logp, -np.log(len(VOCAB)) * np.ones(5),
                                   rtol=1e-12)
        assert dec.sequence_logp == pytest.approx(-5 * np.log(len(VOCAB)), rel=1e-12)

    def test_dropout_disabled_at_inference(self, rng):
        feats = rng.normal(size=(4, 5))
        ids = gold_ids(rng, n=4)
        out = []
        for rate in (0.5, 0.0):
            params = small_params(dropout_rate=rate)
            enc = encode(feats, params, train=False)
            dec = decode_forward(enc, ids, params, train=False)
            out.append(dec.step_logp)
        np.testing.assert_array_equal(out[0], out[1])

    def test_factorization_exact(self, rng):
        params = small_params(attention="concat")
        enc = encode(rng.normal(size=(4, 5)), params)
        dec = decode_forward(enc, gold_ids(rng, n=4), params)
        assert dec.sequence_logp == float(dec.step_logp.sum())

    def test_product_of_probs_matches_log_sum(self, rng):
        params = small_params()
        enc = encode(rng.normal(size=(3, 5)), params)
        dec = decode_forward(enc, gold_ids(rng, n=3), params)
        product = float(np.prod(np.exp(dec.step_logp)))
        assert product == pytest.approx(np.exp(dec.sequence_logp), rel=1e-12)

    def test_attention_rows_are_distributions(self, rng):
        for kind in ("general", "dot", "concat"):
            params = small_params(attention=kind)
            enc = encode(rng.normal(size=(6, 5)), params)
            dec = decode_forward(enc, gold_ids(rng, n=7), params)
            assert dec.attention.shape == (8, 6)
            assert dec.attention.min() >= 0
            np.testing.assert_allclose(dec.attention.sum(axis=1), np.ones(8),
                                       atol=1e-6)

    def test_requires_sentinels(self, rng):
        params = small_params()
        enc = encode(rng.normal(size=(3, 5)), params)
        with pytest.raises(ValueError):
            decode_forward(enc, [4, 5, 6], params)


class TestGreedyDecode:
    def test_rigged_eos_gives_empty_sequence(self, rng):
        params = small_params(attention="general")
        params.tensors["out.b"][VOCAB.eos_id] = 100.0
        enc = encode(rng.normal(size=(4, 5)), params)
        ids, attn = greedy_decode(enc, params)
        assert ids == []
        assert attn.shape == (0, 4)

    def test_length_cap(self, rng):
        params = small_params(attention="none")
        params.tensors["out.b"][VOCAB.encode("w3")] = 100.0  # never emits </s>
        enc = encode(rng.normal(size=(4, 5)), params)
        ids, attn = greedy_decode(enc, params, max_len=3)
        assert ids == [VOCAB.encode("w3")] * 3
        assert attn is None

    def test_rigged_transition_chain_reproduces_string(self):
        """One-hot-ish GRU transition machine emits a fixed target string."""
        V = len(VOCAB)
        cfg = small_config(rnn_type="GRU", attention="none", hidden_units=V,
                           embed_dim=V)
        params = init_params(cfg, VOCAB, np.random.default_rng(0))
        t = params.tensors
        for name in t:
            t[name][:] = 0.0
        t["dec.embed.E"][:] = 10.0 * np.eye(V)
        t["dec.cell.b"][:V] = -40.0                       # carry gate -> 0
        t["dec.cell.W"][2 * V:, :] = 10.0 * np.eye(V)     # candidate = prev token
        target = ["w0", "w2", "w5"]
        chain = [VOCAB.bos_id] + VOCAB.encode_sequence(target) + [VOCAB.eos_id]
        for prev, nxt in zip(chain, chain[1:]):
            t["out.W"][nxt, prev] = 20.0
        enc = encode(np.zeros((3, 5)), params)
        tokens, _ = predict_tokens(params, np.zeros((3, 5)))
        assert tokens == target
        ids, _ = greedy_decode(enc, params)
        assert VOCAB.decode(ids) == target

    def test_equal_logits_break_to_lowest_id(self, rng):
        params = small_params(attention="none")
        params.tensors["out.W"][:] = 0.0
        params.tensors["out.b"][:] = 0.0  # all logits tie at every step
        enc = encode(rng.normal(size=(3, 5)), params)
        ids, _ = greedy_decode(enc, params, max_len=2)
        assert ids == [VOCAB.pad_id] * 2  # lowest id wins the tie

    def test_deterministic(self, rng):
        params = small_params(attention="general")
        feats = rng.normal(size=(4, 5))
        a = predict_tokens(params, feats)
        b = predict_tokens(params, feats)
        assert a[0] == b[0]
        assert np.array_equal(a[1], b[1])


class TestDropout:
    def test_expected_presoftmax_matches_no_dropout(self):
        rng = np.random.default_rng(11)
        H, V = 32, 10
        pre = np.abs(np.tanh(rng.normal(size=H)))
        w_out = np.abs(0.5 * rng.normal(size=(V, H)))
        b_out = rng.normal(size=V)
        base = w_out @ pre + b_out
        rate = 0.5
        acc = np.zeros(V)
        n_masks = 10_000
        for _ in range(n_masks):
            mask = (rng.random(H) >= rate) / (1.0 - rate)
            acc += w_out @ (pre * mask) + b_out
        mean = acc / n_masks
        scale = np.abs(base).max()
        assert np.abs(mean - base).max() <= 0.01 * scale

    def test_training_draws_masks(self, rng):
        params = small_params(dropout_rate=0.5)
        feats = rng.normal(size=(4, 5))
        ids = gold_ids(rng, n=4)
        a = loss_and_grads(params, feats, ids, train=True,
                           rng=np.random.default_rng(3))[0]
        b = loss_and_grads(params, feats, ids, train=True,
                           rng=np.random.default_rng(4))[0]
        assert a != b

    def test_training_requires_rng(self, rng):
        params = small_params(dropout_rate=0.5)
        with pytest.raises(ValueError):
            encode(rng.normal(size=(3, 5)), params, train=True)


class TestBackwardEdgeCases:
    def test_zero_loss_direction_gives_zero_gradients(self, rng):
        from vdparse.model import backward
        params = small_params(attention="general")
        enc = encode(rng.normal(size=(4, 5)), params)
        dec = decode_forward(enc, gold_ids(rng, n=4), params)
        grads = backward(enc, dec, params, np.zeros(5))
        for name, g in grads.items():
            assert np.array_equal(g, np.zeros_like(g)), name


class TestDeterminism:
    def test_loss_and_grads_bit_identical(self, rng):
        params = small_params(dropout_rate=0.3)
        feats = rng.normal(size=(4, 5))
        ids = gold_ids(rng, n=4)
        l1, n1, g1 = loss_and_grads(params, feats, ids, train=True,
                                    rng=np.random.default_rng(9))
        l2, n2, g2 = loss_and_grads(params, feats, ids, train=True,
                                    rng=np.random.default_rng(9))
        assert l1 == l2 and n1 == n2
        for name in g1:
            assert np.array_equal(g1[name], g2[name])


class TestCheckpoint:
    def test_file_round_trip_bit_identical(self, tmp_path):
        params = small_params(attention="concat")
        p1 = tmp_path / "a.vdpm"
        p2 = tmp_path / "b.vdpm"
        save_checkpoint(params, p1)
        loaded = load_checkpoint(p1)
        save_checkpoint(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_load_equals_f32_cast(self, tmp_path):
        params = small_params()
        path = tmp_path / "c.vdpm"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.config == params.config
        assert loaded.vocab.tokens == params.vocab.tokens
        assert loaded.relations == params.relations
        for name, arr in params.tensors.items():
            expected = arr.astype(np.float32).astype(np.float64)
            assert np.array_equal(loaded.tensors[name], expected)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.vdpm"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(BadMagic):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        params = small_params()
        path = tmp_path / "t.vdpm"
        save_checkpoint(params, path)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(TruncatedFile):
            load_checkpoint(path)

    def test_missing_tensor_rejected(self, tmp_path):
        params = small_params()
        broken = ModelParams(params.config, params.vocab, params.relations,
                             dict(params.tensors))
        del broken.tensors["out.b"]
        path = tmp_path / "m.vdpm"
        save_checkpoint(broken, path)
        with pytest.raises(ValueError):
            load_checkpoint(path)


class TestSoftmax:
    def test_stable_on_large_values(self):
        x = np.array([[1000.0, 1000.0, -1000.0]])
        out = softmax_rows(x)
        assert np.isfinite(out).all()
        np.testing.assert_allclose(out[0, :2], 0.5, rtol=1e-12)
