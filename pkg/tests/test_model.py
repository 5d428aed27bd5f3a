"""Detector model: config validation, parameter grouping, forward-pass
shapes, mask invariance, focal loss and analytic gradients."""

import numpy as np
import pytest

from gazeword.model import (DetectorModel, ModelConfig, WindowBatch,
                            focal_loss, sinusoidal_encoding)
from gazeword.tensor import Tensor

VOCAB = 40


def small_config(**kw):
    base = dict(d_model=16, n_enc_layers=1, n_dec_layers=1, n_text_layers=1,
                n_heads=2, n_r=16, vocab_size=VOCAB, seed=0)
    base.update(kw)
    return ModelConfig(**base)


def make_batch(rng, b=2, L=12, t=6, pad_gaze=3, pad_tok=2):
    gaze_mask = np.ones((b, L))
    gaze_mask[:, L - pad_gaze:] = 0
    token_mask = np.ones((b, t))
    token_mask[:, t - pad_tok:] = 0
    label_mask = np.zeros((b, t))
    label_mask[:, 1] = 1
    labels = np.zeros((b, t))
    labels[0, 1] = 1
    return WindowBatch(
        gaze=rng.normal(size=(b, L, 4)),
        gaze_mask=gaze_mask,
        token_ids=rng.integers(0, VOCAB, size=(b, t)),
        token_pos=rng.normal(size=(b, t, 2)),
        token_dist=rng.normal(size=(b, t)),
        token_dur=rng.normal(size=(b, t)),
        know_tf_bin=rng.integers(0, 16, size=(b, t)),
        know_pos=rng.integers(0, 12, size=(b, t)),
        know_ner=rng.integers(0, 5, size=(b, t)),
        know_log_tf=rng.normal(size=(b, t)),
        token_mask=token_mask,
        label_mask=label_mask,
        labels=labels,
    )


class TestModelConfig:
    def test_head_divisibility_enforced(self):
        with pytest.raises(ValueError, match="divisible"):
            small_config(d_model=30, n_heads=4)

    def test_gaze_length_cap(self):
        with pytest.raises(ValueError, match="180"):
            small_config(max_gaze_len=240)

    def test_alpha_gamma_bounds(self):
        with pytest.raises(ValueError, match="alpha"):
            small_config(alpha=1.0)
        with pytest.raises(ValueError, match="gamma"):
            small_config(gamma=-0.5)

    def test_some_modality_required(self):
        with pytest.raises(ValueError, match="modality"):
            small_config(use_gaze=False, use_text=False, use_knowledge=False)

    def test_gaze_stride_positive(self):
        with pytest.raises(ValueError, match="gaze_stride"):
            small_config(gaze_stride=0)

    def test_knowledge_width(self):
        assert small_config().n_k == 25

    def test_dict_round_trip(self):
        cfg = small_config(gaze_stride=3, gamma=1.5)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_vocab_required_with_text(self):
        with pytest.raises(ValueError, match="vocab_size"):
            DetectorModel(small_config(vocab_size=0))


class TestSinusoidalEncoding:
    def test_shape_and_range(self):
        enc = sinusoidal_encoding(50, 16)
        assert enc.shape == (50, 16)
        assert np.all(np.abs(enc) <= 1.0)

    def test_position_zero_row(self):
        enc = sinusoidal_encoding(4, 8)
        assert np.allclose(enc[0, 0::2], 0.0)
        assert np.allclose(enc[0, 1::2], 1.0)

    def test_first_channel_is_unit_sine(self):
        enc = sinusoidal_encoding(20, 8)
        assert np.allclose(enc[:, 0], np.sin(np.arange(20)))


class TestParameters:
    def test_group_assignment(self):
        model = DetectorModel(small_config())
        for name, p in model.params.items():
            want = "encoder_decoder" if name.split(".")[0] in \
                ("gaze", "enc", "dec") else "backbone"
            assert p.group == want, name

    def test_ablation_drops_parameters(self):
        no_gaze = DetectorModel(small_config(use_gaze=False))
        assert not any(n.startswith(("enc.", "dec.", "gaze."))
                       for n in no_gaze.params)
        no_text = DetectorModel(small_config(use_text=False))
        assert not any(n.startswith("text.") for n in no_text.params)

    def test_seed_determinism(self):
        a = DetectorModel(small_config(seed=5))
        b = DetectorModel(small_config(seed=5))
        c = DetectorModel(small_config(seed=6))
        for name in a.params:
            assert np.array_equal(a.params[name].data, b.params[name].data)
        assert any(not np.array_equal(a.params[n].data, c.params[n].data)
                   for n in a.params)

    def test_init_clipped_to_two_sigma(self):
        model = DetectorModel(small_config())
        w = model.params["enc.0.attn.wq"].data
        assert np.max(np.abs(w)) <= 0.04 + 1e-12


class TestForward:
    RNG = np.random.default_rng(99)

    def test_output_shape_and_range(self):
        model = DetectorModel(small_config())
        batch = make_batch(self.RNG)
        p = model.forward(batch)
        assert p.shape == (2, 6)
        assert np.all((p.data > 0) & (p.data < 1))

    def test_padding_invariance(self):
        model = DetectorModel(small_config())
        rng = np.random.default_rng(3)
        batch = make_batch(rng)
        base = model.forward(batch).data.copy()
        batch.gaze[:, -3:] = 1e4           # padded gaze samples
        batch.token_ids[:, -2:] = 7        # padded tokens
        batch.token_dist[:, -2:] = -50.0
        perturbed = model.forward(batch).data
        real = batch.token_mask > 0
        assert np.allclose(perturbed[real], base[real], atol=1e-10)

    def test_empty_gaze_window_rejected(self):
        model = DetectorModel(small_config())
        batch = make_batch(self.RNG)
        batch.gaze_mask[:] = 0
        with pytest.raises(ValueError, match="empty gaze"):
            model.forward(batch)

    def test_out_of_range_token_id(self):
        model = DetectorModel(small_config())
        batch = make_batch(self.RNG)
        batch.token_ids[0, 0] = VOCAB
        with pytest.raises(IndexError):
            model.forward(batch)

    def test_ablations_run(self):
        batch = make_batch(self.RNG)
        for kw in ({"use_gaze": False}, {"use_text": False},
                   {"use_knowledge": False}):
            p = DetectorModel(small_config(**kw)).forward(batch)
            assert p.shape == (2, 6)


class TestGazeStride:
    def test_skipped_samples_do_not_affect_output(self):
        model = DetectorModel(small_config(gaze_stride=3))
        rng = np.random.default_rng(11)
        batch = make_batch(rng, L=12, pad_gaze=0)
        base = model.forward(batch).data.copy()
        keep = np.arange(12) % 3 == 0
        batch.gaze[:, ~keep] = rng.normal(size=batch.gaze[:, ~keep].shape)
        assert np.allclose(model.forward(batch).data, base, atol=1e-12)

    def test_same_parameters_as_unstrided(self):
        a = DetectorModel(small_config(gaze_stride=1))
        b = DetectorModel(small_config(gaze_stride=3))
        assert set(a.params) == set(b.params)


class TestFocalLoss:
    def test_hand_value(self):
        p = Tensor(np.array([[0.5]]))
        loss = focal_loss(p, np.array([[1.0]]), alpha=0.5, gamma=0.0,
                          mask=np.array([[1.0]]))
        assert loss.data == pytest.approx(0.34657, abs=5e-6)

    def test_reduces_to_half_bce_at_gamma_zero(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0.01, 0.99, size=(1000,))
        y = rng.integers(0, 2, size=(1000,)).astype(float)
        mask = np.ones(1000)
        loss = focal_loss(Tensor(p), y, alpha=0.5, gamma=0.0, mask=mask)
        bce = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()
        assert abs(loss.data - 0.5 * bce) < 1e-12

    def test_gamma_downweights_easy_examples(self):
        easy = Tensor(np.array([0.95]))
        y = np.array([1.0])
        mask = np.ones(1)
        plain = focal_loss(easy, y, 0.5, 0.0, mask).data
        focal = focal_loss(easy, y, 0.5, 2.0, mask).data
        assert focal < plain * 0.01

    def test_mask_excludes_tokens(self):
        p = Tensor(np.array([0.9, 0.1]))
        y = np.array([1.0, 1.0])
        only_first = focal_loss(p, y, 0.5, 0.0, np.array([1.0, 0.0])).data
        first_alone = focal_loss(Tensor(np.array([0.9])), np.array([1.0]),
                                 0.5, 0.0, np.ones(1)).data
        assert only_first == pytest.approx(first_alone, abs=1e-15)

    def test_alpha_weights_positive_class(self):
        p = Tensor(np.array([0.5]))
        mask = np.ones(1)
        pos = focal_loss(p, np.array([1.0]), 0.9, 0.0, mask).data
        neg = focal_loss(p, np.array([0.0]), 0.9, 0.0, mask).data
        assert pos == pytest.approx(9 * neg, rel=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        p0 = rng.uniform(0.05, 0.95, size=(8,))
        y = rng.integers(0, 2, size=(8,)).astype(float)
        mask = np.ones(8)
        p = Tensor(p0, requires_grad=True)
        focal_loss(p, y, alpha=0.9, gamma=2.0, mask=mask).backward()
        eps = 1e-6
        for i in range(8):
            up, dn = p0.copy(), p0.copy()
            up[i] += eps
            dn[i] -= eps
            num = (focal_loss(Tensor(up), y, 0.9, 2.0, mask).data
                   - focal_loss(Tensor(dn), y, 0.9, 2.0, mask).data) / (2 * eps)
            assert p.grad[i] == pytest.approx(num, rel=1e-5, abs=1e-8)


class TestEndToEndGradients:
    def test_all_parameters_receive_gradient(self):
        model = DetectorModel(small_config())
        batch = make_batch(np.random.default_rng(7))
        loss = focal_loss(model.forward(batch), batch.labels, 0.9, 2.0,
                          batch.token_mask)
        model.zero_grad()
        loss.backward()
        tables = {"text.embed", "text.pos", "know.tf", "know.pos", "know.ner"}
        for name, p in model.params.items():
            assert p.grad is not None, name
            if name not in tables:
                assert np.abs(p.grad).sum() > 0, name

    def test_model_gradient_matches_finite_differences(self):
        model = DetectorModel(small_config())
        batch = make_batch(np.random.default_rng(13))

        def loss_value():
            return focal_loss(model.forward(batch), batch.labels, 0.9, 2.0,
                              batch.token_mask).data

        model.zero_grad()
        focal_loss(model.forward(batch), batch.labels, 0.9, 2.0,
                   batch.token_mask).backward()
        rng = np.random.default_rng(0)
        eps = 1e-5
        for name in ("gaze.in.w", "enc.0.attn.wq", "dec.0.xattn.wk",
                     "text.0.ff.w1", "know.tf", "head.w", "head.b"):
            p = model.params[name]
            flat = p.data.reshape(-1)
            for idx in rng.choice(flat.size, size=min(3, flat.size),
                                  replace=False):
                orig = flat[idx]
                flat[idx] = orig + eps
                up = loss_value()
                flat[idx] = orig - eps
                dn = loss_value()
                flat[idx] = orig
                num = (up - dn) / (2 * eps)
                ana = p.grad.reshape(-1)[idx]
                assert abs(ana - num) <= 1e-4 * max(abs(ana) + abs(num), 1e-6), \
                    f"{name}[{idx}]: analytic {ana}, numeric {num}"
