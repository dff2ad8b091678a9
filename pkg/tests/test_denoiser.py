"""Denoiser architecture: shapes, symmetry, init behavior, determinism."""

import math

import numpy as np
import pytest
import torch

from mixdiff.denoiser import Denoiser, DenoiserConfig, sinusoidal_embedding
from mixdiff.errors import InvalidInput

K = 3       # real labels (empty included)
N = 8       # slots
CFG = DenoiserConfig()


def fresh_model(seed=0, cfg=CFG, n_classes=K, n_slots=N):
    torch.manual_seed(seed)
    return Denoiser(cfg, n_classes, n_slots)


def randomized_model(seed=0, **kw):
    """Model with all parameters randomized so heads are not zero."""
    model = fresh_model(seed, **kw)
    gen = torch.Generator().manual_seed(seed + 1)
    with torch.no_grad():
        for p in model.parameters():
            p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64) * 0.1)
    model.eval()
    return model


def random_batch(seed=0, b=3, n=N):
    gen = torch.Generator().manual_seed(seed)
    z = torch.randint(0, K + 1, (b, n), generator=gen)
    x = torch.randn(b, n, 8, generator=gen, dtype=torch.float64)
    t = torch.randint(1, 100, (b,), generator=gen)
    boundary = torch.randn(b, 32, 4, generator=gen, dtype=torch.float64)
    return z, x, t, boundary


class TestConfig:
    def test_defaults_and_full_profile(self):
        assert CFG.d_model == 64 and CFG.n_blocks == 2
        full = DenoiserConfig.full()
        assert (full.n_blocks, full.d_model, full.n_heads, full.d_ff) == (8, 512, 8, 2048)

    def test_dict_round_trip(self):
        cfg = DenoiserConfig(n_blocks=3, dropout=0.0)
        assert DenoiserConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize("kw", [
        {"d_model": 65},                 # not divisible by heads
        {"n_blocks": 0},
        {"dropout": 1.0},
        {"dropout": -0.1},
        {"activation": "tanh"},
    ])
    def test_invalid_rejected(self, kw):
        with pytest.raises(InvalidInput):
            DenoiserConfig(**kw)


class TestSinusoidalEmbedding:
    def test_hand_values_dim4(self):
        emb = sinusoidal_embedding(torch.tensor([3]), 4)
        freqs = [1.0, math.exp(-math.log(10000.0))]
        want = [math.sin(3 * freqs[0]), math.sin(3 * freqs[1]),
                math.cos(3 * freqs[0]), math.cos(3 * freqs[1])]
        assert np.allclose(emb[0].numpy(), want, atol=1e-15)

    def test_odd_dim_zero_padded(self):
        emb = sinusoidal_embedding(torch.tensor([7, 9]), 5)
        assert emb.shape == (2, 5)
        assert (emb[:, -1] == 0).all()


class TestForward:
    def test_output_shapes(self):
        model = fresh_model()
        z, x, t, boundary = random_batch()
        logits, eps_hat = model(z, x, t, boundary)
        assert logits.shape == (3, N, K)
        assert eps_hat.shape == (3, N, 8)
        assert logits.dtype == torch.float64

    def test_zero_init_heads(self):
        """A fresh model predicts uniform labels and exactly zero noise."""
        model = fresh_model()
        model.eval()
        z, x, t, boundary = random_batch(1)
        logits, eps_hat = model(z, x, t, boundary)
        assert (logits == 0).all()      # uniform distribution over labels
        assert (eps_hat == 0).all()

    def test_permutation_equivariance(self):
        """Slot order is structural only through the shared condition set."""
        model = randomized_model()
        z, x, t, boundary = random_batch(2)
        perm = torch.randperm(N, generator=torch.Generator().manual_seed(9))
        logits, eps_hat = model(z, x, t, boundary)
        logits_p, eps_p = model(z[:, perm], x[:, perm], t, boundary)
        assert torch.allclose(logits_p, logits[:, perm], atol=1e-12)
        assert torch.allclose(eps_p, eps_hat[:, perm], atol=1e-12)

    def test_floor_sensitivity(self):
        model = randomized_model()
        z, x, t, boundary = random_batch(3)
        logits_a, eps_a = model(z, x, t, boundary)
        logits_b, eps_b = model(z, x, t, boundary + 0.5)
        assert not torch.allclose(logits_a, logits_b)
        assert not torch.allclose(eps_a, eps_b)

    def test_time_sensitivity(self):
        model = randomized_model()
        z, x, t, boundary = random_batch(4)
        logits_a, _ = model(z, x, t, boundary)
        logits_b, _ = model(z, x, t + 1, boundary)
        assert not torch.allclose(logits_a, logits_b)

    def test_label_state_sensitivity(self):
        model = randomized_model()
        z, x, t, boundary = random_batch(5)
        z2 = z.clone()
        z2[0, 0] = (int(z2[0, 0]) + 1) % (K + 1)
        logits_a, _ = model(z, x, t, boundary)
        logits_b, _ = model(z2, x, t, boundary)
        assert not torch.allclose(logits_a[0], logits_b[0])
        assert torch.allclose(logits_a[1:], logits_b[1:], atol=1e-12)  # batch rows independent

    def test_precomputed_condition_matches_boundary_path(self):
        model = randomized_model()
        z, x, t, boundary = random_batch(6)
        cond = model.build_condition(model.encode_floor(boundary), N)
        logits_a, eps_a = model(z, x, t, boundary)
        logits_b, eps_b = model(z, x, t, cond=cond)
        assert torch.equal(logits_a, logits_b)
        assert torch.equal(eps_a, eps_b)

    def test_fewer_slots_than_table(self):
        model = randomized_model()
        z, x, t, boundary = random_batch(7, n=5)
        logits, eps_hat = model(z, x, t, boundary)
        assert logits.shape == (3, 5, K)
        assert eps_hat.shape == (3, 5, 8)

    def test_input_validation(self):
        model = fresh_model()
        z, x, t, boundary = random_batch()
        with pytest.raises(InvalidInput):
            model(z, x, t)                                  # no condition source
        with pytest.raises(InvalidInput):
            model(z, x[:, :, :7], t, boundary)              # bad geometry width
        with pytest.raises(InvalidInput):
            model(z + K + 1, x, t, boundary)                # state beyond mask
        with pytest.raises(InvalidInput):
            model(z, x, t, boundary[:, :, :3])              # bad boundary width
        with pytest.raises(InvalidInput):
            model.build_condition(model.encode_floor(boundary), N + 1)

    def test_constructor_validation(self):
        with pytest.raises(InvalidInput):
            Denoiser(CFG, 1, N)
        with pytest.raises(InvalidInput):
            Denoiser(CFG, K, 0)


class TestParameterCount:
    @staticmethod
    def expected_count(cfg: DenoiserConfig, n_classes: int, n_slots: int) -> int:
        d, f, e, ff = cfg.d_model, cfg.d_floor_feat, cfg.d_index_embed, cfg.d_ff
        lin = lambda i, o: i * o + o
        embed = (n_classes + 1) * d
        geom = lin(8, d) + lin(d, 2 * d) + lin(2 * d, d)
        floor = lin(4, f) + lin(f, f) + lin(f, 8 * f) + lin(8 * f, f)
        index = n_slots * e
        time = 2 * lin(d, d)
        cond = f + e
        block = (2 * d                                       # norm_sa
                 + 4 * lin(d, d)                             # self-attention
                 + lin(d, 2 * d)                             # adaptive norm proj
                 + 2 * lin(d, d) + 2 * lin(cond, d)          # cross-attention
                 + 2 * d                                     # norm_ff
                 + lin(d, ff) + lin(ff, d))                  # feed-forward
        heads = lin(d, n_classes) + lin(d, d) + lin(d, 2 * d) + lin(2 * d, 8)
        return (embed + geom + floor + index + time
                + cfg.n_blocks * block + 2 * d + heads)

    def test_desk_profile_count(self):
        model = fresh_model()
        assert model.n_parameters() == self.expected_count(CFG, K, N) == 170_347

    def test_custom_profile_count(self):
        cfg = DenoiserConfig(n_blocks=1, d_model=32, n_heads=2, d_ff=48,
                             d_floor_feat=16, d_index_embed=8)
        model = fresh_model(cfg=cfg, n_classes=4, n_slots=5)
        assert model.n_parameters() == self.expected_count(cfg, 4, 5)


class TestSeededDropout:
    def test_same_seed_same_mask(self):
        model = randomized_model()
        model.train()
        z, x, t, boundary = random_batch(8)
        model.set_dropout_generator(torch.Generator().manual_seed(42))
        logits_a, eps_a = model(z, x, t, boundary)
        model.set_dropout_generator(torch.Generator().manual_seed(42))
        logits_b, eps_b = model(z, x, t, boundary)
        assert torch.equal(logits_a, logits_b)
        assert torch.equal(eps_a, eps_b)

    def test_stream_advances(self):
        model = randomized_model()
        model.train()
        z, x, t, boundary = random_batch(8)
        model.set_dropout_generator(torch.Generator().manual_seed(42))
        logits_a, _ = model(z, x, t, boundary)
        logits_b, _ = model(z, x, t, boundary)     # same generator, further along
        assert not torch.equal(logits_a, logits_b)

    def test_eval_mode_ignores_dropout(self):
        model = randomized_model()
        z, x, t, boundary = random_batch(8)
        logits_a, _ = model(z, x, t, boundary)
        logits_b, _ = model(z, x, t, boundary)
        assert torch.equal(logits_a, logits_b)

    def test_zero_dropout_config_is_deterministic_in_train_mode(self):
        model = randomized_model(cfg=DenoiserConfig(dropout=0.0))
        model.train()
        z, x, t, boundary = random_batch(8)
        logits_a, _ = model(z, x, t, boundary)
        logits_b, _ = model(z, x, t, boundary)
        assert torch.equal(logits_a, logits_b)
