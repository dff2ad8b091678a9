"""Transformer denoiser over object slots, conditioned on the floor plan.

Per slot, the network consumes the corrupted label state (mask included) and
the corrupted geometry vector, and predicts (a) logits over the real labels
for the uncorrupted z_0 and (b) the Gaussian noise present in the geometry.
Conditioning has two parts: a PointNet summary of boundary samples of the
floor polygon, and a learned per-slot index embedding; each transformer
block cross-attends from slot features to the per-slot condition rows.
Timestep information enters through adaptive layer norm (scale/shift from a
sinusoidal embedding) between self- and cross-attention.

Everything runs in float64 on CPU; the models here are small and exactness
is worth more than speed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
from torch import nn

from .errors import InvalidInput


@dataclass(frozen=True)
class DenoiserConfig:
    """Architecture hyperparameters (dataset-independent).

    Defaults are the desk-sized profile used by the toy datasets; ``full``
    gives the full-sized profile.
    """

    n_blocks: int = 2
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    d_floor_feat: int = 32
    d_index_embed: int = 16
    dropout: float = 0.1
    activation: str = "gelu"

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise InvalidInput(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if min(self.n_blocks, self.d_model, self.n_heads, self.d_ff,
               self.d_floor_feat, self.d_index_embed) < 1:
            raise InvalidInput("all architecture dimensions must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidInput("dropout must be in [0, 1)")
        if self.activation not in ("gelu", "relu"):
            raise InvalidInput(f"unsupported activation {self.activation!r}")

    @staticmethod
    def full() -> "DenoiserConfig":
        return DenoiserConfig(n_blocks=8, d_model=512, n_heads=8, d_ff=2048,
                              d_floor_feat=64, d_index_embed=64)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "DenoiserConfig":
        return DenoiserConfig(**d)


def _activation(name: str) -> nn.Module:
    return nn.GELU() if name == "gelu" else nn.ReLU()


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Classic sin/cos positional features of a (batch,) timestep vector."""
    half = dim // 2
    freqs = torch.exp(torch.arange(half, dtype=torch.float64)
                      * (-math.log(10000.0) / max(half - 1, 1)))
    args = t.to(torch.float64)[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2 == 1:
        emb = torch.cat([emb, torch.zeros(emb.shape[0], 1, dtype=torch.float64)], dim=-1)
    return emb


class _DropoutState:
    """Shared holder so training can route dropout through a seeded generator."""

    def __init__(self):
        self.generator: torch.Generator | None = None


class SeededDropout(nn.Module):
    def __init__(self, p: float, state: _DropoutState):
        super().__init__()
        self.p = p
        self.state = state

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if not self.training or self.p == 0.0:
            return x
        keep = torch.rand(x.shape, generator=self.state.generator,
                          dtype=x.dtype, device=x.device) >= self.p
        return x * keep / (1.0 - self.p)


class Attention(nn.Module):
    """Multi-head attention; keys/values may come from a different width."""

    def __init__(self, d_model: int, n_heads: int, kv_dim: int | None = None,
                 dropout: float = 0.0, state: _DropoutState | None = None):
        super().__init__()
        kv_dim = kv_dim if kv_dim is not None else d_model
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(kv_dim, d_model)
        self.v_proj = nn.Linear(kv_dim, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.drop = SeededDropout(dropout, state or _DropoutState())

    def forward(self, queries: torch.Tensor, keys_values: torch.Tensor) -> torch.Tensor:
        b, n, _ = queries.shape
        m = keys_values.shape[1]
        h, dh = self.n_heads, self.d_head
        q = self.q_proj(queries).view(b, n, h, dh).transpose(1, 2)
        k = self.k_proj(keys_values).view(b, m, h, dh).transpose(1, 2)
        v = self.v_proj(keys_values).view(b, m, h, dh).transpose(1, 2)
        att = q @ k.transpose(-2, -1) / math.sqrt(dh)
        att = self.drop(torch.softmax(att, dim=-1))
        out = (att @ v).transpose(1, 2).reshape(b, n, h * dh)
        return self.out_proj(out)


class AdaLayerNorm(nn.Module):
    """LayerNorm whose scale/shift are an affine function of the time embedding.

    The projection is zero-initialized so the module starts as plain
    normalization.
    """

    def __init__(self, d_model: int, d_time: int):
        super().__init__()
        self.norm = nn.LayerNorm(d_model, elementwise_affine=False)
        self.proj = nn.Linear(d_time, 2 * d_model)
        nn.init.zeros_(self.proj.weight)
        nn.init.zeros_(self.proj.bias)

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        scale, shift = self.proj(temb).chunk(2, dim=-1)
        return self.norm(x) * (1.0 + scale[:, None, :]) + shift[:, None, :]


class DenoiserBlock(nn.Module):
    """Self-attention -> adaptive norm -> cross-attention -> feed-forward."""

    def __init__(self, cfg: DenoiserConfig, cond_dim: int, state: _DropoutState):
        super().__init__()
        d = cfg.d_model
        self.norm_sa = nn.LayerNorm(d)
        self.self_attn = Attention(d, cfg.n_heads, dropout=cfg.dropout, state=state)
        self.ada = AdaLayerNorm(d, d)
        self.cross_attn = Attention(d, cfg.n_heads, kv_dim=cond_dim,
                                    dropout=cfg.dropout, state=state)
        self.norm_ff = nn.LayerNorm(d)
        self.ff = nn.Sequential(
            nn.Linear(d, cfg.d_ff),
            _activation(cfg.activation),
            SeededDropout(cfg.dropout, state),
            nn.Linear(cfg.d_ff, d),
        )
        self.drop = SeededDropout(cfg.dropout, state)

    def forward(self, h: torch.Tensor, temb: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        normed = self.norm_sa(h)
        h = h + self.drop(self.self_attn(normed, normed))
        h = h + self.drop(self.cross_attn(self.ada(h, temb), cond))
        h = h + self.drop(self.ff(self.norm_ff(h)))
        return h


class FloorEncoder(nn.Module):
    """PointNet over boundary samples: shared MLP, max-pool, projection."""

    def __init__(self, d_out: int, activation: str = "gelu"):
        super().__init__()
        f = d_out
        act = _activation(activation)
        self.point_mlp = nn.Sequential(
            nn.Linear(4, f), act,
            nn.Linear(f, f), act,
            nn.Linear(f, 8 * f), act,
        )
        self.head = nn.Linear(8 * f, d_out)

    def forward(self, boundary: torch.Tensor) -> torch.Tensor:
        if boundary.ndim != 3 or boundary.shape[-1] != 4:
            raise InvalidInput(f"boundary must be (B, P, 4), got {tuple(boundary.shape)}")
        pooled = self.point_mlp(boundary).max(dim=1).values
        return self.head(pooled)


class Denoiser(nn.Module):
    """Slot transformer predicting (z_0 logits, geometry noise).

    Args:
        cfg: architecture profile.
        n_classes: number of real labels K (the input state space adds one
            absorbing mask state on top).
        n_slots: fixed slot count; sets the index-embedding table size.
    """

    def __init__(self, cfg: DenoiserConfig, n_classes: int, n_slots: int):
        super().__init__()
        if n_classes < 2 or n_slots < 1:
            raise InvalidInput(f"bad sizes n_classes={n_classes} n_slots={n_slots}")
        self.cfg = cfg
        self.n_classes = n_classes
        self.n_slots = n_slots
        self._dropout_state = _DropoutState()
        d = cfg.d_model
        act = _activation(cfg.activation)

        self.label_embed = nn.Embedding(n_classes + 1, d)
        self.geom_mlp = nn.Sequential(
            nn.Linear(8, d), act, nn.Linear(d, 2 * d), act, nn.Linear(2 * d, d))
        self.floor_encoder = FloorEncoder(cfg.d_floor_feat, cfg.activation)
        self.index_embed = nn.Embedding(n_slots, cfg.d_index_embed)
        self.time_mlp = nn.Sequential(nn.Linear(d, d), act, nn.Linear(d, d))
        cond_dim = cfg.d_floor_feat + cfg.d_index_embed
        self.blocks = nn.ModuleList(
            DenoiserBlock(cfg, cond_dim, self._dropout_state) for _ in range(cfg.n_blocks))
        self.final_norm = nn.LayerNorm(d)
        self.label_head = nn.Linear(d, n_classes)
        self.geom_head = nn.Sequential(
            nn.Linear(d, d), act, nn.Linear(d, 2 * d), act, nn.Linear(2 * d, 8))

        # Near-zero output at init: uniform label logits, zero predicted noise.
        nn.init.zeros_(self.label_head.weight)
        nn.init.zeros_(self.label_head.bias)
        nn.init.zeros_(self.geom_head[-1].weight)
        nn.init.zeros_(self.geom_head[-1].bias)
        self.double()

    def set_dropout_generator(self, gen: torch.Generator | None) -> None:
        self._dropout_state.generator = gen

    def encode_objects(self, z: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
        """Per-slot features: label embedding plus encoded geometry. (B, N, d)."""
        if z.shape != x.shape[:2] or x.shape[-1] != 8:
            raise InvalidInput(f"bad latent shapes z={tuple(z.shape)} x={tuple(x.shape)}")
        if int(z.min()) < 0 or int(z.max()) > self.n_classes:
            raise InvalidInput("label state out of range (mask index is n_classes)")
        return self.label_embed(z) + self.geom_mlp(x)

    def encode_floor(self, boundary: torch.Tensor) -> torch.Tensor:
        """(B, P, 4) boundary samples to a (B, d_floor_feat) summary."""
        return self.floor_encoder(boundary)

    def build_condition(self, floor_feat: torch.Tensor, n_slots: int | None = None) -> torch.Tensor:
        """Per-slot condition rows: floor summary concat index embedding. (B, N, c)."""
        n = n_slots if n_slots is not None else self.n_slots
        if n > self.n_slots:
            raise InvalidInput(f"requested {n} slots but model supports {self.n_slots}")
        b = floor_feat.shape[0]
        idx = self.index_embed(torch.arange(n))[None].expand(b, -1, -1)
        return torch.cat([floor_feat[:, None, :].expand(b, n, -1), idx], dim=-1)

    def forward(self, z: torch.Tensor, x: torch.Tensor, t: torch.Tensor,
                boundary: torch.Tensor | None = None,
                cond: torch.Tensor | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        """Denoise one batch.

        Args:
            z: (B, N) int64 label states in [0, K] (K = mask).
            x: (B, N, 8) float64 geometry latents.
            t: (B,) timesteps, 1-based.
            boundary: (B, P, 4) floor boundary samples; may be omitted when
                ``cond`` is supplied precomputed.
            cond: optional (B, N, cond_dim) condition rows.

        Returns:
            logits (B, N, K) over real labels and eps_hat (B, N, 8).
        """
        if cond is None:
            if boundary is None:
                raise InvalidInput("need boundary samples or a precomputed condition")
            cond = self.build_condition(self.encode_floor(boundary), z.shape[1])
        h = self.encode_objects(z, x)
        temb = self.time_mlp(sinusoidal_embedding(t, self.cfg.d_model))
        for block in self.blocks:
            h = block(h, temb, cond)
        h = self.final_norm(h)
        return self.label_head(h), self.geom_head(h)

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())
