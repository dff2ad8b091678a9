"""Run configuration: one flat record shared by training, sampling, and eval.

A config fully determines a run given a dataset: schedules, model size,
optimizer settings, and the base seed. ``canonical_json`` gives a stable
serialization whose hash ties checkpoints back to the settings that
produced them.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .denoiser import DenoiserConfig
from .errors import InvalidInput
from .mixed import MixedProcess
from .categorical import make_mask_replace_schedule
from .gaussian import make_linear_beta


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run, minus the dataset itself."""

    seed: int = 0
    room_type: str = "toy_dining"

    # diffusion process
    n_steps: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.02
    keep_start: float = 1.0 - 1e-5
    keep_end: float = 9e-6
    mask_start: float = 9e-6
    mask_end: float = 0.99999
    lambda_aux: float = 0.05

    # denoiser
    n_blocks: int = 2
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    d_floor_feat: int = 32
    d_index_embed: int = 16
    dropout: float = 0.1

    # optimization
    lr: float = 2e-4
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 0          # epochs between decays; 0 disables
    epochs: int = 80
    batch_size: int = 64

    # sampling and conditioning
    n_boundary_points: int = 256
    variance: str = "posterior"

    threads: int = 1

    def __post_init__(self):
        if self.n_steps < 1:
            raise InvalidInput("n_steps must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidInput("epochs and batch_size must be positive")
        if self.lr < 0.0:
            raise InvalidInput("lr must be nonnegative")
        if self.variance not in ("posterior", "beta"):
            raise InvalidInput(f"variance must be 'posterior' or 'beta', got {self.variance!r}")
        if self.threads < 1:
            raise InvalidInput("threads must be positive")

    def denoiser_config(self) -> DenoiserConfig:
        return DenoiserConfig(
            n_blocks=self.n_blocks, d_model=self.d_model, n_heads=self.n_heads,
            d_ff=self.d_ff, d_floor_feat=self.d_floor_feat,
            d_index_embed=self.d_index_embed, dropout=self.dropout,
        )

    def make_process(self, n_classes: int) -> MixedProcess:
        return MixedProcess(
            continuous=make_linear_beta(self.n_steps, self.beta_start, self.beta_end),
            discrete=make_mask_replace_schedule(
                self.n_steps, n_classes,
                keep_start=self.keep_start, keep_end=self.keep_end,
                mask_start=self.mask_start, mask_end=self.mask_end),
            lambda_aux=self.lambda_aux,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def with_overrides(self, **overrides) -> "RunConfig":
        """New config with the given fields replaced; None values are ignored."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **clean) if clean else self


def config_from_dict(d: dict) -> RunConfig:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(d) - fields
    if unknown:
        raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**d)


def load_config(path: str | Path) -> RunConfig:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidInput(f"cannot read config {path}: {e}") from e
    if not isinstance(d, dict):
        raise InvalidInput("config file must hold a JSON object")
    return config_from_dict(d)
