"""Versioned JSON checkpoint container.

Parameters are stored as base64-encoded little-endian arrays inside a plain
JSON document, so checkpoints are byte-reproducible across runs (no embedded
timestamps), diffable, and independent of pickle. Loading rebuilds the model
from its stored config and validates every tensor's shape.

An optional trainer-state section (optimizer moments, RNG state, epoch)
makes a resumed run continue exactly where the interrupted one stopped.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .denoiser import Denoiser, DenoiserConfig
from .errors import InvalidCheckpoint
from .scenes import LabelVocab, NormStats

FORMAT_VERSION = 1

_DTYPES = {"float64": "<f8", "int64": "<i8", "uint8": "|u1"}


def encode_array(arr: np.ndarray) -> dict:
    kind = str(arr.dtype)
    if kind not in _DTYPES:
        raise InvalidCheckpoint(f"unsupported dtype {kind}")
    data = arr.astype(_DTYPES[kind]).tobytes(order="C")
    return {"dtype": kind, "shape": list(arr.shape),
            "data": base64.b64encode(data).decode("ascii")}


def decode_array(spec: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(spec["data"])
        arr = np.frombuffer(raw, dtype=_DTYPES[spec["dtype"]]).copy()
        return arr.reshape(spec["shape"])
    except (KeyError, ValueError, TypeError) as e:
        raise InvalidCheckpoint(f"malformed array entry: {e}") from e


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass
class CheckpointBundle:
    model: Denoiser
    vocab: LabelVocab
    stats: NormStats
    run_config: dict
    trainer_state: dict | None
    config_hash: str


def save_checkpoint(path: str | Path, model: Denoiser, vocab: LabelVocab,
                    stats: NormStats, run_config: dict,
                    trainer_state: dict | None = None) -> None:
    params = {
        name: encode_array(tensor.detach().cpu().numpy())
        for name, tensor in sorted(model.state_dict().items())
    }
    doc = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash(run_config),
        "run_config": run_config,
        "denoiser_config": model.cfg.to_dict(),
        "n_classes": model.n_classes,
        "n_slots": model.n_slots,
        "vocab": list(vocab.names),
        "norm_stats": stats.to_dict(),
        "params": params,
        "trainer_state": trainer_state,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_checkpoint(path: str | Path) -> CheckpointBundle:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidCheckpoint(f"cannot read checkpoint {path}: {e}") from e
    if doc.get("format_version") != FORMAT_VERSION:
        raise InvalidCheckpoint(f"unsupported format version {doc.get('format_version')}")
    try:
        cfg = DenoiserConfig.from_dict(doc["denoiser_config"])
        vocab = LabelVocab(doc["vocab"])
        stats = NormStats.from_dict(doc["norm_stats"])
        model = Denoiser(cfg, int(doc["n_classes"]), int(doc["n_slots"]))
        params = doc["params"]
    except KeyError as e:
        raise InvalidCheckpoint(f"missing checkpoint field {e}") from e

    state = model.state_dict()
    if set(params) != set(state):
        missing = set(state) - set(params)
        extra = set(params) - set(state)
        raise InvalidCheckpoint(f"parameter names mismatch: missing={missing} extra={extra}")
    new_state = {}
    for name, tensor in state.items():
        arr = decode_array(params[name])
        if tuple(arr.shape) != tuple(tensor.shape):
            raise InvalidCheckpoint(
                f"shape mismatch for {name}: stored {arr.shape}, model {tuple(tensor.shape)}")
        new_state[name] = torch.from_numpy(arr).to(tensor.dtype)
    model.load_state_dict(new_state)
    return CheckpointBundle(
        model=model, vocab=vocab, stats=stats,
        run_config=doc.get("run_config", {}),
        trainer_state=doc.get("trainer_state"),
        config_hash=doc.get("config_hash", ""),
    )


def pack_trainer_state(optimizer: torch.optim.Optimizer, model: Denoiser,
                       epoch: int, gen: torch.Generator) -> dict:
    """JSON-safe snapshot of optimizer moments, epoch counter, and RNG state."""
    names = [n for n, _ in model.named_parameters()]
    params = [p for _, p in model.named_parameters()]
    opt_state = {}
    for name, p in zip(names, params):
        s = optimizer.state.get(p)
        if not s:
            continue
        opt_state[name] = {
            "step": float(s["step"]),
            "exp_avg": encode_array(s["exp_avg"].detach().cpu().numpy()),
            "exp_avg_sq": encode_array(s["exp_avg_sq"].detach().cpu().numpy()),
        }
    return {
        "epoch": int(epoch),
        "lr": float(optimizer.param_groups[0]["lr"]),
        "optimizer": opt_state,
        "torch_rng": base64.b64encode(gen.get_state().numpy().tobytes()).decode("ascii"),
    }


def restore_trainer_state(state: dict, optimizer: torch.optim.Optimizer,
                          model: Denoiser) -> tuple[int, torch.Generator]:
    for group in optimizer.param_groups:
        group["lr"] = float(state["lr"])
    opt_state = state.get("optimizer", {})
    for name, p in model.named_parameters():
        if name not in opt_state:
            continue
        entry = opt_state[name]
        optimizer.state[p] = {
            "step": torch.tensor(float(entry["step"])),
            "exp_avg": torch.from_numpy(decode_array(entry["exp_avg"])).to(p.dtype),
            "exp_avg_sq": torch.from_numpy(decode_array(entry["exp_avg_sq"])).to(p.dtype),
        }
    gen = torch.Generator()
    raw = base64.b64decode(state["torch_rng"])
    gen.set_state(torch.from_numpy(np.frombuffer(raw, dtype=np.uint8).copy()))
    return int(state["epoch"]), gen
