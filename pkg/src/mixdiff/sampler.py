"""Reverse-process sampling, unconditional and constraint-guided.

Generation starts from the fully corrupted prior (all labels masked, unit
Gaussian geometry) and walks the reverse chain down to t = 0. Constraints
work by corruption-and-masking: before the reverse loop, the constrained
slots/coordinates are pushed through a recorded forward corruption run, and
after every reverse step the corresponding latent entries are overwritten
with that trajectory's value for the step just reached. The unconstrained
path consumes randomness identically with and without an (empty) constraint
set, so an empty mask reproduces unconditional sampling bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import categorical as cat
from . import gaussian as gau
from .errors import InvalidInput, InvalidMask
from .mixed import MixedProcess
from .scenes import (
    GEOM_DIM, FloorPlan, LabelVocab, NormStats, SceneLayout, canonicalize,
    decode_scene,
)

# Above this cumulative mask mass the prior is taken as all-[MASK] outright.
ALL_MASK_THRESHOLD = 1.0 - 1e-4


@dataclass
class MaskSpec:
    """Which slots/coordinates are pinned, and to what (normalized) values."""

    label_fixed: np.ndarray    # (N,) bool
    label_value: np.ndarray    # (N,) int64
    geom_fixed: np.ndarray     # (N, 8) bool
    geom_value: np.ndarray     # (N, 8) float64, encoded space

    def __post_init__(self):
        n = self.label_fixed.shape[0]
        if (self.label_value.shape != (n,) or self.geom_fixed.shape != (n, GEOM_DIM)
                or self.geom_value.shape != (n, GEOM_DIM)):
            raise InvalidMask("inconsistent mask array shapes")

    @property
    def n_slots(self) -> int:
        return self.label_fixed.shape[0]

    @property
    def is_empty(self) -> bool:
        return not (self.label_fixed.any() or self.geom_fixed.any())

    @staticmethod
    def empty(n_slots: int) -> "MaskSpec":
        return MaskSpec(
            label_fixed=np.zeros(n_slots, dtype=bool),
            label_value=np.zeros(n_slots, dtype=np.int64),
            geom_fixed=np.zeros((n_slots, GEOM_DIM), dtype=bool),
            geom_value=np.zeros((n_slots, GEOM_DIM), dtype=np.float64),
        )

    @staticmethod
    def from_constraints(constraints: list[dict], vocab: LabelVocab, stats: NormStats,
                         n_slots: int) -> "MaskSpec":
        """Build a mask from constraint entries.

        Each entry is {"slot": int} plus any of "label" (name), "pos"
        ([x, y, z]), "size" ([sx, sy, sz]), "yaw_rad" (float). Values are
        given in raw scene units and are stored encoded.

        Raises:
            InvalidMask: bad slot, duplicate slot, invalid values, or
                geometry pinned on a slot whose label is pinned to empty.
        """
        spec = MaskSpec.empty(n_slots)
        seen: set[int] = set()
        for entry in constraints:
            try:
                slot = int(entry["slot"])
            except (KeyError, TypeError, ValueError):
                raise InvalidMask(f"constraint entry needs an integer 'slot': {entry!r}") from None
            if not 0 <= slot < n_slots:
                raise InvalidMask(f"slot {slot} out of range for {n_slots} slots")
            if slot in seen:
                raise InvalidMask(f"duplicate constraints for slot {slot}")
            seen.add(slot)

            label = None
            if "label" in entry:
                label = vocab.index(entry["label"])
                spec.label_fixed[slot] = True
                spec.label_value[slot] = label

            has_geom = any(k in entry for k in ("pos", "size", "yaw_rad"))
            if has_geom and label == vocab.empty_index:
                raise InvalidMask(f"slot {slot}: empty label cannot carry geometry constraints")
            if not has_geom:
                continue
            raw = np.zeros(GEOM_DIM)
            fixed = np.zeros(GEOM_DIM, dtype=bool)
            if "pos" in entry:
                pos = np.asarray(entry["pos"], dtype=np.float64)
                if pos.shape != (3,) or not np.isfinite(pos).all():
                    raise InvalidMask(f"slot {slot}: pos must be 3 finite numbers")
                raw[0:3] = pos
                fixed[0:3] = True
            if "size" in entry:
                size = np.asarray(entry["size"], dtype=np.float64)
                if size.shape != (3,) or not np.isfinite(size).all() or (size <= 0).any():
                    raise InvalidMask(f"slot {slot}: size must be 3 positive numbers")
                raw[3:6] = size
                fixed[3:6] = True
            if "yaw_rad" in entry:
                yaw = float(entry["yaw_rad"])
                if not math.isfinite(yaw):
                    raise InvalidMask(f"slot {slot}: yaw must be finite")
                raw[6] = math.cos(yaw)
                raw[7] = math.sin(yaw)
                fixed[6:8] = True
            encoded = (raw - stats.offset) / stats.scale
            spec.geom_fixed[slot] |= fixed
            spec.geom_value[slot][fixed] = encoded[fixed]
        return spec


def load_constraints(path: str | Path) -> list[dict]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidMask(f"cannot read constraints {path}: {e}") from e
    if not isinstance(data, list):
        raise InvalidMask("constraints file must hold a JSON list")
    return data


@dataclass
class Trajectory:
    """Forward corruption states for the constrained entries, t = 0..T.

    Unconstrained entries are filler zeros; ``eps`` records the per-step
    Gaussian draws that produced the geometry chain.
    """

    z: np.ndarray       # (T+1, N) int64
    x: np.ndarray       # (T+1, N, 8) float64
    eps: np.ndarray     # (T, N, 8) float64
    label_fixed: np.ndarray
    geom_fixed: np.ndarray


def precompute_trajectory(mask: MaskSpec, process: MixedProcess,
                          rng: np.random.Generator) -> Trajectory:
    """Run the forward chain over the constrained entries only.

    Consumes no randomness at all for an empty mask. Draw order per step:
    one uniform per label-constrained slot, then one (slots, 8) normal block
    for the geometry-constrained slots.
    """
    n = mask.n_slots
    t_max = process.n_steps
    z = np.zeros((t_max + 1, n), dtype=np.int64)
    x = np.zeros((t_max + 1, n, GEOM_DIM), dtype=np.float64)
    eps = np.zeros((t_max, n, GEOM_DIM), dtype=np.float64)
    z[0][mask.label_fixed] = mask.label_value[mask.label_fixed]
    x[0][mask.geom_fixed] = mask.geom_value[mask.geom_fixed]

    lab_idx = np.flatnonzero(mask.label_fixed)
    geo_idx = np.flatnonzero(mask.geom_fixed.any(axis=1))
    cont = process.continuous
    for t in range(1, t_max + 1):
        if lab_idx.size:
            u = rng.random(lab_idx.size)
            z[t, lab_idx] = cat.q_step_discrete(z[t - 1, lab_idx], t, u, process.discrete)
        if geo_idx.size:
            e = rng.standard_normal((geo_idx.size, GEOM_DIM))
            eps[t - 1, geo_idx] = e
            a = cont.alpha[t - 1]
            b = cont.beta[t - 1]
            x[t, geo_idx] = np.sqrt(a) * x[t - 1, geo_idx] + np.sqrt(b) * e
    return Trajectory(z=z, x=x, eps=eps,
                      label_fixed=mask.label_fixed.copy(),
                      geom_fixed=mask.geom_fixed.copy())


def _overwrite(z: np.ndarray, x: np.ndarray, traj: Trajectory, t: int) -> None:
    z[traj.label_fixed] = traj.z[t][traj.label_fixed]
    x[traj.geom_fixed] = traj.x[t][traj.geom_fixed]


def _make_predict(denoiser, floor: FloorPlan, n_slots: int, n_boundary_points: int):
    """Normalize the denoiser to a numpy (z, x, t) -> (logits, eps_hat) callable."""
    if isinstance(denoiser, torch.nn.Module):
        denoiser.eval()
        boundary = torch.from_numpy(floor.boundary_samples(n_boundary_points))[None]
        with torch.no_grad():
            cond = denoiser.build_condition(denoiser.encode_floor(boundary), n_slots)

        def predict(z: np.ndarray, x: np.ndarray, t: int):
            with torch.no_grad():
                logits, eps_hat = denoiser(
                    torch.from_numpy(z[None]),
                    torch.from_numpy(x[None]),
                    torch.tensor([t], dtype=torch.int64),
                    cond=cond,
                )
            return logits[0].numpy(), eps_hat[0].numpy()

        return predict
    if callable(denoiser):
        return denoiser
    raise InvalidInput("denoiser must be a torch module or a (z, x, t) callable")


def sample_with_constraints(
    denoiser,
    floor: FloorPlan,
    mask: MaskSpec,
    process: MixedProcess,
    stats: NormStats,
    vocab: LabelVocab,
    rng: np.random.Generator,
    n_boundary_points: int = 256,
    variance: gau.VarianceChoice = "posterior",
    room_type: str = "",
) -> SceneLayout:
    """Generate one scene honoring the mask; empty mask is unconditional.

    The constrained trajectory is resampled per call (consuming rng first),
    then the reverse loop runs from t = T to 1, overwriting constrained
    entries after every step. The result is decoded and canonicalized.
    """
    n = mask.n_slots
    disc = process.discrete
    k = disc.n_classes
    traj = precompute_trajectory(mask, process, rng)
    predict = _make_predict(denoiser, floor, n, n_boundary_points)

    if disc.mask_bar[-1] >= ALL_MASK_THRESHOLD:
        z = np.full(n, disc.mask_index, dtype=np.int64)
    else:
        marginal = disc.Q_bar[-1][:, :k].mean(axis=1)
        u = rng.random(n)
        z = np.asarray(cat.inverse_cdf_sample(np.tile(marginal, (n, 1)), u), dtype=np.int64)
    x = rng.standard_normal((n, GEOM_DIM))
    _overwrite(z, x, traj, process.n_steps)

    for t in range(process.n_steps, 0, -1):
        logits, eps_hat = predict(z, x, t)
        u = rng.random(n)
        if t >= 2:
            probs = np.stack([
                cat.reverse_discrete(int(z[i]), logits[i], t, disc) for i in range(n)
            ])
            z = np.asarray(cat.inverse_cdf_sample(probs, u), dtype=np.int64)
            noise = rng.standard_normal((n, GEOM_DIM))
            x = gau.reverse_step(x, eps_hat, t, process.continuous, noise, variance)
        else:
            probs0 = cat.softmax(logits)
            z = np.asarray(cat.inverse_cdf_sample(probs0, u), dtype=np.int64)
            x = gau.reverse_step(x, eps_hat, 1, process.continuous,
                                 np.zeros_like(x), variance)
        _overwrite(z, x, traj, t - 1)

    scene = decode_scene(z, x, floor, stats, vocab.empty_index, room_type=room_type)
    return canonicalize(scene, vocab.empty_index)


def sample_scene(
    denoiser,
    floor: FloorPlan,
    n_slots: int,
    process: MixedProcess,
    stats: NormStats,
    vocab: LabelVocab,
    rng: np.random.Generator,
    n_boundary_points: int = 256,
    variance: gau.VarianceChoice = "posterior",
    room_type: str = "",
) -> SceneLayout:
    """Unconditional generation: all labels start masked, geometry starts N(0, I)."""
    return sample_with_constraints(
        denoiser, floor, MaskSpec.empty(n_slots), process, stats, vocab, rng,
        n_boundary_points=n_boundary_points, variance=variance, room_type=room_type,
    )


def constraints_from_scene(scene: SceneLayout, vocab: LabelVocab, n_objects: int,
                           parts: tuple[str, ...] = ("label", "pos", "size", "yaw_rad")) -> list[dict]:
    """Constraint entries pinning the first ``n_objects`` non-empty objects."""
    out = []
    real = [o for o in scene.objects if o.label != vocab.empty_index]
    if n_objects > len(real):
        raise InvalidInput(f"scene has {len(real)} objects, cannot constrain {n_objects}")
    for slot, obj in enumerate(real[:n_objects]):
        entry: dict = {"slot": slot}
        if "label" in parts:
            entry["label"] = vocab.name(obj.label)
        if "pos" in parts:
            entry["pos"] = [float(v) for v in obj.pos]
        if "size" in parts:
            entry["size"] = [float(v) for v in obj.size]
        if "yaw_rad" in parts:
            entry["yaw_rad"] = float(obj.yaw)
        out.append(entry)
    return out
