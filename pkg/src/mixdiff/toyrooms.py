"""Procedural toy-room datasets with known statistics.

Two families:

* ``toy_dining``: one table at the center of the core rectangle with 2-6
  chairs tucked around it, everything axis-aligned and mirror-symmetric.
* ``toy_bedroom``: a bed headboard-against-a-wall, 0-2 nightstands flanking
  it, and an optional wardrobe against the opposite wall.

Floors are rectangles, or L-shapes built by extending one side, with all
side lengths in [3, 8] m. Rooms are sized around their contents, so scenes
are in-bounds and overlap-free by construction; a validity check plus
bounded retry guards the construction anyway. Scene i depends only on
(seed, i), never on other scenes. The exact label distribution implied by
the generation rules is recorded for the KL metric:

* dining: chair count uniform on {2..6}, so labels are [1/5 table, 4/5 chair]
* bedroom: nightstands uniform on {0,1,2} and wardrobe with probability 1/2,
  so labels are [0.4 bed, 0.4 nightstand, 0.2 wardrobe]
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .metrics import convex_clip, polygon_area
from .scenes import (
    LabelVocab, NormStats, ObjectInstance, SceneLayout, make_object,
    scene_from_dict, scene_to_dict,
)

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 100

ROOM_TYPES = {
    "toy_dining": {
        "vocab": ("table", "chair", "empty"),
        "n_slots": 8,
        "ref_label_dist": (0.2, 0.8),
    },
    "toy_bedroom": {
        "vocab": ("bed", "nightstand", "wardrobe", "empty"),
        "n_slots": 4,
        "ref_label_dist": (0.4, 0.4, 0.2),
    },
}


@dataclass(frozen=True)
class ToyRoomSpec:
    """A dataset generation request."""

    room_type: str
    count: int
    seed: int
    split_ratio: float = 0.9

    def __post_init__(self):
        if self.room_type not in ROOM_TYPES:
            raise InvalidInput(f"unknown room type {self.room_type!r}; "
                               f"known: {sorted(ROOM_TYPES)}")
        if self.count < 1:
            raise InvalidInput("count must be positive")
        if not 0.0 < self.split_ratio <= 1.0:
            raise InvalidInput("split_ratio must be in (0, 1]")


def _room_entry(room_type: str) -> dict:
    try:
        return ROOM_TYPES[room_type]
    except KeyError:
        raise InvalidInput(
            f"unknown room type {room_type!r}; choices: {sorted(ROOM_TYPES)}") from None


def room_vocab(room_type: str) -> LabelVocab:
    return LabelVocab(list(_room_entry(room_type)["vocab"]))


def room_slots(room_type: str) -> int:
    return int(_room_entry(room_type)["n_slots"])


def ref_label_dist(room_type: str) -> np.ndarray:
    return np.asarray(_room_entry(room_type)["ref_label_dist"], dtype=np.float64)


def _rotate_quarters(xy: np.ndarray, quarters: int) -> np.ndarray:
    """Exact rotation by quarters * 90 degrees CCW about the origin."""
    out = np.asarray(xy, dtype=np.float64).copy()
    for _ in range(quarters % 4):
        out = np.stack([-out[..., 1], out[..., 0]], axis=-1)
    return out


def _make_floor(core_hx: float, core_hy: float, rng: np.random.Generator) -> np.ndarray:
    """Core rectangle, possibly extended into an L on the +x side."""
    hx, hy = core_hx, core_hy
    verts = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
    if rng.random() >= 0.3:
        return verts
    depth_cap = 8.0 - 2.0 * hx
    if depth_cap < 0.6:
        return verts
    depth = rng.uniform(0.6, min(1.4, depth_cap))
    width = rng.uniform(1.0, max(1.0, 2.0 * hy - 0.5))
    width = min(width, 2.0 * hy - 0.3)
    if rng.random() < 0.5:
        # bump anchored at the bottom corner
        b = -hy + width
        return np.array([[-hx, -hy], [hx + depth, -hy], [hx + depth, b],
                         [hx, b], [hx, hy], [-hx, hy]])
    a = hy - width
    return np.array([[-hx, -hy], [hx, -hy], [hx, a], [hx + depth, a],
                     [hx + depth, hy], [-hx, hy]])


def _generate_dining(rng: np.random.Generator, vocab: LabelVocab) -> SceneLayout:
    k = int(rng.integers(2, 7))
    m = k // 2
    head = k % 2 == 1

    csx = 0.20 + rng.uniform(0.0, 0.05)   # chair depth / 2
    csy = 0.22 + rng.uniform(0.0, 0.05)   # chair width / 2
    csz = 0.40 + rng.uniform(0.0, 0.10)
    pitch = 2.0 * csy + 0.12
    tsy = max(m * pitch / 2.0 + 0.05, 0.45) + rng.uniform(0.0, 0.2)
    tsx = rng.uniform(0.5, 0.9)
    tsz = 0.35 + rng.uniform(0.0, 0.05)
    side_gap = 0.03 + rng.uniform(0.0, 0.04)
    cx = tsx + csx + side_gap

    objects = [make_object(vocab.index("table"), (0.0, 0.0, tsz),
                           (tsx, tsy, tsz), 0.0, vocab.empty_index)]
    for j in range(m):
        cy = (j - (m - 1) / 2.0) * pitch
        objects.append(make_object(vocab.index("chair"), (-cx, cy, csz),
                                   (csx, csy, csz), 0.0, vocab.empty_index))
        objects.append(make_object(vocab.index("chair"), (cx, cy, csz),
                                   (csx, csy, csz), math.pi, vocab.empty_index))
    head_extent = 0.0
    if head:
        hy_pos = tsy + csx + side_gap
        objects.append(make_object(vocab.index("chair"), (0.0, hy_pos, csz),
                                   (csx, csy, csz), -math.pi / 2.0, vocab.empty_index))
        head_extent = 2.0 * csx + side_gap

    req_x = cx + csx + 0.2
    req_y = tsy + head_extent + 0.2
    hx = max(req_x, 1.55) + rng.uniform(0.1, 1.2)
    hy = max(req_y, 1.55) + rng.uniform(0.1, 1.2)
    floor = _make_floor(hx, hy, rng)
    return _finish_scene("toy_dining", floor, objects, rng, vocab)


def _generate_bedroom(rng: np.random.Generator, vocab: LabelVocab) -> SceneLayout:
    # local sx runs along the heading; beds face -y, so world extents swap
    b_len = rng.uniform(0.90, 1.05)       # bed length / 2, along heading
    b_wid = rng.uniform(0.70, 0.95)       # bed width / 2
    bsz = 0.30 + rng.uniform(0.0, 0.10)
    n_ns = int(rng.integers(0, 3))
    has_w = rng.random() < 0.5
    nsx = 0.22 + rng.uniform(0.0, 0.03)   # nightstand depth / 2
    nsy = 0.22 + rng.uniform(0.0, 0.03)   # nightstand width / 2
    nsz = 0.25 + rng.uniform(0.0, 0.05)
    wsx = 0.30 + rng.uniform(0.0, 0.10)    # wardrobe depth / 2
    wsy = 0.50 + rng.uniform(0.0, 0.30)    # wardrobe width / 2
    wsz = 0.90 + rng.uniform(0.0, 0.20)
    m0 = 0.05 + rng.uniform(0.0, 0.10)

    req_x = b_wid + (2.0 * nsy + 0.08 if n_ns > 0 else 0.0) + 0.2
    req_y = b_len + (wsx if has_w else 0.0) + 0.6
    hx = max(req_x, 1.55, wsy + 0.35 if has_w else 0.0) + rng.uniform(0.1, 1.0)
    hy = max(req_y, 1.55) + rng.uniform(0.1, 1.0)

    bed_y = hy - m0 - b_len
    facing_in = -math.pi / 2.0  # heading away from the +y wall
    objects = [make_object(vocab.index("bed"), (0.0, bed_y, bsz),
                           (b_len, b_wid, bsz), facing_in, vocab.empty_index)]
    sides = [-1.0, 1.0] if n_ns == 2 else ([rng.choice([-1.0, 1.0])] if n_ns == 1 else [])
    for side in sides:
        ns_x = side * (b_wid + nsy + 0.04)
        ns_y = hy - m0 - nsx
        objects.append(make_object(vocab.index("nightstand"), (ns_x, ns_y, nsz),
                                   (nsx, nsy, nsz), facing_in, vocab.empty_index))
    if has_w:
        w_slack = hx - wsy - 0.15
        w_x = rng.uniform(-w_slack, w_slack)
        w_y = -hy + m0 + wsx
        objects.append(make_object(vocab.index("wardrobe"), (w_x, w_y, wsz),
                                   (wsx, wsy, wsz), math.pi / 2.0, vocab.empty_index))

    floor = _make_floor(hx, hy, rng)
    return _finish_scene("toy_bedroom", floor, objects, rng, vocab)


def _finish_scene(room_type: str, floor_verts: np.ndarray, objects: list[ObjectInstance],
                  rng: np.random.Generator, vocab: LabelVocab) -> SceneLayout:
    """Rotate by a random quadrant, recenter on the floor bbox, pad slots."""
    q = int(rng.integers(0, 4))
    verts = _rotate_quarters(floor_verts, q)
    center = 0.5 * (verts.min(axis=0) + verts.max(axis=0))
    verts = verts - center
    rotated = []
    for o in objects:
        xy = _rotate_quarters(o.pos[:2], q) - center
        yaw = o.yaw + q * math.pi / 2.0
        rotated.append(make_object(o.label, (xy[0], xy[1], o.pos[2]),
                                   o.size, yaw, vocab.empty_index))
    n_slots = room_slots(room_type)
    scene = scene_from_dict(
        {"room_type": room_type, "floor": {"polygon": verts.tolist()}, "objects": []},
        vocab, n_slots)
    scene.objects[: len(rotated)] = rotated
    return scene


def scene_is_valid(scene: SceneLayout, empty_index: int, margin: float = 0.02) -> bool:
    """Strict containment with margin, and exactly zero footprint overlap."""
    shrunk = scene.floor.dilated(-margin)
    objs = scene.non_empty(empty_index)
    for obj in objs:
        if any(not shrunk.contains(c) for c in obj.footprint()):
            return False
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            inter = polygon_area(convex_clip(objs[i].footprint(), objs[j].footprint()))
            if inter > 1e-12:
                return False
    return True


def generate_scene(room_type: str, seed: int, index: int) -> SceneLayout | None:
    """Scene ``index`` of the dataset, or None if validity never held."""
    vocab = room_vocab(room_type)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
    make = _generate_dining if room_type == "toy_dining" else _generate_bedroom
    for attempt in range(MAX_ATTEMPTS):
        scene = make(rng, vocab)
        if scene_is_valid(scene, vocab.empty_index):
            return scene
    logger.warning("scene %d: no valid layout in %d attempts, skipping", index, MAX_ATTEMPTS)
    return None


def generate(spec: ToyRoomSpec) -> list[SceneLayout]:
    """All scenes for a spec; invalid indices are skipped with a log line."""
    scenes = []
    for i in range(spec.count):
        scene = generate_scene(spec.room_type, spec.seed, i)
        if scene is not None:
            scenes.append(scene)
    return scenes


@dataclass
class ToyDataset:
    room_type: str
    vocab: LabelVocab
    n_slots: int
    stats: NormStats
    ref_dist: np.ndarray
    scenes: list[SceneLayout]
    train_indices: list[int]
    val_indices: list[int]

    @property
    def train_scenes(self) -> list[SceneLayout]:
        return [self.scenes[i] for i in self.train_indices]

    @property
    def val_scenes(self) -> list[SceneLayout]:
        return [self.scenes[i] for i in self.val_indices]


def write_dataset(spec: ToyRoomSpec, out_dir: str | Path) -> ToyDataset:
    """Generate, split, fit normalization stats, and write the dataset tree."""
    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    vocab = room_vocab(spec.room_type)
    scenes = generate(spec)
    if not scenes:
        raise InvalidInput("generation produced no valid scenes")
    n_train = max(1, round(len(scenes) * spec.split_ratio))
    train_idx = list(range(n_train))
    val_idx = list(range(n_train, len(scenes)))
    train_objs = [o for i in train_idx for o in scenes[i].non_empty(vocab.empty_index)]
    stats = NormStats.from_objects(train_objs)

    files = []
    for i, scene in enumerate(scenes):
        rel = f"scenes/scene_{i:05d}.json"
        (out / rel).write_text(
            json.dumps(scene_to_dict(scene, vocab), sort_keys=True, indent=1) + "\n")
        files.append(rel)
    manifest = {
        "room_type": spec.room_type,
        "vocab": list(vocab.names),
        "n_slots": room_slots(spec.room_type),
        "count": spec.count,
        "seed": spec.seed,
        "split_ratio": spec.split_ratio,
        "split": {"train": train_idx, "val": val_idx},
        "ref_label_dist": ref_label_dist(spec.room_type).tolist(),
        "norm_stats": stats.to_dict(),
        "scene_files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return ToyDataset(
        room_type=spec.room_type, vocab=vocab, n_slots=room_slots(spec.room_type),
        stats=stats, ref_dist=ref_label_dist(spec.room_type), scenes=scenes,
        train_indices=train_idx, val_indices=val_idx,
    )


def load_dataset(path: str | Path) -> ToyDataset:
    """Read a dataset tree written by write_dataset."""
    root = Path(path)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidInput(f"cannot read dataset manifest under {path}: {e}") from e
    vocab = LabelVocab(manifest["vocab"])
    n_slots = int(manifest["n_slots"])
    scenes = []
    for rel in manifest["scene_files"]:
        d = json.loads((root / rel).read_text())
        scenes.append(scene_from_dict(d, vocab, n_slots))
    return ToyDataset(
        room_type=manifest["room_type"],
        vocab=vocab,
        n_slots=n_slots,
        stats=NormStats.from_dict(manifest["norm_stats"]),
        ref_dist=np.asarray(manifest["ref_label_dist"], dtype=np.float64),
        scenes=scenes,
        train_indices=list(manifest["split"]["train"]),
        val_indices=list(manifest["split"]["val"]),
    )


def load_scenes(path: str | Path, vocab: LabelVocab, n_slots: int | None = None) -> list[SceneLayout]:
    """Load scene JSON files from a directory (sorted) or a single file."""
    p = Path(path)
    files = sorted(p.glob("scene_*.json")) if p.is_dir() else [p]
    if not files:
        raise InvalidInput(f"no scene files under {path}")
    return [scene_from_dict(json.loads(f.read_text()), vocab, n_slots) for f in files]
