"""Scene representation: label vocabulary, oriented objects, floor plans.

A scene is a fixed-length array of object slots over a floor polygon. Each
slot carries a semantic label plus an 8-dimensional geometry vector: 3-D
position, 3-D half-extents, and a unit heading vector (cos, sin). The last
vocabulary entry is always the "empty" label; empty slots have all-zero
geometry, which lets a fixed slot count stand in for a variable object count.

Geometry vectors are what the diffusion engine operates on after
normalization. Coordinate layout within the 8-vector is fixed:

    [0:3] position (x, y planar, z vertical)
    [3:6] half-extents (sx, sy, sz)
    [6:8] heading (cos yaw, sin yaw)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidFloor, InvalidInput, InvalidObject, UnknownLabel

EMPTY_LABEL = "empty"

GEOM_DIM = 8
POS = slice(0, 3)
SIZE = slice(3, 6)
ANGLE = slice(6, 8)

# Heading vectors shorter than this decode to (1, 0); see decode_object.
DEGENERATE_ANGLE_NORM = 1e-8

# Half-extents are floored here on decode so downstream geometry never sees a
# non-positive box.
SIZE_FLOOR = 1e-6

# Count of degenerate heading vectors resolved during decode, for diagnostics.
_degenerate_angle_count = 0


def degenerate_angle_count() -> int:
    return _degenerate_angle_count


def reset_degenerate_angle_count() -> None:
    global _degenerate_angle_count
    _degenerate_angle_count = 0


class LabelVocab:
    """Ordered semantic label set whose last entry is the empty label.

    Indices are stable: label i is ``names[i]``. The diffusion process adds
    one extra absorbing state after these, so the vocabulary itself never
    contains a mask entry.
    """

    def __init__(self, names: list[str] | tuple[str, ...]):
        names = list(names)
        if len(names) < 2:
            raise InvalidInput("vocabulary needs at least one real label plus 'empty'")
        if len(set(names)) != len(names):
            raise InvalidInput(f"duplicate labels in vocabulary: {names}")
        if any(not isinstance(n, str) or not n for n in names):
            raise InvalidInput("labels must be non-empty strings")
        if names[-1] != EMPTY_LABEL:
            raise InvalidInput(f"last vocabulary entry must be {EMPTY_LABEL!r}, got {names[-1]!r}")
        self.names: tuple[str, ...] = tuple(names)
        self._index = {n: i for i, n in enumerate(self.names)}

    @property
    def n_labels(self) -> int:
        """Number of semantic labels, including the empty label."""
        return len(self.names)

    @property
    def empty_index(self) -> int:
        return len(self.names) - 1

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownLabel(f"label {name!r} not in vocabulary {list(self.names)}") from None

    def name(self, index: int) -> str:
        if not 0 <= index < len(self.names):
            raise UnknownLabel(f"label index {index} out of range for {len(self.names)} labels")
        return self.names[index]

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelVocab) and self.names == other.names

    def __repr__(self) -> str:
        return f"LabelVocab({list(self.names)})"


@dataclass
class ObjectInstance:
    """One object slot: semantic label plus oriented-box geometry.

    Attributes:
        label: Index into the vocabulary.
        pos: Center position (x, y, z), meters.
        size: Half-extents (sx, sy, sz), strictly positive for real objects.
        angle: Unit heading (cos yaw, sin yaw) about the vertical axis.

    An empty slot (label == vocab.empty_index) must be all zeros, including
    the heading, so the "no object" point is a single fixed point in
    attribute space.
    """

    label: int
    pos: np.ndarray
    size: np.ndarray
    angle: np.ndarray
    empty_index: int | None = None

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=np.float64)
        self.size = np.asarray(self.size, dtype=np.float64)
        self.angle = np.asarray(self.angle, dtype=np.float64)
        if self.pos.shape != (3,) or self.size.shape != (3,) or self.angle.shape != (2,):
            raise InvalidObject(
                f"bad attribute shapes pos={self.pos.shape} size={self.size.shape} "
                f"angle={self.angle.shape}"
            )
        if not (np.isfinite(self.pos).all() and np.isfinite(self.size).all()
                and np.isfinite(self.angle).all()):
            raise InvalidObject("non-finite object attributes")
        if self.empty_index is not None and self.label == self.empty_index:
            if self.pos.any() or self.size.any() or self.angle.any():
                raise InvalidObject("empty slot must have all-zero geometry")
        elif self.empty_index is not None:
            if (self.size <= 0).any():
                raise InvalidObject(f"non-empty object needs positive half-extents, got {self.size}")
            norm = float(np.hypot(self.angle[0], self.angle[1]))
            if abs(norm - 1.0) > 1e-6:
                raise InvalidObject(f"heading must be unit length, |angle| = {norm}")

    @property
    def yaw(self) -> float:
        return math.atan2(float(self.angle[1]), float(self.angle[0]))

    def is_empty(self, empty_index: int) -> bool:
        return self.label == empty_index

    def footprint(self) -> np.ndarray:
        """Planar corners of the oriented box, CCW, shape (4, 2)."""
        c, s = float(self.angle[0]), float(self.angle[1])
        rot = np.array([[c, -s], [s, c]])
        sx, sy = float(self.size[0]), float(self.size[1])
        corners = np.array([[sx, sy], [-sx, sy], [-sx, -sy], [sx, -sy]])
        return corners @ rot.T + self.pos[:2]


def empty_object(empty_index: int) -> ObjectInstance:
    return ObjectInstance(
        label=empty_index,
        pos=np.zeros(3),
        size=np.zeros(3),
        angle=np.zeros(2),
        empty_index=empty_index,
    )


def make_object(label: int, pos, size, yaw: float, empty_index: int | None = None) -> ObjectInstance:
    return ObjectInstance(
        label=label,
        pos=np.asarray(pos, dtype=np.float64),
        size=np.asarray(size, dtype=np.float64),
        angle=np.array([math.cos(yaw), math.sin(yaw)]),
        empty_index=empty_index,
    )


@dataclass
class NormStats:
    """Per-coordinate affine normalization for geometry vectors.

    encode: (raw - offset) / scale, decode inverts it. Offsets are zero and
    scales are per-coordinate maxima of |raw| over a training split, so the
    all-zero raw vector of an empty slot stays exactly zero after encoding
    and real coordinates land in roughly [-1, 1].
    """

    offset: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.offset.shape != (GEOM_DIM,) or self.scale.shape != (GEOM_DIM,):
            raise InvalidInput("normalization stats must be 8-vectors")
        if (self.scale <= 0).any():
            raise InvalidInput("normalization scales must be positive")

    @staticmethod
    def identity() -> "NormStats":
        return NormStats(offset=np.zeros(GEOM_DIM), scale=np.ones(GEOM_DIM))

    @staticmethod
    def from_objects(objects: list[ObjectInstance], scale_floor: float = 1e-3) -> "NormStats":
        """Fit stats to the non-empty objects of a training split."""
        raws = [raw_geometry(o) for o in objects if o.size.any() or o.angle.any()]
        if not raws:
            return NormStats.identity()
        stack = np.stack(raws)
        scale = np.maximum(np.abs(stack).max(axis=0), scale_floor)
        return NormStats(offset=np.zeros(GEOM_DIM), scale=scale)

    def to_dict(self) -> dict:
        return {"offset": self.offset.tolist(), "scale": self.scale.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "NormStats":
        return NormStats(offset=np.array(d["offset"]), scale=np.array(d["scale"]))


def raw_geometry(obj: ObjectInstance) -> np.ndarray:
    """Unnormalized 8-vector [pos, size, angle]."""
    return np.concatenate([obj.pos, obj.size, obj.angle])


def encode_object(obj: ObjectInstance, stats: NormStats) -> np.ndarray:
    """Normalized geometry vector for one slot, shape (8,)."""
    return (raw_geometry(obj) - stats.offset) / stats.scale


def decode_object(label: int, vec: np.ndarray, stats: NormStats, empty_index: int) -> ObjectInstance:
    """Invert encode_object, repairing what diffusion may have broken.

    Empty slots decode to exact zeros regardless of the vector. Headings are
    renormalized to unit length; a near-zero heading falls back to (1, 0) and
    bumps the degenerate-angle counter. Half-extents are floored at a small
    positive value.
    """
    global _degenerate_angle_count
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (GEOM_DIM,):
        raise InvalidInput(f"geometry vector must have shape (8,), got {vec.shape}")
    if label == empty_index:
        return empty_object(empty_index)
    raw = vec * stats.scale + stats.offset
    pos = raw[POS]
    size = np.maximum(raw[SIZE], SIZE_FLOOR)
    angle = raw[ANGLE]
    norm = float(np.hypot(angle[0], angle[1]))
    if norm < DEGENERATE_ANGLE_NORM:
        _degenerate_angle_count += 1
        angle = np.array([1.0, 0.0])
    else:
        angle = angle / norm
    return ObjectInstance(label=label, pos=pos, size=size, angle=angle, empty_index=empty_index)


# ---------------------------------------------------------------------------
# Floor plans
# ---------------------------------------------------------------------------


def _shoelace(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    """True when open segments p1p2 and p3p4 cross at an interior point."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


@dataclass
class FloorPlan:
    """Simple polygon bounding the usable floor, vertices CCW.

    The constructor normalizes orientation and rejects degenerate input:
    fewer than 3 vertices, repeated consecutive vertices, near-zero area, or
    self-intersection.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InvalidFloor(f"polygon needs shape (V>=3, 2), got {v.shape}")
        if not np.isfinite(v).all():
            raise InvalidFloor("polygon has non-finite vertices")
        edge = np.roll(v, -1, axis=0) - v
        if (np.hypot(edge[:, 0], edge[:, 1]) < 1e-9).any():
            raise InvalidFloor("polygon has repeated consecutive vertices")
        area = _shoelace(v)
        if abs(area) < 1e-9:
            raise InvalidFloor("polygon area is degenerate")
        if area < 0:
            v = v[::-1].copy()
        n = v.shape[0]
        for i in range(n):
            a1, a2 = v[i], v[(i + 1) % n]
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                if _segments_properly_intersect(a1, a2, v[j], v[(j + 1) % n]):
                    raise InvalidFloor("polygon is self-intersecting")
        self.vertices = v

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def area(self) -> float:
        return _shoelace(self.vertices)

    def perimeter(self) -> float:
        edge = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.hypot(edge[:, 0], edge[:, 1]).sum())

    def edge_normals(self) -> np.ndarray:
        """Outward unit normal per edge, shape (V, 2). CCW makes (dy, -dx) outward."""
        edge = np.roll(self.vertices, -1, axis=0) - self.vertices
        normals = np.stack([edge[:, 1], -edge[:, 0]], axis=1)
        return normals / np.hypot(normals[:, 0], normals[:, 1])[:, None]

    def boundary_samples(self, n_points: int = 256) -> np.ndarray:
        """Uniform arc-length samples with outward normals, shape (n, 4).

        Columns are [x, y, nx, ny]. Points sit at arc-length offsets
        (k + 0.5) * perimeter / n from vertex 0, so consecutive spacing is
        exactly perimeter / n and samples generically avoid corners.
        """
        if n_points < 1:
            raise InvalidInput("need at least one boundary sample")
        v = self.vertices
        edge = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(edge[:, 0], edge[:, 1])
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        total = cum[-1]
        normals = self.edge_normals()
        s = (np.arange(n_points) + 0.5) * total / n_points
        idx = np.searchsorted(cum, s, side="right") - 1
        idx = np.clip(idx, 0, len(lengths) - 1)
        frac = (s - cum[idx]) / lengths[idx]
        pts = v[idx] + frac[:, None] * edge[idx]
        return np.concatenate([pts, normals[idx]], axis=1)

    def dilated(self, dilation: float) -> "FloorPlan":
        """Offset polygon with miter joins; exact for convex and rectilinear shapes."""
        if dilation == 0.0:
            return self
        v = self.vertices
        n = v.shape[0]
        normals = self.edge_normals()
        edges = np.roll(v, -1, axis=0) - v
        out = np.empty_like(v)
        for i in range(n):
            # Vertex i joins edge i-1 and edge i; intersect their shifted lines.
            j = (i - 1) % n
            p1 = v[j] + dilation * normals[j]
            d1 = edges[j]
            p2 = v[i] + dilation * normals[i]
            d2 = edges[i]
            denom = d1[0] * d2[1] - d1[1] * d2[0]
            if abs(denom) < 1e-12 * max(1.0, abs(d1[0]) + abs(d1[1])):
                out[i] = p2  # collinear neighbors: plain shift
            else:
                t = ((p2[0] - p1[0]) * d2[1] - (p2[1] - p1[1]) * d2[0]) / denom
                out[i] = p1 + t * d1
        return FloorPlan(out)

    def contains(self, point, dilation: float = 0.0) -> bool:
        poly = self.dilated(dilation) if dilation != 0.0 else self
        return _winding_number(np.asarray(point, dtype=np.float64), poly.vertices) != 0

    def to_dict(self) -> dict:
        return {"polygon": [[float(x), float(y)] for x, y in self.vertices]}

    @staticmethod
    def from_dict(d: dict) -> "FloorPlan":
        try:
            poly = d["polygon"]
        except (KeyError, TypeError):
            raise InvalidFloor(f"floor dict needs a 'polygon' key, got {d!r}") from None
        return FloorPlan(np.asarray(poly, dtype=np.float64))


def _winding_number(p: np.ndarray, vertices: np.ndarray) -> int:
    """Nonzero winding number of polygon around p; 0 means outside."""
    wn = 0
    n = vertices.shape[0]
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
        if a[1] <= p[1]:
            if b[1] > p[1] and cross > 0:
                wn += 1
        else:
            if b[1] <= p[1] and cross < 0:
                wn -= 1
    return wn


def point_in_floor(point, floor: FloorPlan, dilation: float = 0.0) -> bool:
    """True when point lies inside the floor polygon grown by ``dilation``."""
    return floor.contains(point, dilation)


# ---------------------------------------------------------------------------
# Scene layout
# ---------------------------------------------------------------------------


@dataclass
class SceneLayout:
    """Fixed number of object slots over one floor plan."""

    room_type: str
    floor: FloorPlan
    objects: list[ObjectInstance] = field(default_factory=list)

    @property
    def n_slots(self) -> int:
        return len(self.objects)

    def non_empty(self, empty_index: int) -> list[ObjectInstance]:
        return [o for o in self.objects if o.label != empty_index]


def canonicalize(scene: SceneLayout, empty_index: int) -> SceneLayout:
    """Stable-partition slots so real objects precede empty ones.

    Idempotent; relative order within each group is preserved.
    """
    real = [o for o in scene.objects if o.label != empty_index]
    rest = [o for o in scene.objects if o.label == empty_index]
    return SceneLayout(room_type=scene.room_type, floor=scene.floor, objects=real + rest)


def encode_scene(scene: SceneLayout, stats: NormStats) -> tuple[np.ndarray, np.ndarray]:
    """Scene to diffusion-ready arrays: labels (N,) int64, geometry (N, 8) float64."""
    labels = np.array([o.label for o in scene.objects], dtype=np.int64)
    geoms = np.stack([encode_object(o, stats) for o in scene.objects]) if scene.objects \
        else np.zeros((0, GEOM_DIM))
    return labels, geoms


def decode_scene(
    labels: np.ndarray,
    geoms: np.ndarray,
    floor: FloorPlan,
    stats: NormStats,
    empty_index: int,
    room_type: str = "",
) -> SceneLayout:
    labels = np.asarray(labels)
    geoms = np.asarray(geoms, dtype=np.float64)
    if labels.ndim != 1 or geoms.shape != (labels.shape[0], GEOM_DIM):
        raise InvalidInput(f"mismatched shapes labels={labels.shape} geoms={geoms.shape}")
    objects = [
        decode_object(int(z), geoms[i], stats, empty_index) for i, z in enumerate(labels)
    ]
    return SceneLayout(room_type=room_type, floor=floor, objects=objects)


def scene_to_dict(scene: SceneLayout, vocab: LabelVocab) -> dict:
    """JSON-ready dict; empty slots are omitted (slot count is dataset metadata)."""
    objs = []
    for o in scene.objects:
        if o.label == vocab.empty_index:
            continue
        objs.append({
            "label": vocab.name(o.label),
            "pos": [float(x) for x in o.pos],
            "size": [float(x) for x in o.size],
            "yaw_rad": float(o.yaw),
        })
    return {"room_type": scene.room_type, "floor": scene.floor.to_dict(), "objects": objs}


def scene_from_dict(d: dict, vocab: LabelVocab, n_slots: int | None = None) -> SceneLayout:
    """Parse a scene dict, padding with empty slots up to ``n_slots``.

    Raises:
        UnknownLabel: an object label is not in the vocabulary.
        InvalidFloor / InvalidObject: malformed geometry.
        InvalidInput: more objects than slots.
    """
    floor = FloorPlan.from_dict(d.get("floor", {}))
    objects = []
    for entry in d.get("objects", []):
        label = vocab.index(entry["label"])
        objects.append(make_object(
            label=label,
            pos=entry["pos"],
            size=entry["size"],
            yaw=float(entry["yaw_rad"]),
            empty_index=vocab.empty_index,
        ))
    if n_slots is None:
        n_slots = len(objects)
    if len(objects) > n_slots:
        raise InvalidInput(f"scene has {len(objects)} objects but only {n_slots} slots")
    objects += [empty_object(vocab.empty_index) for _ in range(n_slots - len(objects))]
    return SceneLayout(room_type=str(d.get("room_type", "")), floor=floor, objects=objects)
