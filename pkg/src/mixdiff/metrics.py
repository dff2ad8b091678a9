"""Layout quality metrics.

All metrics operate on decoded scenes and ignore empty slots. Percentages
are percentages (0..100), not fractions; the label KL is reported raw (the
conventional table display multiplies it by 100).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientData, InvalidInput
from .scenes import FloorPlan, ObjectInstance, SceneLayout

OOB_DILATION = 0.1
KL_SMOOTHING = 1e-10


def polygon_area(pts: np.ndarray) -> float:
    if pts.shape[0] < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))


def convex_clip(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Intersection of two convex CCW polygons (Sutherland-Hodgman)."""
    output = [tuple(p) for p in subject]
    m = clip.shape[0]
    for i in range(m):
        a = clip[i]
        b = clip[(i + 1) % m]
        if not output:
            break
        edge = (b[0] - a[0], b[1] - a[1])
        inputs = output
        output = []

        def inside(p):
            return edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]) >= 0.0

        def intersect(p, q):
            dp = (q[0] - p[0], q[1] - p[1])
            denom = edge[0] * dp[1] - edge[1] * dp[0]
            num = edge[0] * (a[1] - p[1]) - edge[1] * (a[0] - p[0])
            s = num / denom
            return (p[0] + s * dp[0], p[1] + s * dp[1])

        for j, q in enumerate(inputs):
            p = inputs[j - 1]
            if inside(q):
                if not inside(p):
                    output.append(intersect(p, q))
                output.append(q)
            elif inside(p):
                output.append(intersect(p, q))
    return np.array(output) if output else np.zeros((0, 2))


def pair_iou_3d(a: ObjectInstance, b: ObjectInstance) -> float:
    """Volume IoU of two upright oriented boxes.

    Plan-view intersection comes from exact convex polygon clipping of the
    footprints; the vertical extent is an interval overlap.
    """
    inter_area = polygon_area(convex_clip(a.footprint(), b.footprint()))
    za0, za1 = a.pos[2] - a.size[2], a.pos[2] + a.size[2]
    zb0, zb1 = b.pos[2] - b.size[2], b.pos[2] + b.size[2]
    dz = max(0.0, min(za1, zb1) - max(za0, zb0))
    inter = inter_area * dz
    vol_a = 8.0 * float(a.size[0] * a.size[1] * a.size[2])
    vol_b = 8.0 * float(b.size[0] * b.size[1] * b.size[2])
    union = vol_a + vol_b - inter
    if union <= 0.0:
        raise InvalidInput("degenerate boxes in IoU")
    return inter / union


def scene_iou(scene: SceneLayout, empty_index: int) -> float:
    """Mean pairwise volume IoU over non-empty objects; 0 when fewer than two."""
    objs = scene.non_empty(empty_index)
    if len(objs) < 2:
        return 0.0
    vals = [pair_iou_3d(objs[i], objs[j])
            for i in range(len(objs)) for j in range(i + 1, len(objs))]
    return float(np.mean(vals))


def iou_pct(scenes: list[SceneLayout], empty_index: int) -> float:
    """Scene-averaged mean pairwise IoU, in percent."""
    if not scenes:
        raise InsufficientData("no scenes")
    return 100.0 * float(np.mean([scene_iou(s, empty_index) for s in scenes]))


def object_oob(obj: ObjectInstance, floor: FloorPlan, dilation: float = OOB_DILATION) -> bool:
    """True when any footprint corner falls outside the dilated floor."""
    grown = floor.dilated(dilation)
    return any(not grown.contains(corner) for corner in obj.footprint())


def oob_pct(scenes: list[SceneLayout], empty_index: int,
            dilation: float = OOB_DILATION) -> float:
    """Percent of non-empty objects with a corner outside the dilated floor."""
    total = 0
    out = 0
    for scene in scenes:
        grown = scene.floor.dilated(dilation)
        for obj in scene.non_empty(empty_index):
            total += 1
            if any(not grown.contains(c) for c in obj.footprint()):
                out += 1
    if total == 0:
        return 0.0
    return 100.0 * out / total


def label_histogram(scenes: list[SceneLayout], n_labels: int, empty_index: int) -> np.ndarray:
    """Counts of non-empty labels pooled over scenes, length n_labels - 1."""
    counts = np.zeros(n_labels - 1, dtype=np.int64)
    for scene in scenes:
        for obj in scene.non_empty(empty_index):
            if not 0 <= obj.label < n_labels - 1:
                raise InvalidInput(f"label {obj.label} outside real-label range")
            counts[obj.label] += 1
    return counts


def kl_labels(scenes: list[SceneLayout], ref_dist: np.ndarray, empty_index: int,
              smoothing: float = KL_SMOOTHING) -> float:
    """KL(empirical || reference) over non-empty label frequencies.

    Both distributions get epsilon smoothing and renormalization so the
    divergence stays finite when a label never occurs.
    """
    ref = np.asarray(ref_dist, dtype=np.float64)
    counts = label_histogram(scenes, ref.shape[0] + 1, empty_index)
    total = counts.sum()
    if total == 0:
        raise InsufficientData("no objects in any scene")
    p = counts / total
    p = (p + smoothing) / (p + smoothing).sum()
    q = (ref + smoothing) / (ref + smoothing).sum()
    return float(np.sum(p * (np.log(p) - np.log(q))))


def obj_count(scenes: list[SceneLayout], empty_index: int) -> float:
    """Mean number of non-empty objects per scene."""
    if not scenes:
        raise InsufficientData("no scenes")
    return float(np.mean([len(s.non_empty(empty_index)) for s in scenes]))


def diversity_std(scenes: list[SceneLayout], empty_index: int,
                  floor_aware: bool = False,
                  dilation: float = OOB_DILATION) -> tuple[float, float]:
    """Population std of object placement, (position, size).

    Position spread is averaged over the two planar axes, size spread over
    all three. ``floor_aware`` restricts to objects whose footprint stays
    inside the dilated floor.

    Raises:
        InsufficientData: fewer than two qualifying objects.
    """
    pos = []
    size = []
    for scene in scenes:
        grown = scene.floor.dilated(dilation) if floor_aware else None
        for obj in scene.non_empty(empty_index):
            if grown is not None and any(not grown.contains(c) for c in obj.footprint()):
                continue
            pos.append(obj.pos[:2])
            size.append(obj.size)
    if len(pos) < 2:
        raise InsufficientData(f"need at least 2 qualifying objects, got {len(pos)}")
    pos_std = float(np.std(np.asarray(pos), axis=0).mean())
    size_std = float(np.std(np.asarray(size), axis=0).mean())
    return pos_std, size_std


@dataclass
class MetricsReport:
    n_scenes: int
    kl_labels: float
    obj_count: float
    oob_pct: float
    iou_pct: float
    pos_std: float
    size_std: float
    pos_std_ib: float
    size_std_ib: float

    def to_dict(self) -> dict:
        return asdict(self)

    def format_table(self) -> str:
        rows = [
            ("scenes", f"{self.n_scenes}"),
            ("label KL (x0.01 display)", f"{100.0 * self.kl_labels:.4f}"),
            ("label KL (raw)", f"{self.kl_labels:.6f}"),
            ("objects / scene", f"{self.obj_count:.3f}"),
            ("out of bounds %", f"{self.oob_pct:.3f}"),
            ("pairwise IoU %", f"{self.iou_pct:.4f}"),
            ("pos std / size std", f"{self.pos_std:.4f} / {self.size_std:.4f}"),
            ("pos std / size std (in-bounds)", f"{self.pos_std_ib:.4f} / {self.size_std_ib:.4f}"),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def evaluate_scenes(scenes: list[SceneLayout], ref_dist: np.ndarray,
                    empty_index: int) -> MetricsReport:
    """All metrics in one report; InsufficientData falls back to NaN spreads."""
    try:
        pos_std, size_std = diversity_std(scenes, empty_index, floor_aware=False)
    except InsufficientData:
        pos_std, size_std = float("nan"), float("nan")
    try:
        pos_ib, size_ib = diversity_std(scenes, empty_index, floor_aware=True)
    except InsufficientData:
        pos_ib, size_ib = float("nan"), float("nan")
    return MetricsReport(
        n_scenes=len(scenes),
        kl_labels=kl_labels(scenes, ref_dist, empty_index),
        obj_count=obj_count(scenes, empty_index),
        oob_pct=oob_pct(scenes, empty_index),
        iou_pct=iou_pct(scenes, empty_index),
        pos_std=pos_std,
        size_std=size_std,
        pos_std_ib=pos_ib,
        size_std_ib=size_ib,
    )
