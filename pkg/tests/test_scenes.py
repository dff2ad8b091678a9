"""Scene data model: vocab, objects, normalization, encode/decode, JSON."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixdiff.errors import InvalidInput, InvalidObject, UnknownLabel
from mixdiff.scenes import (
    GEOM_DIM, FloorPlan, LabelVocab, NormStats, SceneLayout, canonicalize,
    decode_object, decode_scene, degenerate_angle_count, empty_object,
    encode_object, encode_scene, make_object, raw_geometry,
    reset_degenerate_angle_count, scene_from_dict, scene_to_dict,
)

VOCAB = LabelVocab(["table", "chair", "empty"])
SQUARE = FloorPlan(np.array([[-2.0, -2.0], [2.0, -2.0], [2.0, 2.0], [-2.0, 2.0]]))


class TestLabelVocab:
    def test_round_trip_and_indices(self):
        assert VOCAB.n_labels == 3
        assert VOCAB.empty_index == 2
        assert VOCAB.index("chair") == 1
        assert VOCAB.name(0) == "table"

    def test_last_entry_must_be_empty(self):
        with pytest.raises(InvalidInput):
            LabelVocab(["empty", "table"])
        with pytest.raises(InvalidInput):
            LabelVocab(["table", "table", "empty"])
        with pytest.raises(InvalidInput):
            LabelVocab(["empty"])

    def test_unknown_label_raises(self):
        with pytest.raises(UnknownLabel):
            VOCAB.index("sofa")
        with pytest.raises(UnknownLabel):
            VOCAB.name(3)

    def test_equality(self):
        assert VOCAB == LabelVocab(["table", "chair", "empty"])
        assert VOCAB != LabelVocab(["chair", "table", "empty"])


class TestObjectInstance:
    def test_empty_slot_must_be_all_zero(self):
        empty_object(2)  # fine
        with pytest.raises(InvalidObject):
            make_object(2, (1.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0, empty_index=2)

    def test_real_object_needs_positive_size(self):
        with pytest.raises(InvalidObject):
            make_object(0, (0, 0, 0), (1.0, 0.0, 1.0), 0.0, empty_index=2)

    def test_heading_must_be_unit(self):
        from mixdiff.scenes import ObjectInstance
        with pytest.raises(InvalidObject):
            ObjectInstance(label=0, pos=np.zeros(3), size=np.ones(3),
                           angle=np.array([1.0, 1.0]), empty_index=2)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidObject):
            make_object(0, (np.nan, 0, 0), (1, 1, 1), 0.0, empty_index=2)

    def test_yaw_round_trip(self):
        for yaw in (-3.0, -math.pi / 2, 0.0, 0.7, math.pi / 2):
            obj = make_object(0, (0, 0, 0), (1, 1, 1), yaw, empty_index=2)
            assert obj.yaw == pytest.approx(yaw, abs=1e-12)

    def test_footprint_axis_aligned(self):
        obj = make_object(0, (1.0, 2.0, 0.5), (0.5, 0.25, 0.5), 0.0, empty_index=2)
        corners = obj.footprint()
        expect = {(1.5, 2.25), (0.5, 2.25), (0.5, 1.75), (1.5, 1.75)}
        assert {(round(x, 9), round(y, 9)) for x, y in corners} == expect

    def test_footprint_rotated_quarter_turn(self):
        obj = make_object(0, (0.0, 0.0, 0.5), (1.0, 0.5, 0.5), math.pi / 2, empty_index=2)
        corners = obj.footprint()
        # sx lies along world y now, sy along world x
        assert corners[:, 0].max() == pytest.approx(0.5)
        assert corners[:, 1].max() == pytest.approx(1.0)


class TestNormStats:
    def test_from_objects_uses_abs_max_per_coordinate(self):
        objs = [
            make_object(0, (2.0, -4.0, 0.5), (1.0, 2.0, 0.5), 0.0, empty_index=2),
            make_object(1, (-1.0, 1.0, 1.5), (0.5, 0.25, 0.75), math.pi, empty_index=2),
        ]
        stats = NormStats.from_objects(objs)
        assert np.array_equal(stats.offset, np.zeros(GEOM_DIM))
        raws = np.stack([raw_geometry(o) for o in objs])
        assert np.array_equal(stats.scale, np.maximum(np.abs(raws).max(axis=0), 1e-3))

    def test_scale_floor_applies(self):
        objs = [make_object(0, (0.0, 0.0, 1e-9), (1e-9, 1e-9, 1e-9), 0.0)]
        stats = NormStats.from_objects(objs)
        assert (stats.scale >= 1e-3).all()

    def test_no_objects_gives_identity(self):
        stats = NormStats.from_objects([])
        assert np.array_equal(stats.scale, np.ones(GEOM_DIM))

    def test_dict_round_trip(self):
        stats = NormStats(offset=np.zeros(GEOM_DIM), scale=np.arange(1.0, 9.0))
        back = NormStats.from_dict(stats.to_dict())
        assert np.array_equal(back.scale, stats.scale)

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(InvalidInput):
            NormStats(offset=np.zeros(GEOM_DIM), scale=np.zeros(GEOM_DIM))


class TestEncodeDecode:
    def test_encode_normalizes_to_unit_box(self):
        objs = [make_object(0, (4.0, -2.0, 1.0), (1.0, 0.5, 1.0), 0.3, empty_index=2)]
        stats = NormStats.from_objects(objs)
        vec = encode_object(objs[0], stats)
        assert np.abs(vec).max() == pytest.approx(1.0)

    def test_empty_slot_encodes_to_zero(self):
        stats = NormStats(offset=np.zeros(GEOM_DIM), scale=np.full(GEOM_DIM, 3.0))
        assert np.array_equal(encode_object(empty_object(2), stats), np.zeros(GEOM_DIM))

    @given(
        pos=st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        size=st.lists(st.floats(0.01, 5), min_size=3, max_size=3),
        yaw=st.floats(-math.pi, math.pi),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_recovers_object(self, pos, size, yaw):
        obj = make_object(0, pos, size, yaw, empty_index=2)
        stats = NormStats(offset=np.zeros(GEOM_DIM), scale=np.full(GEOM_DIM, 4.0))
        back = decode_object(0, encode_object(obj, stats), stats, empty_index=2)
        assert np.allclose(back.pos, obj.pos, atol=1e-9)
        assert np.allclose(back.size, obj.size, atol=1e-9)
        assert np.allclose(back.angle, obj.angle, atol=1e-9)

    def test_decode_repairs_degenerate_angle(self):
        reset_degenerate_angle_count()
        stats = NormStats.identity()
        vec = np.zeros(GEOM_DIM)
        vec[3:6] = 0.5           # positive size, zero heading
        obj = decode_object(0, vec, stats, empty_index=2)
        assert np.array_equal(obj.angle, [1.0, 0.0])
        assert degenerate_angle_count() == 1
        reset_degenerate_angle_count()
        assert degenerate_angle_count() == 0

    def test_decode_floors_size(self):
        stats = NormStats.identity()
        vec = np.zeros(GEOM_DIM)
        vec[3:6] = -2.0
        vec[6] = 1.0
        obj = decode_object(0, vec, stats, empty_index=2)
        assert (obj.size > 0).all()

    def test_decode_empty_ignores_vector(self):
        stats = NormStats.identity()
        obj = decode_object(2, np.full(GEOM_DIM, 7.0), stats, empty_index=2)
        assert not obj.pos.any() and not obj.size.any() and not obj.angle.any()

    def test_scene_encode_shapes_and_round_trip(self):
        objs = [
            make_object(0, (0.5, 0.5, 0.4), (0.8, 0.6, 0.4), 0.0, empty_index=2),
            make_object(1, (-1.0, 0.0, 0.45), (0.2, 0.25, 0.45), 1.2, empty_index=2),
            empty_object(2),
        ]
        scene = SceneLayout(room_type="toy_dining", floor=SQUARE, objects=objs)
        stats = NormStats.from_objects(objs)
        labels, geoms = encode_scene(scene, stats)
        assert labels.shape == (3,) and labels.dtype == np.int64
        assert geoms.shape == (3, GEOM_DIM)
        back = decode_scene(labels, geoms, SQUARE, stats, empty_index=2,
                            room_type="toy_dining")
        for a, b in zip(back.objects, objs):
            assert a.label == b.label
            assert np.allclose(raw_geometry(a), raw_geometry(b), atol=1e-9)


class TestCanonicalize:
    def _scene(self, labels):
        objs = [empty_object(2) if l == 2 else
                make_object(l, (l, 0, 0.5), (0.5, 0.5, 0.5), 0.0, empty_index=2)
                for l in labels]
        return SceneLayout(room_type="t", floor=SQUARE, objects=objs)

    def test_stable_partition(self):
        scene = canonicalize(self._scene([2, 0, 2, 1]), empty_index=2)
        assert [o.label for o in scene.objects] == [0, 1, 2, 2]

    def test_idempotent(self):
        once = canonicalize(self._scene([2, 1, 0, 2]), empty_index=2)
        twice = canonicalize(once, empty_index=2)
        assert [o.label for o in once.objects] == [o.label for o in twice.objects]

    def test_preserves_slot_count(self):
        scene = canonicalize(self._scene([2, 2, 2]), empty_index=2)
        assert scene.n_slots == 3


class TestSceneDict:
    def _scene(self):
        objs = [
            make_object(1, (0.5, -0.25, 0.4), (0.2, 0.25, 0.4), 0.77, empty_index=2),
            empty_object(2),
        ]
        return SceneLayout(room_type="toy_dining", floor=SQUARE, objects=objs)

    def test_round_trip(self):
        d = scene_to_dict(self._scene(), VOCAB)
        assert len(d["objects"]) == 1          # empty slots omitted
        back = scene_from_dict(d, VOCAB, n_slots=2)
        assert back.n_slots == 2
        assert back.objects[0].label == 1
        assert back.objects[0].yaw == pytest.approx(0.77)
        assert back.objects[1].label == 2

    def test_unknown_label_raises(self):
        d = scene_to_dict(self._scene(), VOCAB)
        d["objects"][0]["label"] = "throne"
        with pytest.raises(UnknownLabel):
            scene_from_dict(d, VOCAB, n_slots=2)

    def test_too_many_objects_raises(self):
        d = scene_to_dict(self._scene(), VOCAB)
        d["objects"] = d["objects"] * 3
        with pytest.raises(InvalidInput):
            scene_from_dict(d, VOCAB, n_slots=2)

    def test_slot_count_inferred_when_omitted(self):
        d = scene_to_dict(self._scene(), VOCAB)
        back = scene_from_dict(d, VOCAB)
        assert back.n_slots == 1
