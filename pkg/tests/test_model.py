"""Tests for domain types, map/scene files, label coarsening and the grid."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelnav.grid import SpatialGrid
from labelnav.model import (
    ConfigurationError,
    LabeledPoint,
    MapDatabase,
    MapFormatError,
    MatchParams,
    Rect,
    Scene,
    SceneTruth,
    UnmappedLabelError,
    coarsen_labels,
    dump_database,
    dump_scene,
    load_database,
    load_scene,
)


def _map_doc(objects, region=((0, 0), (250, 150))):
    doc = {"objects": objects}
    if region is not None:
        doc["region"] = {"min": list(region[0]), "max": list(region[1])}
    return json.dumps(doc)


def test_load_three_objects():
    db = load_database(_map_doc([
        {"id": "a", "label": "building", "x": 10, "y": 20},
        {"id": "b", "label": "park", "x": 100.5, "y": 30},
        {"id": "c", "label": "building", "x": 249, "y": 149},
    ]).encode())
    assert len(db) == 3
    assert db.region == Rect(0, 0, 250, 150)
    assert db.labels == ("building", "park", "building")


def test_load_empty_with_region():
    db = load_database(_map_doc([]))
    assert len(db) == 0
    assert db.region == Rect(0, 0, 250, 150)


def test_region_defaults_to_bounding_box():
    db = load_database(_map_doc([{"id": "a", "label": "x", "x": 1, "y": 2},
                                 {"id": "b", "label": "x", "x": 5, "y": -3}], region=None))
    assert db.region == Rect(1, -3, 5, 2)


@pytest.mark.parametrize("objects, fragment", [
    ([{"id": "a", "label": "x", "x": 260, "y": 10}], "objects[0]"),
    ([{"id": "a", "label": "x", "x": 1, "y": 1}, {"id": "a", "label": "x", "x": 2, "y": 2}],
     "duplicate id"),
    ([{"id": "a", "label": "x", "x": 1, "y": 1}, {"id": "b", "label": "", "x": 1, "y": 1}],
     "objects[1]"),
    ([{"id": "a", "label": "x", "x": "1", "y": 1}], "objects[0]"),
    ([{"id": "a", "label": "x", "y": 1}], "missing field 'x'"),
    ([{"id": 3, "label": "x", "x": 1, "y": 1}], "objects[0]"),
    (["nope"], "objects[0]"),
])
def test_load_database_errors_name_the_record(objects, fragment):
    with pytest.raises(MapFormatError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        load_database(_map_doc(objects))


@pytest.mark.parametrize("text", ["not json", "[]", '{"objects": 3}',
                                  '{"region": {"min": [0]}, "objects": []}',
                                  '{"region": {"min": [5, 5], "max": [0, 0]}, "objects": []}'])
def test_load_database_rejects_malformed_documents(text):
    with pytest.raises(MapFormatError):
        load_database(text)


def test_duplicate_positions_are_allowed():
    db = MapDatabase([LabeledPoint("a", "x", 1, 1), LabeledPoint("b", "x", 1, 1)], Rect(0, 0, 2, 2))
    assert len(db) == 2


point = st.tuples(st.floats(0, 250, allow_nan=False), st.floats(0, 150, allow_nan=False),
                  st.sampled_from(["a", "bb", "building", "ü"]))


@settings(max_examples=100)
@given(pts=st.lists(point, max_size=30))
def test_database_round_trip_is_exact(pts):
    db = MapDatabase([LabeledPoint(f"id{k}", lab, x, y) for k, (x, y, lab) in enumerate(pts)],
                     Rect(0, 0, 250, 150))
    back = load_database(dump_database(db))
    assert back == db
    assert np.array_equal(back.xs, db.xs) and np.array_equal(back.ys, db.ys)


def test_scene_round_trip_and_truth():
    scene = Scene((LabeledPoint("0", "obj", 1.25, 2.5), LabeledPoint("1", "car", 639.0, 479.5)),
                  640, 480)
    truth = SceneTruth(12.5, 30.0, 100.0)
    back, t = load_scene(dump_scene(scene, truth))
    assert [(o.label, o.x, o.y) for o in back.objects] == [(o.label, o.x, o.y) for o in scene.objects]
    assert (back.width_px, back.height_px) == (640, 480)
    assert t == truth
    _, none = load_scene(dump_scene(scene))
    assert none is None


@pytest.mark.parametrize("doc", [
    {"objects": []},
    {"image": {"w": 0, "h": 480}, "objects": []},
    {"image": {"w": 640, "h": 480}, "objects": [{"label": "a", "u": 700, "v": 1}]},
    {"image": {"w": 640, "h": 480}, "objects": [{"label": "a", "u": 1}]},
    {"image": {"w": 640, "h": 480}, "objects": [], "truth": {"x": 1}},
])
def test_load_scene_errors(doc):
    with pytest.raises(MapFormatError):
        load_scene(json.dumps(doc))


def test_scene_center_and_frame():
    scene = Scene((LabeledPoint("0", "a", 420.0, 140.0),), 640, 480)
    assert scene.center == (320.0, 240.0)
    x, y = scene.polar_frame()
    assert (x[0], y[0]) == (100.0, 100.0)  # v flipped: up in the image is +y


@pytest.mark.parametrize("kwargs", [
    {"n_min": 2}, {"delta_r": 0.0}, {"delta_theta": math.pi}, {"delta_theta": 0.0},
    {"top_k": 0}, {"selection_mode": "greedy"}, {"search_mode": "random"},
    {"max_hypotheses": 0}, {"region_margin_frac": -1}, {"prior_region": (0, 0, 1, 1)},
])
def test_match_params_validation(kwargs):
    with pytest.raises(ConfigurationError):
        MatchParams(**kwargs)


def _mixed_scene():
    return Scene((LabeledPoint("0", "building", 10, 10), LabeledPoint("1", "stadium", 20, 20),
                  LabeledPoint("2", "building", 30, 40)), 640, 480)


def test_coarsen_to_single_label():
    out = coarsen_labels(_mixed_scene(), {"building": "obj", "stadium": "obj"})
    assert {o.label for o in out.objects} == {"obj"}
    assert [(o.x, o.y) for o in out.objects] == [(o.x, o.y) for o in _mixed_scene().objects]


def test_coarsen_identity_map():
    scene = _mixed_scene()
    assert coarsen_labels(scene, {"building": "building", "stadium": "stadium"}) == scene
    assert coarsen_labels(scene, {}) == scene


def test_coarsen_strict_names_the_label():
    scene = Scene((LabeledPoint("0", "lake", 1, 1),), 640, 480)
    with pytest.raises(UnmappedLabelError, match="lake"):
        coarsen_labels(scene, {"building": "obj"}, strict=True)


def test_coarsen_database_keeps_region():
    db = MapDatabase([LabeledPoint("a", "park", 5, 5)], Rect(0, 0, 10, 10))
    out = coarsen_labels(db, {"park": "green"})
    assert out.labels == ("green",) and out.region == db.region


@given(labels=st.lists(st.sampled_from("abcdef"), min_size=1, max_size=10),
       targets=st.dictionaries(st.sampled_from("abcdef"), st.sampled_from("xyz")))
def test_coarsen_idempotent_when_closed(labels, targets):
    # A map that sends every image label to itself is closed under reapplication.
    label_map = dict(targets)
    for v in set(label_map.values()):
        label_map[v] = v
    scene = Scene(tuple(LabeledPoint(str(k), lab, k, k) for k, lab in enumerate(labels)), 640, 480)
    once = coarsen_labels(scene, label_map)
    assert coarsen_labels(once, label_map) == once


def test_grid_annulus_is_conservative():
    rng = np.random.default_rng(5)
    xs = rng.uniform(0, 250, 400)
    ys = rng.uniform(0, 150, 400)
    for cell in (3.0, 10.0, 37.0):
        grid = SpatialGrid(xs, ys, (0, 0, 250, 150), cell)
        for _ in range(1000 if cell == 10.0 else 200):
            c = (rng.uniform(-50, 300), rng.uniform(-50, 200))
            r0 = rng.uniform(0, 80)
            r1 = r0 + rng.uniform(0, 40)
            d = np.hypot(xs - c[0], ys - c[1])
            truth = set(np.flatnonzero((d >= r0) & (d <= r1)))
            assert truth <= set(grid.query_annulus(c, r0, r1).tolist())


def test_grid_box_query_is_conservative():
    rng = np.random.default_rng(6)
    xs = rng.uniform(0, 250, 300)
    ys = rng.uniform(0, 150, 300)
    grid = SpatialGrid(xs, ys, (0, 0, 250, 150))
    for _ in range(500):
        x0, y0 = rng.uniform(-20, 260), rng.uniform(-20, 160)
        x1, y1 = x0 + rng.uniform(0, 60), y0 + rng.uniform(0, 60)
        truth = set(np.flatnonzero((xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)))
        assert truth <= set(grid.query_box(x0, y0, x1, y1).tolist())


def test_grid_rejects_bad_cell_size():
    with pytest.raises(ValueError):
        SpatialGrid([0.0], [0.0], (0, 0, 1, 1), 0.0)
