"""Shared fixture builders for the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from labelnav.model import LabeledPoint, MapDatabase, Rect, Scene

REGION = Rect(0.0, 0.0, 250.0, 150.0)
WIDTH, HEIGHT = 640, 480


def world_to_pixel(x, y, center, px_per_m, width=WIDTH, height=HEIGHT, yaw=0.0):
    """Nadir mapping from meters to pixels (v points south), optional yaw."""
    dx, dy = x - center[0], y - center[1]
    c, s = math.cos(yaw), math.sin(yaw)
    ex, ey = c * dx + s * dy, -s * dx + c * dy
    return width / 2.0 + px_per_m * ex, height / 2.0 - px_per_m * ey


def pixel_to_world(u, v, center, px_per_m, width=WIDTH, height=HEIGHT, yaw=0.0):
    ex, ey = (u - width / 2.0) / px_per_m, (height / 2.0 - v) / px_per_m
    c, s = math.cos(yaw), math.sin(yaw)
    return center[0] + c * ex - s * ey, center[1] + s * ex + c * ey


def nadir_fixture(seed, n_scene=8, n_distractors=50, center=(50.0, 40.0), px_per_m=10.0,
                  region=REGION, labels=("obj",), max_radius_px=200.0, yaw=0.0):
    """Scene of ``n_scene`` objects that are exact images of map objects.

    Scene objects lie inside a disc of ``max_radius_px`` about the image
    center, so rotations and moderate scalings keep them in the image.
    Distractors are uniform over the region.

    Returns:
        (scene, db) with the true fix at ``center``.
    """
    rng = np.random.default_rng(seed)
    scene_objs, db_objs = [], []
    while len(scene_objs) < n_scene:
        rad = max_radius_px * math.sqrt(rng.uniform(0.01, 1.0))
        ang = rng.uniform(-math.pi, math.pi)
        u, v = WIDTH / 2.0 + rad * math.cos(ang), HEIGHT / 2.0 + rad * math.sin(ang)
        x, y = pixel_to_world(u, v, center, px_per_m, yaw=yaw)
        if not region.contains(x, y):
            continue
        lab = labels[int(rng.integers(len(labels)))]
        k = len(scene_objs)
        scene_objs.append(LabeledPoint(str(k), lab, u, v))
        db_objs.append(LabeledPoint(f"t{k}", lab, x, y))
    for k in range(n_distractors):
        lab = labels[int(rng.integers(len(labels)))]
        db_objs.append(LabeledPoint(f"d{k}", lab, float(rng.uniform(region.xmin, region.xmax)),
                                    float(rng.uniform(region.ymin, region.ymax))))
    order = rng.permutation(len(db_objs))
    db = MapDatabase([db_objs[k] for k in order], region)
    return Scene(tuple(scene_objs), WIDTH, HEIGHT), db


def rotate_scene(scene: Scene, phi: float) -> Scene:
    cu, cv = scene.center
    c, s = math.cos(phi), math.sin(phi)
    objs = []
    for o in scene.objects:
        du, dv = o.x - cu, o.y - cv
        objs.append(LabeledPoint(o.id, o.label, cu + c * du - s * dv, cv + s * du + c * dv))
    return Scene(tuple(objs), scene.width_px, scene.height_px)


def scale_scene(scene: Scene, lam: float) -> Scene:
    cu, cv = scene.center
    objs = [LabeledPoint(o.id, o.label, cu + lam * (o.x - cu), cv + lam * (o.y - cv))
            for o in scene.objects]
    return Scene(tuple(objs), scene.width_px, scene.height_px)


@pytest.fixture
def fixture_50_40():
    """Eight exact objects about (50, 40) at 10 px/m plus 50 distractors."""
    return nadir_fixture(seed=11)


# ---------------------------------------------------------------------------
# Acceptance criterion lines, printed once at the end of the session
# ---------------------------------------------------------------------------

CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record ``criterion(name, ok, detail)`` as one pass/fail summary line."""

    def record(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
