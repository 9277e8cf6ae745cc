"""Tests for the Monte Carlo harness, report files and the brute-force oracle."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from conftest import HEIGHT, WIDTH, nadir_fixture, world_to_pixel
from labelnav.harness import (
    REPORT_COLUMNS,
    EvalCase,
    OracleSizeError,
    TrialResult,
    brute_force_oracle,
    report_csv,
    report_json,
    run_case,
    summarize,
    trials_csv,
)
from labelnav.matcher import match
from labelnav.model import LabeledPoint, MapDatabase, MatchParams, Rect, Scene

SMALL = dict(region=Rect(0, 0, 120, 90), n_objects=60)


def small_instance(seed):
    """Random instance within the oracle limits; roughly a third are accepted."""
    rng = np.random.default_rng([99, seed])
    labels = ("a", "b")[: int(rng.integers(1, 3))]
    region = Rect(0, 0, 120, 90)
    pts = [LabeledPoint(f"o{k}", labels[int(rng.integers(len(labels)))],
                        float(rng.uniform(0, 120)), float(rng.uniform(0, 90)))
           for k in range(int(rng.integers(3, 13)))]
    db = MapDatabase(pts, region)
    center = (float(rng.uniform(20, 100)), float(rng.uniform(20, 70)))
    ppm = float(rng.uniform(3, 10))
    yaw = float(rng.uniform(-math.pi, math.pi))
    sigma = float(rng.choice([0.0, 0.0, 0.5, 2.0]))
    objs = []
    for o in pts:
        u, v = world_to_pixel(o.x, o.y, center, ppm, yaw=yaw)
        if sigma:
            u, v = u + rng.normal(0, sigma), v + rng.normal(0, sigma)
        if 0 <= u <= WIDTH and 0 <= v <= HEIGHT:
            objs.append((o.label, u, v))
    rng.shuffle(objs)
    objs = objs[: int(rng.integers(2, 9))]
    for _ in range(int(rng.integers(0, 3))):
        if len(objs) < 8:
            objs.append((labels[0], float(rng.uniform(0, WIDTH)), float(rng.uniform(0, HEIGHT))))
    scene = Scene(tuple(LabeledPoint(str(k), lab, u, v) for k, (lab, u, v) in enumerate(objs)),
                  WIDTH, HEIGHT)
    params = MatchParams(n_min=int(rng.integers(3, 7)),
                         selection_mode=str(rng.choice(["lexicographic", "faithful"])),
                         injective=bool(rng.random() < 0.2))
    return scene, db, params


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(40))
def test_oracle_agrees_with_matcher(seed):
    scene, db, params = small_instance(seed)
    ours, ref = match(scene, db, params), brute_force_oracle(scene, db, params)
    assert ours.status == ref.status
    if ours.accepted:
        assert math.dist(ours.position, ref.position) < 1e-6
        assert ours.n_matched == ref.n_matched


def test_oracle_finds_exact_fixture():
    scene, db = nadir_fixture(seed=4, n_scene=7, n_distractors=5)
    out = brute_force_oracle(scene, db)
    assert out.accepted and math.dist(out.position, (50.0, 40.0)) < 1e-6
    assert out.n_matched == 7


def test_oracle_two_objects_rejected():
    scene, db = nadir_fixture(seed=4, n_scene=2, n_distractors=5)
    assert not brute_force_oracle(scene, db).accepted
    assert not match(scene, db).accepted


def test_oracle_size_guard():
    scene, db = nadir_fixture(seed=4, n_scene=9, n_distractors=0)
    with pytest.raises(OracleSizeError):
        brute_force_oracle(scene, db)
    scene, db = nadir_fixture(seed=4, n_scene=5, n_distractors=8)
    with pytest.raises(OracleSizeError):
        brute_force_oracle(scene, db)


# ---------------------------------------------------------------------------
# Cases and reports
# ---------------------------------------------------------------------------

def test_case_validation():
    with pytest.raises(ValueError):
        EvalCase("x", n_trials=0)
    with pytest.raises(ValueError):
        EvalCase("x", sigma_px=-1)


def test_single_noiseless_trial():
    report = run_case(EvalCase("one", n_trials=1, inset=True, **SMALL))
    assert report.n_trials == 1 and report.n_accepted == 1 and report.n_false_positive == 0
    assert report.error_mean_m < 0.05
    assert report.error_std_m == 0.0


def test_report_is_independent_of_worker_count():
    case = EvalCase("det", sigma_att_deg=0.05, sigma_px=2.0, n_trials=6, inset=True, **SMALL)
    one, t1 = run_case(case, workers=1, return_trials=True)
    two, t2 = run_case(case, workers=3, return_trials=True)
    assert report_csv([one]) == report_csv([two])
    assert report_json([one]) == report_json([two])
    assert trials_csv("det", t1) == trials_csv("det", t2)


def test_trials_do_not_depend_on_batch_size():
    case = EvalCase("grow", sigma_px=1.0, n_trials=3, inset=True, **SMALL)
    _, few = run_case(case, return_trials=True)
    _, more = run_case(EvalCase("grow", sigma_px=1.0, n_trials=5, inset=True, **SMALL),
                       return_trials=True)
    assert more[:3] == few


def _trial(index, status, err, n_view=10):
    if status == "rejected":
        return TrialResult(index, 0.0, 0.0, status, None, None, None, n_view, 0, 5)
    return TrialResult(index, 0.0, 0.0, status, err, 0.0, abs(err), n_view, 7, 5)


def test_summarize_counts_and_statistics():
    case = EvalCase("s", fp_threshold_m=10.0)
    trials = [_trial(0, "accepted", 1.0), _trial(1, "accepted", -3.0), _trial(2, "rejected", 0),
              _trial(3, "accepted", 50.0)]
    r = summarize(case, trials)
    assert (r.n_trials, r.n_accepted, r.n_rejected, r.n_false_positive) == (4, 3, 1, 1)
    assert r.n_rejected + r.n_accepted == r.n_trials
    assert r.rejection_rate == 0.25 and r.false_positive_rate == pytest.approx(1 / 3)
    # Population standard deviation of the distances 1 and 3.
    assert r.error_std_m == pytest.approx(1.0)
    assert r.error_std_all_m == pytest.approx(float(np.std([1.0, 3.0, 50.0])))
    assert r.error_std_x_m == pytest.approx(2.0)
    assert r.error_rms_x_m == pytest.approx(math.sqrt(5.0))


def test_all_rejected_reports_not_available():
    case = EvalCase("r")
    r = summarize(case, [_trial(0, "rejected", 0), _trial(1, "rejected", 0)])
    assert r.error_std_m is None and r.false_positive_rate is None
    row = next(csv.DictReader(io.StringIO(report_csv([r]))))
    assert row["error_std_m"] == "NA" and row["rejection_rate"] == "1.0"
    assert json.loads(report_json([r]))["cases"][0]["error_std_m"] is None


def test_report_columns_exclude_wall_time():
    assert "wall_time_s" not in REPORT_COLUMNS
    header = report_csv([]).strip().split(",")
    assert header == list(REPORT_COLUMNS)
    assert json.loads(report_json([]))["schema"] == "labelnav.report/1"
