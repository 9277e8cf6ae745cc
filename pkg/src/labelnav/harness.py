"""Monte Carlo evaluation and the brute-force reference matcher.

A case fixes the database synthesis, camera, noise levels and matcher
parameters.  Each trial draws a pose, renders a scene, runs :func:`match`
and compares the fix with the true horizontal position.  Trial seeds are
derived from ``(noise_seed, trial_index)`` alone, so a trial never depends
on how many other trials run or on which worker runs it.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .camera import CameraModel, NoiseModel, project_scene, sample_pose, synth_database
from .geometry import EPS_DEN, EPS_R_FRACTION, wrap_angle
from .matcher import _ordered_candidates, match
from .model import (
    Candidate,
    Disc,
    MapDatabase,
    MatchOutcome,
    MatchParams,
    Rect,
    Scene,
    coarsen_labels,
)

__all__ = [
    "EvalCase",
    "EvalReport",
    "OracleSizeError",
    "TrialResult",
    "brute_force_oracle",
    "report_csv",
    "report_json",
    "run_case",
    "run_cases",
    "run_trial",
    "trials_csv",
]

#: Size limits of :func:`brute_force_oracle`.
ORACLE_MAX_SCENE = 8
ORACLE_MAX_DB = 12


class OracleSizeError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class EvalCase:
    """One row of a Monte Carlo experiment.

    Angles are in degrees here (converted at the camera boundary).  With
    ``inset`` the true positions are drawn so that the nadir footprint stays
    inside the database region; otherwise they are uniform over the region.
    """

    name: str
    sigma_att_deg: float = 0.0
    sigma_px: float = 0.0
    hfov_deg: float = 35.0
    n_trials: int = 500
    alt_m: float = 100.0
    params: MatchParams = field(default_factory=MatchParams)
    db_seed: int = 7
    noise_seed: int = 0
    region: Rect = Rect(0.0, 0.0, 250.0, 150.0)
    n_objects: int = 215
    labels: Mapping[str, float] | Sequence[str] | str = "obj"
    width_px: int = 640
    height_px: int = 480
    inset: bool = False
    fp_threshold_m: float = 10.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("case name must be non-empty")
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise ValueError(f"n_trials must be an integer >= 1, got {self.n_trials}")
        if self.sigma_att_deg < 0 or self.sigma_px < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if not self.alt_m > 0:
            raise ValueError("alt_m must be positive")
        if not self.fp_threshold_m > 0:
            raise ValueError("fp_threshold_m must be positive")

    @property
    def camera(self) -> CameraModel:
        return CameraModel.from_degrees(self.hfov_deg, self.width_px, self.height_px)

    def database(self) -> MapDatabase:
        return synth_database(self.region, self.n_objects, self.labels, seed=self.db_seed)


@dataclass(frozen=True)
class TrialResult:
    index: int
    true_x: float
    true_y: float
    status: str
    est_x: float | None
    est_y: float | None
    error_m: float | None
    n_in_view: int
    n_matched: int
    hypotheses_evaluated: int


@dataclass(frozen=True)
class EvalReport:
    """Aggregates of one case.  Error statistics are ``None`` when empty.

    ``error_std_m`` excludes false positives, ``error_std_all_m`` covers every
    accepted trial.  Axis-wise columns use the signed per-axis errors of the
    non-false-positive trials.  ``wall_time_s`` is informational and is kept
    out of the reproducible report files.
    """

    name: str
    n_trials: int
    n_rejected: int
    n_accepted: int
    n_false_positive: int
    rejection_rate: float
    false_positive_rate: float | None
    error_std_m: float | None
    error_std_all_m: float | None
    error_mean_m: float | None
    error_std_x_m: float | None
    error_std_y_m: float | None
    error_rms_x_m: float | None
    error_rms_y_m: float | None
    mean_in_view: float
    mean_hypotheses_evaluated: float
    wall_time_s: float = field(default=0.0, compare=False)


REPORT_COLUMNS = tuple(f.name for f in fields(EvalReport) if f.name != "wall_time_s")
TRIAL_COLUMNS = tuple(f.name for f in fields(TrialResult))


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

def _trial_seeds(case: EvalCase, index: int) -> tuple[list[int], list[int]]:
    # Independent streams for pose and pixel noise, both keyed by the trial.
    return [case.noise_seed, index, 0], [case.noise_seed, index, 1]


def run_trial(case: EvalCase, db: MapDatabase, index: int) -> TrialResult:
    cam = case.camera
    pose_seed, px_seed = _trial_seeds(case, index)
    pose = sample_pose(np.random.default_rng(pose_seed), case.region, case.alt_m,
                       math.radians(case.sigma_att_deg), cam, inset=case.inset)
    scene = project_scene(db, pose, cam, NoiseModel(sigma_px=case.sigma_px, seed=px_seed))
    outcome = match(scene, db, case.params)
    evaluated = outcome.stats.evaluated if outcome.stats is not None else 0
    if outcome.accepted:
        ex, ey = outcome.position
        err = math.hypot(ex - pose.x, ey - pose.y)
        return TrialResult(index, pose.x, pose.y, "accepted", ex, ey, err,
                           len(scene), outcome.n_matched, evaluated)
    return TrialResult(index, pose.x, pose.y, "rejected", None, None, None,
                       len(scene), 0, evaluated)


def _run_chunk(case: EvalCase, indices: Sequence[int]) -> list[TrialResult]:
    db = case.database()
    return [run_trial(case, db, k) for k in indices]


def _std(values) -> float | None:
    return float(np.std(values)) if len(values) else None


def _rms(values) -> float | None:
    return float(np.sqrt(np.mean(np.square(values)))) if len(values) else None


def summarize(case: EvalCase, trials: Iterable[TrialResult],
              wall_time_s: float = 0.0) -> EvalReport:
    """Aggregate trial results (in trial-index order) into a report row."""
    trials = sorted(trials, key=lambda t: t.index)
    acc = [t for t in trials if t.status == "accepted"]
    good = [t for t in acc if t.error_m <= case.fp_threshold_m]
    n_fp = len(acc) - len(good)
    err_good = [t.error_m for t in good]
    dx = [t.est_x - t.true_x for t in good]
    dy = [t.est_y - t.true_y for t in good]
    n = len(trials)
    return EvalReport(
        name=case.name,
        n_trials=n,
        n_rejected=n - len(acc),
        n_accepted=len(acc),
        n_false_positive=n_fp,
        rejection_rate=(n - len(acc)) / n if n else 0.0,
        false_positive_rate=n_fp / len(acc) if acc else None,
        error_std_m=_std(err_good),
        error_std_all_m=_std([t.error_m for t in acc]),
        error_mean_m=float(np.mean(err_good)) if err_good else None,
        error_std_x_m=_std(dx),
        error_std_y_m=_std(dy),
        error_rms_x_m=_rms(dx),
        error_rms_y_m=_rms(dy),
        mean_in_view=float(np.mean([t.n_in_view for t in trials])) if trials else 0.0,
        mean_hypotheses_evaluated=(float(np.mean([t.hypotheses_evaluated for t in trials]))
                                   if trials else 0.0),
        wall_time_s=wall_time_s,
    )


def run_case(case: EvalCase, workers: int = 1,
             return_trials: bool = False) -> EvalReport | tuple[EvalReport, list[TrialResult]]:
    """Run every trial of ``case`` and aggregate.

    Args:
        case: The experiment definition.
        workers: Worker processes; 1 runs in-process.  The report does not
            depend on this value.
        return_trials: Also return the per-trial results, sorted by index.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    t0 = time.perf_counter()
    indices = list(range(case.n_trials))
    if workers == 1:
        trials = _run_chunk(case, indices)
    else:
        # Interleaved chunks balance cheap and expensive trials.
        chunks = [indices[w::workers] for w in range(workers) if indices[w::workers]]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_run_chunk, [case] * len(chunks), chunks))
        trials = [t for part in parts for t in part]
    trials.sort(key=lambda t: t.index)
    report = summarize(case, trials, time.perf_counter() - t0)
    return (report, trials) if return_trials else report


def run_cases(cases: Sequence[EvalCase], workers: int = 1) -> list[EvalReport]:
    return [run_case(c, workers) for c in cases]


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(reports: Sequence[EvalReport]) -> str:
    """One row per case; ``NA`` marks statistics with no data."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([_cell(getattr(r, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def report_json(reports: Sequence[EvalReport]) -> str:
    rows = [{c: getattr(r, c) for c in REPORT_COLUMNS} for r in reports]
    return json.dumps({"schema": "labelnav.report/1", "cases": rows}, indent=2) + "\n"


def trials_csv(case_name: str, trials: Sequence[TrialResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("case",) + TRIAL_COLUMNS)
    for t in sorted(trials, key=lambda t: t.index):
        w.writerow([case_name] + [_cell(v) for v in asdict(t).values()])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Brute-force reference
# ---------------------------------------------------------------------------

def brute_force_oracle(scene: Scene, db: MapDatabase,
                       params: MatchParams | None = None) -> MatchOutcome:
    """Exhaustive matcher on tiny instances, built on complex similarity maps.

    Each correspondence ``(i, j) -> (I, J)`` defines the map ``z -> a z + b``
    from centered, v-flipped pixel coordinates to map coordinates that sends
    image object i to I and j to J.  The fix is ``b`` (the image center's
    image) and every other object is tested with the same radius-ratio and
    bearing tolerances as the matcher.  No grid, no polar solve, no pruning
    beyond the region/prior validity filters.

    Raises:
        OracleSizeError: More than 8 scene or 12 database objects.
    """
    params = params or MatchParams()
    if len(scene) > ORACLE_MAX_SCENE or len(db) > ORACLE_MAX_DB:
        raise OracleSizeError(
            f"oracle limited to {ORACLE_MAX_SCENE} scene / {ORACLE_MAX_DB} map objects")
    if params.label_map:
        scene = coarsen_labels(scene, params.label_map)
        db = coarsen_labels(db, params.label_map)
    px, py = scene.polar_frame()
    z = [complex(x, y) for x, y in zip(px, py)]
    w_db = [complex(o.x, o.y) for o in db.objects]
    lab_img = [o.label for o in scene.objects]
    lab_db = [o.label for o in db.objects]
    eps_r = EPS_R_FRACTION * scene.diagonal
    foot_px = max(scene.width_px, scene.height_px)
    reg = db.region
    faithful = params.selection_mode == "faithful"
    collect = params.top_k > 1
    n, m = len(z), len(w_db)

    best = None  # (n_matched, score, idx, origin, scale)
    qualified = []
    for i in range(n):
        for j in range(i + 1, n):
            if abs(z[i]) <= eps_r or abs(z[j]) <= eps_r:
                continue
            if abs(z[j] - z[i]) ** 2 < EPS_DEN * abs(z[i]) ** 2:
                continue
            for big_i in range(m):
                if lab_db[big_i] != lab_img[i]:
                    continue
                for big_j in range(m):
                    if big_j == big_i or lab_db[big_j] != lab_img[j]:
                        continue
                    a = (w_db[big_j] - w_db[big_i]) / (z[j] - z[i])
                    if a == 0:
                        continue
                    b = w_db[big_i] - a * z[i]
                    scale = abs(a)
                    margin = params.region_margin_frac * scale * foot_px
                    if not (reg.xmin - margin <= b.real <= reg.xmax + margin
                            and reg.ymin - margin <= b.imag <= reg.ymax + margin):
                        continue
                    if not _in_prior(params.prior_region, b):
                        continue
                    resid = _consensus(z, w_db, lab_img, lab_db, i, j, big_i, big_j, b,
                                       scale * abs(z[i]), eps_r, params)
                    n_matched = 2 + len(resid)
                    if n_matched < params.n_min:
                        continue
                    score = float(np.std(resid)) if resid else 0.0
                    rec = (n_matched, score, (i, j, big_i, big_j), (b.real, b.imag), scale)
                    qualified.append(rec)
                    if best is None:
                        better = True
                    elif faithful:
                        better = n_matched >= best[0] and score < best[1]
                    else:
                        better = n_matched > best[0] or (n_matched == best[0] and score < best[1])
                    if better:
                        best = rec
    if best is None:
        return MatchOutcome("rejected")
    if collect:
        q_idx = np.array([r[2] for r in qualified], dtype=np.int64)
        q_n = np.array([r[0] for r in qualified], dtype=np.int64)
        q_f = np.array([(r[3][0], r[3][1], r[1], 0.0, r[4]) for r in qualified])
        candidates = tuple(_ordered_candidates(params, np.array(best[2]), q_idx, q_n, q_f))
    else:
        candidates = (Candidate(best[3], best[0], best[1], best[4]),)
    return MatchOutcome("accepted", position=best[3], n_matched=best[0], score=best[1],
                        candidates=candidates, scale=best[4])


def _in_prior(prior, b: complex) -> bool:
    if prior is None:
        return True
    if isinstance(prior, Rect):
        return prior.xmin <= b.real <= prior.xmax and prior.ymin <= b.imag <= prior.ymax
    if isinstance(prior, Disc):
        return math.hypot(b.real - prior.cx, b.imag - prior.cy) <= prior.radius
    raise TypeError(f"unsupported prior region {prior!r}")


def _consensus(z, w_db, lab_img, lab_db, i, j, big_i, big_j, b, r_anchor, eps_r,
               params: MatchParams) -> list[float]:
    """Residuals of the voters (one per image object, minimum over the map)."""
    arg_i = math.atan2((w_db[big_i] - b).imag, (w_db[big_i] - b).real)
    cands = []
    resid = []
    for k in range(len(z)):
        if k in (i, j):
            continue
        ratio = abs(z[k]) / abs(z[i])
        dt_img = wrap_angle(math.atan2(z[i].imag, z[i].real) - math.atan2(z[k].imag, z[k].real))
        best = math.inf
        for kk in range(len(w_db)):
            if kk in (big_i, big_j) or lab_db[kk] != lab_img[k]:
                continue
            rel = w_db[kk] - b
            er = abs(ratio - abs(rel) / r_anchor)
            if not er < params.delta_r:
                continue
            if abs(z[k]) <= eps_r:
                ea = 0.0
            else:
                ea = abs(wrap_angle(dt_img - wrap_angle(arg_i - math.atan2(rel.imag, rel.real))))
                if not ea < params.delta_theta:
                    continue
            cands.append((er + ea, k, kk))
            best = min(best, er + ea)
        if best < math.inf and not params.injective:
            resid.append(best)
    if params.injective:
        used_k, used_d = set(), set()
        for e, k, kk in sorted(cands, key=lambda c: c[0]):
            if k in used_k or kk in used_d:
                continue
            used_k.add(k)
            used_d.add(kk)
            resid.append(e)
    return resid
