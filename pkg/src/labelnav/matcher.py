"""Consensus search over labeled point patterns.

A hypothesis pairs an unordered image pair ``(i, j)`` with an ordered
database pair ``(I, J)`` of the same labels.  The database point seen from
the image center is solved with :func:`labelnav.geometry.solve_origin`, and
every other image object votes if some database object of its label sits at
the same radius ratio and bearing offset (relative to the reference anchor)
within ``delta_r`` and ``delta_theta``.  Hypotheses with at least ``n_min``
matched objects (anchors included) are scored by the population standard
deviation of the voters' errors.

Selection modes:

* ``lexicographic`` (default): most matched objects, then lowest score, then
  earliest hypothesis in enumeration order.
* ``faithful``: the sequential rule "replace the best if matched >= best
  matched and score < best score" applied in enumeration order.

The heavy lifting happens in :mod:`labelnav._kernel`.  Pruning there never
changes the result: origins outside the database region (grown by a margin
proportional to the hypothesis footprint) are invalid fixes, and a
hypothesis is abandoned only once it can no longer reach the match count it
would need to be selected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .geometry import EPS_DEN, EPS_R_FRACTION, solve_origin, wrap_angle
from .model import (
    Candidate,
    ConfigurationError,
    Disc,
    MapDatabase,
    MatchOutcome,
    MatchParams,
    Rect,
    Scene,
    _intersects,
    coarsen_labels,
)

__all__ = [
    "Hypothesis",
    "MissingScaleError",
    "SearchStats",
    "estimate_height",
    "evaluate_hypothesis",
    "match",
    "match_with_prior",
    "rank_candidates",
]


class MissingScaleError(ValueError):
    """Height requested from an outcome that carries no scale."""


@dataclass(frozen=True)
class Hypothesis:
    anchor_image: tuple[int, int]
    anchor_db: tuple[int, int]
    origin: tuple[float, float]
    r_i: float
    residuals: tuple[float, ...]
    matches: tuple[tuple[int, int], ...]
    n_matched: int
    scale: float

    @property
    def score(self) -> float:
        return float(np.std(self.residuals)) if self.residuals else 0.0


@dataclass(frozen=True)
class SearchStats:
    generated: int
    degenerate: int
    pruned_region: int
    pruned_prior: int
    evaluated: int
    early_exit: int
    qualified: int
    best_updates: int
    pruned_score: int

    @classmethod
    def from_array(cls, a) -> "SearchStats":
        return cls(*(int(v) for v in a))


@dataclass
class _Prepared:
    scene: Scene
    db: MapDatabase
    px: np.ndarray
    py: np.ndarray
    pr: np.ndarray
    pt: np.ndarray
    plab: np.ndarray
    dblab: np.ndarray
    lab_start: np.ndarray
    lab_items: np.ndarray
    eps_r: float


def _prepare(scene: Scene, db: MapDatabase, params: MatchParams) -> _Prepared:
    if params.label_map:
        scene = coarsen_labels(scene, params.label_map)
        db = coarsen_labels(db, params.label_map)
    codes: dict[str, int] = {}
    for o in db.objects:
        codes.setdefault(o.label, len(codes))
    dblab = np.array([codes[o.label] for o in db.objects], dtype=np.int64)
    # Scene-only labels get codes with empty database lists.
    plab = np.array([codes.setdefault(o.label, len(codes)) for o in scene.objects],
                    dtype=np.int64)
    n_labels = len(codes)
    counts = np.bincount(dblab, minlength=n_labels) if len(dblab) else np.zeros(n_labels, int)
    lab_start = np.zeros(n_labels + 1, dtype=np.int64)
    np.cumsum(counts, out=lab_start[1:])
    lab_items = np.argsort(dblab, kind="stable").astype(np.int64)
    px, py = scene.polar_frame()
    pr = np.hypot(px, py)
    pt = np.arctan2(py, px)
    return _Prepared(scene, db, px, py, pr, pt, plab, dblab, lab_start, lab_items,
                     EPS_R_FRACTION * scene.diagonal)


def _sampled_hypotheses(prep: _Prepared, params: MatchParams) -> np.ndarray:
    n = len(prep.px)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)
             if prep.pr[i] > prep.eps_r and prep.pr[j] > prep.eps_r]
    if not pairs:
        return np.empty((0, 4), dtype=np.int64)
    pairs_arr = np.array(pairs, dtype=np.int64)
    rng = np.random.default_rng(params.seed)
    h = params.max_hypotheses
    pick = pairs_arr[rng.integers(len(pairs_arr), size=h)]
    li, lj = prep.plab[pick[:, 0]], prep.plab[pick[:, 1]]
    ci = prep.lab_start[li + 1] - prep.lab_start[li]
    cj = prep.lab_start[lj + 1] - prep.lab_start[lj]
    ui, uj = rng.random(h), rng.random(h)
    ok = (ci > 0) & (cj > 0)
    big_i = np.full(h, -1, dtype=np.int64)
    big_j = np.full(h, -1, dtype=np.int64)
    big_i[ok] = prep.lab_items[prep.lab_start[li[ok]] + (ui[ok] * ci[ok]).astype(np.int64)]
    big_j[ok] = prep.lab_items[prep.lab_start[lj[ok]] + (uj[ok] * cj[ok]).astype(np.int64)]
    ok &= big_i != big_j
    rows = np.column_stack([pick[ok], big_i[ok], big_j[ok]])
    if len(rows) == 0:
        return np.empty((0, 4), dtype=np.int64)
    # Enumeration order of the exhaustive search, duplicates dropped.
    rows = np.unique(rows, axis=0)
    return np.ascontiguousarray(rows, dtype=np.int64)


def _seed_rows(prep: _Prepared, n_pairs: int = 1) -> np.ndarray:
    """All database pairs for the image pairs with the best-conditioned geometry."""
    n = len(prep.pr)
    weighted = []
    for i in range(n):
        for j in range(i + 1, n):
            if prep.pr[i] <= prep.eps_r or prep.pr[j] <= prep.eps_r:
                continue
            d = math.hypot(prep.px[i] - prep.px[j], prep.py[i] - prep.py[j])
            weighted.append((-min(prep.pr[i], prep.pr[j]) * d, i, j))
    weighted.sort()
    blocks = []
    for _, i, j in weighted[:n_pairs]:
        li, lj = prep.plab[i], prep.plab[j]
        big_i = prep.lab_items[prep.lab_start[li]:prep.lab_start[li + 1]]
        big_j = prep.lab_items[prep.lab_start[lj]:prep.lab_start[lj + 1]]
        gi, gj = np.meshgrid(big_i, big_j, indexing="ij")
        keep = gi != gj
        m = int(keep.sum())
        blocks.append(np.column_stack([np.full(m, i), np.full(m, j), gi[keep], gj[keep]]))
    if not blocks:
        return np.empty((0, 4), dtype=np.int64)
    return np.ascontiguousarray(np.concatenate(blocks), dtype=np.int64)


def _run(prep: _Prepared, params: MatchParams, collect: bool):
    db = prep.db
    grid = db.index
    reg = np.array(db.region.bounds, dtype=np.float64)
    prior = np.zeros(4, dtype=np.float64)
    prior_kind = _kernel.PRIOR_NONE
    if isinstance(params.prior_region, Rect):
        prior_kind = _kernel.PRIOR_RECT
        prior[:] = params.prior_region.bounds
    elif isinstance(params.prior_region, Disc):
        prior_kind = _kernel.PRIOR_DISC
        prior[:3] = (params.prior_region.cx, params.prior_region.cy, params.prior_region.radius)
    faithful = params.selection_mode == "faithful"
    foot_px = float(max(prep.scene.width_px, prep.scene.height_px))

    def call(hyp, use_list, collect_, seed_n=0, seed_e=math.inf):
        return _kernel.search(
            prep.px, prep.py, prep.plab, prep.pr, prep.pt,
            db.xs, db.ys, prep.dblab, prep.lab_start, prep.lab_items,
            grid.x0, grid.y0, grid.x1, grid.y1, grid.cell_size, grid.nx, grid.ny,
            grid.cell_start, grid.cell_items,
            reg, float(params.region_margin_frac), foot_px, prior_kind, prior,
            int(params.n_min), float(params.delta_r), float(params.delta_theta),
            float(prep.eps_r), EPS_DEN,
            faithful, collect_, bool(params.injective),
            hyp, use_list, int(seed_n), float(seed_e),
        )

    if params.search_mode == "sampled":
        return call(_sampled_hypotheses(prep, params), True, collect)
    no_list = np.empty((0, 4), dtype=np.int64)
    if faithful or collect:
        return call(no_list, False, collect)
    # A quick pass over one well-conditioned anchor pair gives pruning
    # bounds; the seed hypothesis is itself part of the exhaustive set.
    seed = call(_seed_rows(prep), True, False)
    return call(no_list, False, False, seed[1], seed[2])


def evaluate_hypothesis(scene: Scene, db: MapDatabase, params: MatchParams,
                        anchor_image: tuple[int, int],
                        anchor_db: tuple[int, int]) -> Hypothesis | None:
    """Score one hypothesis in plain Python (no pruning, no grid).

    Applies the same predicates as the compiled search.  Returns ``None``
    when the origin cannot be solved.  The region and prior filters are not
    applied here.
    """
    if params.label_map:
        scene = coarsen_labels(scene, params.label_map)
        db = coarsen_labels(db, params.label_map)
    px, py = scene.polar_frame()
    eps_r = EPS_R_FRACTION * scene.diagonal
    i, j = anchor_image
    big_i, big_j = anchor_db
    r = np.hypot(px, py)
    t = np.arctan2(py, px)
    if r[i] <= eps_r or r[j] <= eps_r:
        return None
    dtheta = wrap_angle(t[i] - t[j])
    pi_db = (db.xs[big_i], db.ys[big_i])
    pj_db = (db.xs[big_j], db.ys[big_j])
    sol = solve_origin(pi_db, pj_db, r[j] / r[i], dtheta)
    if sol is None:
        return None
    cx, cy = sol.origin
    theta_i = math.atan2(pi_db[1] - cy, pi_db[0] - cx)
    labels_db = [o.label for o in db.objects]
    residuals = []
    matches = []
    cands = []
    for k in range(len(scene)):
        if k in (i, j):
            continue
        q = r[k] / r[i]
        centered = r[k] <= eps_r
        dtk = wrap_angle(t[i] - t[k])
        best = (math.inf, -1)
        for kk in range(len(db)):
            if kk in (big_i, big_j) or labels_db[kk] != scene.objects[k].label:
                continue
            ddx, ddy = db.xs[kk] - cx, db.ys[kk] - cy
            er = abs(q - math.hypot(ddx, ddy) / sol.r_i)
            if not er < params.delta_r:
                continue
            if centered:
                ea = 0.0
            else:
                ea = abs(wrap_angle(dtk - wrap_angle(theta_i - math.atan2(ddy, ddx))))
                if not ea < params.delta_theta:
                    continue
            cands.append((er + ea, k, kk))
            if er + ea < best[0]:
                best = (er + ea, kk)
        if best[1] >= 0 and not params.injective:
            residuals.append(best[0])
            matches.append((k, best[1]))
    if params.injective:
        used_k, used_d = set(), set()
        for e, k, kk in sorted(cands, key=lambda c: c[0]):
            if k in used_k or kk in used_d:
                continue
            used_k.add(k)
            used_d.add(kk)
            residuals.append(e)
            matches.append((k, kk))
    return Hypothesis((i, j), (big_i, big_j), (cx, cy), sol.r_i,
                      tuple(residuals), tuple(matches), 2 + len(matches), sol.r_i / r[i])


def _ordered_candidates(params: MatchParams, best_idx, q_idx, q_n, q_f) -> list[Candidate]:
    n_q = len(q_n)
    if n_q == 0:
        return []
    order = list(np.lexsort((np.arange(n_q), q_f[:, 2], -q_n)))
    if params.selection_mode == "faithful":
        # The sequential winner leads; the rest follow lexicographically.
        win = next(t for t in range(n_q) if tuple(q_idx[t]) == tuple(best_idx))
        order.remove(win)
        order.insert(0, win)
    kept: list[Candidate] = []
    for t in order:
        pos = (float(q_f[t, 0]), float(q_f[t, 1]))
        if any(math.hypot(pos[0] - c.position[0], pos[1] - c.position[1]) <= params.merge_radius
               for c in kept):
            continue
        kept.append(Candidate(pos, int(q_n[t]), float(q_f[t, 2]), float(q_f[t, 4])))
        if len(kept) == params.top_k:
            break
    return kept


def match(scene: Scene, db: MapDatabase, params: MatchParams | None = None) -> MatchOutcome:
    """Estimate the camera's horizontal position in the database frame.

    Returns a rejected outcome (not an exception) when no hypothesis reaches
    ``params.n_min`` matched objects.  With ``top_k > 1`` the outcome also
    carries up to ``top_k`` distinct candidates, best first.
    """
    params = params or MatchParams()
    if params.prior_region is not None and not _intersects(params.prior_region, db.region):
        raise ConfigurationError("prior_region does not intersect the database region")
    prep = _prepare(scene, db, params)
    collect = params.top_k > 1
    best_idx, best_n, best_e, best_f, st, q_idx, q_n, q_f, _ = _run(prep, params, collect)
    stats = SearchStats.from_array(st)
    if best_idx[0] < 0:
        return MatchOutcome("rejected", stats=stats)
    i, j, big_i, big_j = (int(v) for v in best_idx)
    position = (float(best_f[0]), float(best_f[1]))
    if collect:
        candidates = tuple(_ordered_candidates(params, best_idx, q_idx, q_n, q_f))
    else:
        candidates = (Candidate(position, int(best_n), float(best_e), float(best_f[3])),)
    hyp = evaluate_hypothesis(scene, db, params, (i, j), (big_i, big_j))
    return MatchOutcome(
        status="accepted",
        position=position,
        n_matched=int(best_n),
        score=float(best_e),
        candidates=candidates,
        scale=float(best_f[3]),
        hypothesis=hyp,
        stats=stats,
    )


def match_with_prior(scene: Scene, db: MapDatabase, params: MatchParams) -> MatchOutcome:
    """:func:`match` restricted to origins inside ``params.prior_region``."""
    if params.prior_region is None:
        raise ConfigurationError("match_with_prior needs params.prior_region")
    return match(scene, db, params)


def rank_candidates(scene: Scene, db: MapDatabase,
                    params: MatchParams | None = None) -> list[Candidate]:
    """Distinct qualifying fixes, best first, at most ``params.top_k``.

    Fixes closer than ``params.merge_radius`` to a better-ranked one are
    merged into it.  Empty when the scene is rejected.
    """
    params = params or MatchParams()
    if params.prior_region is not None and not _intersects(params.prior_region, db.region):
        raise ConfigurationError("prior_region does not intersect the database region")
    prep = _prepare(scene, db, params)
    best_idx, _, _, _, _, q_idx, q_n, q_f, _ = _run(prep, params, True)
    return _ordered_candidates(params, best_idx, q_idx, q_n, q_f)


def estimate_height(outcome: MatchOutcome, camera) -> float:
    """Height above ground from the fix's meters-per-pixel scale.

    ``camera`` needs an ``f_px`` attribute (focal length in pixels).
    """
    if not outcome.accepted or outcome.scale is None:
        raise MissingScaleError("outcome carries no scale (rejected match)")
    return outcome.scale * camera.f_px
