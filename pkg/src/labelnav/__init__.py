"""Labeled point-pattern localization for map-based aerial navigation."""

from .geometry import PolarCoord, solve_origin, to_polar, wrap_angle
from .model import (
    Candidate,
    Disc,
    LabeledPoint,
    MapDatabase,
    MatchOutcome,
    MatchParams,
    Rect,
    Scene,
    coarsen_labels,
    load_database,
    load_scene,
)
from .matcher import estimate_height, match, match_with_prior, rank_candidates

__version__ = "0.1.0"
