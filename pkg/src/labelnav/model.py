"""Domain types, map database container and the JSON file formats.

Units: database objects are in meters in a local east/north frame (x east,
y north).  Scene objects are in pixels with ``u`` to the right and ``v``
down; :meth:`Scene.polar_frame` flips ``v`` so both domains share the same
handedness before any angle is measured.

Map file::

    {"region": {"min": [x, y], "max": [x, y]},
     "objects": [{"id": str, "label": str, "x": num, "y": num}, ...]}

Scene file::

    {"image": {"w": int, "h": int},
     "objects": [{"label": str, "u": num, "v": num}, ...],
     "truth": {"x": num, "y": num, "alt": num}}      # optional

Coordinates are written with Python's shortest round-trip float repr, so a
save/load cycle is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Union

import numpy as np

from .grid import SpatialGrid

if TYPE_CHECKING:
    from .matcher import Hypothesis, SearchStats

Label = str

SELECTION_MODES = ("lexicographic", "faithful")
SEARCH_MODES = ("exhaustive", "sampled")


class MapFormatError(ValueError):
    """A map or scene file could not be parsed or failed validation."""


class UnmappedLabelError(KeyError):
    """Strict label coarsening met a label missing from the map."""

    def __init__(self, label: str):
        super().__init__(label)
        self.label = label

    def __str__(self) -> str:
        return f"label {self.label!r} has no entry in the label map"


class ConfigurationError(ValueError):
    """Invalid matcher parameters."""


@dataclass(frozen=True)
class LabeledPoint:
    id: str
    label: Label
    x: float
    y: float

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ValueError(f"object {self.id!r}: label must be a non-empty string")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"object {self.id!r}: coordinates must be finite")


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax >= self.xmin and self.ymax >= self.ymin):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def expanded(self, margin: float) -> "Rect":
        return Rect(self.xmin - margin, self.ymin - margin,
                    self.xmax + margin, self.ymax + margin)


@dataclass(frozen=True)
class Disc:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        r = self.radius
        return (self.cx - r, self.cy - r, self.cx + r, self.cy + r)

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x - self.cx, y - self.cy) <= self.radius


Region = Union[Rect, Disc]


def _intersects(a: Region, b: Rect) -> bool:
    ax0, ay0, ax1, ay1 = a.bounds
    if ax1 < b.xmin or ax0 > b.xmax or ay1 < b.ymin or ay0 > b.ymax:
        return False
    if isinstance(a, Disc):
        nx = min(max(a.cx, b.xmin), b.xmax)
        ny = min(max(a.cy, b.ymin), b.ymax)
        return a.contains(nx, ny)
    return True


@dataclass(frozen=True)
class Scene:
    """Labeled objects extracted from one image, in pixel coordinates.

    ``LabeledPoint.x``/``.y`` hold ``u``/``v``.
    """

    objects: tuple[LabeledPoint, ...]
    width_px: int
    height_px: int

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("image dimensions must be positive")
        for k, o in enumerate(self.objects):
            if not (0.0 <= o.x <= self.width_px and 0.0 <= o.y <= self.height_px):
                raise ValueError(f"scene object {k} at ({o.x}, {o.y}) lies outside "
                                 f"the {self.width_px}x{self.height_px} image")

    @property
    def center(self) -> tuple[float, float]:
        return (self.width_px / 2.0, self.height_px / 2.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width_px, self.height_px)

    def polar_frame(self) -> tuple[np.ndarray, np.ndarray]:
        """Object coordinates relative to the center with ``v`` flipped."""
        cu, cv = self.center
        x = np.array([o.x - cu for o in self.objects], dtype=np.float64)
        y = np.array([cv - o.y for o in self.objects], dtype=np.float64)
        return x, y

    def __len__(self) -> int:
        return len(self.objects)


@dataclass(frozen=True)
class SceneTruth:
    x: float
    y: float
    alt: float


class MapDatabase:
    """Immutable set of labeled map objects with a spatial grid index."""

    def __init__(self, objects: Iterable[LabeledPoint], region: Rect | None = None,
                 cell_size: float = 10.0):
        objs = tuple(objects)
        seen: dict[str, int] = {}
        for k, o in enumerate(objs):
            if o.id in seen:
                raise MapFormatError(f"objects[{k}]: duplicate id {o.id!r} "
                                     f"(first seen at objects[{seen[o.id]}])")
            seen[o.id] = k
        if region is None:
            if objs:
                xs = [o.x for o in objs]
                ys = [o.y for o in objs]
                region = Rect(min(xs), min(ys), max(xs), max(ys))
            else:
                region = Rect(0.0, 0.0, 0.0, 0.0)
        for k, o in enumerate(objs):
            if not region.contains(o.x, o.y):
                raise MapFormatError(f"objects[{k}]: ({o.x}, {o.y}) lies outside "
                                     f"region {region.bounds}")
        self._objects = objs
        self._region = region
        self._xs = np.array([o.x for o in objs], dtype=np.float64)
        self._ys = np.array([o.y for o in objs], dtype=np.float64)
        self._xs.setflags(write=False)
        self._ys.setflags(write=False)
        self._grid = SpatialGrid(self._xs, self._ys, region.bounds, cell_size)

    @property
    def objects(self) -> tuple[LabeledPoint, ...]:
        return self._objects

    @property
    def region(self) -> Rect:
        return self._region

    @property
    def index(self) -> SpatialGrid:
        return self._grid

    @property
    def xs(self) -> np.ndarray:
        return self._xs

    @property
    def ys(self) -> np.ndarray:
        return self._ys

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self._objects)

    def __len__(self) -> int:
        return len(self._objects)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MapDatabase):
            return NotImplemented
        return self._objects == other._objects and self._region == other._region

    def __reduce__(self):
        return (MapDatabase, (self._objects, self._region, self._grid.cell_size))

    def translated(self, tx: float, ty: float) -> "MapDatabase":
        objs = [replace(o, x=o.x + tx, y=o.y + ty) for o in self._objects]
        r = self._region
        return MapDatabase(objs, Rect(r.xmin + tx, r.ymin + ty, r.xmax + tx, r.ymax + ty),
                           self._grid.cell_size)


@dataclass(frozen=True)
class MatchParams:
    """Matcher configuration.

    ``delta_theta`` is in radians.  ``prior_region`` restricts hypotheses to
    origins inside a rectangle or disc (meters).  With ``search_mode =
    "sampled"`` at most ``max_hypotheses`` random anchor correspondences are
    drawn using ``seed``.
    """

    n_min: int = 6
    delta_r: float = 0.2
    delta_theta: float = 0.2
    prior_region: Region | None = None
    selection_mode: str = "lexicographic"
    search_mode: str = "exhaustive"
    max_hypotheses: int = 100_000
    seed: int = 0
    top_k: int = 1
    label_map: Mapping[str, str] | None = None
    injective: bool = False
    region_margin_frac: float = 0.2
    merge_radius: float = 5.0

    def __post_init__(self):
        if int(self.n_min) != self.n_min or self.n_min < 3:
            raise ConfigurationError(f"n_min must be an integer >= 3, got {self.n_min}")
        if not self.delta_r > 0:
            raise ConfigurationError(f"delta_r must be > 0, got {self.delta_r}")
        if not 0 < self.delta_theta < math.pi:
            raise ConfigurationError(f"delta_theta must be in (0, pi), got {self.delta_theta}")
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise ConfigurationError(f"top_k must be an integer >= 1, got {self.top_k}")
        if self.selection_mode not in SELECTION_MODES:
            raise ConfigurationError(f"selection_mode must be one of {SELECTION_MODES}")
        if self.search_mode not in SEARCH_MODES:
            raise ConfigurationError(f"search_mode must be one of {SEARCH_MODES}")
        if self.max_hypotheses < 1:
            raise ConfigurationError("max_hypotheses must be >= 1")
        if self.region_margin_frac < 0:
            raise ConfigurationError("region_margin_frac must be >= 0")
        if self.merge_radius < 0:
            raise ConfigurationError("merge_radius must be >= 0")
        if self.prior_region is not None and not isinstance(self.prior_region, (Rect, Disc)):
            raise ConfigurationError("prior_region must be a Rect or Disc")


@dataclass(frozen=True)
class Candidate:
    position: tuple[float, float]
    n_matched: int
    score: float
    scale: float


@dataclass(frozen=True)
class MatchOutcome:
    status: str
    position: tuple[float, float] | None = None
    n_matched: int = 0
    score: float | None = None
    candidates: tuple[Candidate, ...] = ()
    scale: float | None = None
    hypothesis: "Hypothesis | None" = None
    stats: "SearchStats | None" = field(default=None, compare=False)

    @property
    def accepted(self) -> bool:
        return self.status == "accepted"


# ---------------------------------------------------------------------------
# Label coarsening
# ---------------------------------------------------------------------------

def _map_label(label: str, label_map: Mapping[str, str], strict: bool) -> str:
    if label in label_map:
        return label_map[label]
    if strict:
        raise UnmappedLabelError(label)
    return label


def coarsen_labels(target, label_map: Mapping[str, str], strict: bool = False):
    """Replace every object's label by its image under ``label_map``.

    Works on a :class:`Scene` or a :class:`MapDatabase` and returns a new
    object of the same type with identical geometry.  Labels missing from
    the map pass through unchanged unless ``strict`` is set.
    """
    objs = [replace(o, label=_map_label(o.label, label_map, strict)) for o in target.objects]
    if isinstance(target, Scene):
        return Scene(tuple(objs), target.width_px, target.height_px)
    if isinstance(target, MapDatabase):
        return MapDatabase(objs, target.region, target.index.cell_size)
    raise TypeError(f"cannot coarsen labels of {type(target).__name__}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _num(rec: dict, key: str, where: str) -> float:
    if key not in rec:
        raise MapFormatError(f"{where}: missing field {key!r}")
    v = rec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise MapFormatError(f"{where}: field {key!r} must be a finite number")
    return float(v)


def _str(rec: dict, key: str, where: str) -> str:
    v = rec.get(key)
    if not isinstance(v, str) or not v:
        raise MapFormatError(f"{where}: field {key!r} must be a non-empty string")
    return v


def _decode(data) -> dict:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MapFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MapFormatError("top-level value must be an object")
    return doc


def _pair(v, where: str) -> tuple[float, float]:
    if (not isinstance(v, list) or len(v) != 2
            or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v)):
        raise MapFormatError(f"{where}: expected [x, y]")
    return float(v[0]), float(v[1])


def load_database(data, cell_size: float = 10.0) -> MapDatabase:
    """Parse a map file (bytes or str) into a :class:`MapDatabase`."""
    doc = _decode(data)
    region = None
    if "region" in doc:
        reg = doc["region"]
        if not isinstance(reg, dict):
            raise MapFormatError("region: expected an object with 'min' and 'max'")
        lo = _pair(reg.get("min"), "region.min")
        hi = _pair(reg.get("max"), "region.max")
        try:
            region = Rect(lo[0], lo[1], hi[0], hi[1])
        except ValueError as exc:
            raise MapFormatError(f"region: {exc}") from exc
    recs = doc.get("objects")
    if not isinstance(recs, list):
        raise MapFormatError("objects: expected a list")
    objs = []
    for k, rec in enumerate(recs):
        where = f"objects[{k}]"
        if not isinstance(rec, dict):
            raise MapFormatError(f"{where}: expected an object")
        if not isinstance(rec.get("id"), str):
            raise MapFormatError(f"{where}: field 'id' must be a string")
        objs.append(LabeledPoint(rec["id"], _str(rec, "label", where),
                                 _num(rec, "x", where), _num(rec, "y", where)))
    return MapDatabase(objs, region, cell_size)


def dump_database(db: MapDatabase) -> str:
    r = db.region
    doc = {
        "region": {"min": [r.xmin, r.ymin], "max": [r.xmax, r.ymax]},
        "objects": [{"id": o.id, "label": o.label, "x": o.x, "y": o.y} for o in db.objects],
    }
    return json.dumps(doc, indent=1)


def read_database(path, cell_size: float = 10.0) -> MapDatabase:
    return load_database(Path(path).read_bytes(), cell_size)


def write_database(db: MapDatabase, path) -> None:
    Path(path).write_text(dump_database(db) + "\n")


def load_scene(data) -> tuple[Scene, SceneTruth | None]:
    """Parse a scene file.  The optional truth block is returned separately."""
    doc = _decode(data)
    img = doc.get("image")
    if not isinstance(img, dict):
        raise MapFormatError("image: expected an object with 'w' and 'h'")
    w, h = img.get("w"), img.get("h")
    if not (isinstance(w, int) and isinstance(h, int)) or w <= 0 or h <= 0:
        raise MapFormatError("image: 'w' and 'h' must be positive integers")
    recs = doc.get("objects")
    if not isinstance(recs, list):
        raise MapFormatError("objects: expected a list")
    objs = []
    for k, rec in enumerate(recs):
        where = f"objects[{k}]"
        if not isinstance(rec, dict):
            raise MapFormatError(f"{where}: expected an object")
        objs.append(LabeledPoint(str(k), _str(rec, "label", where),
                                 _num(rec, "u", where), _num(rec, "v", where)))
    try:
        scene = Scene(tuple(objs), w, h)
    except ValueError as exc:
        raise MapFormatError(str(exc)) from exc
    truth = None
    if doc.get("truth") is not None:
        t = doc["truth"]
        if not isinstance(t, dict):
            raise MapFormatError("truth: expected an object")
        truth = SceneTruth(_num(t, "x", "truth"), _num(t, "y", "truth"),
                           _num(t, "alt", "truth"))
    return scene, truth


def dump_scene(scene: Scene, truth: SceneTruth | None = None) -> str:
    doc: dict = {
        "image": {"w": scene.width_px, "h": scene.height_px},
        "objects": [{"label": o.label, "u": o.x, "v": o.y} for o in scene.objects],
    }
    if truth is not None:
        doc["truth"] = {"x": truth.x, "y": truth.y, "alt": truth.alt}
    return json.dumps(doc, indent=1)


def read_scene(path) -> tuple[Scene, SceneTruth | None]:
    return load_scene(Path(path).read_bytes())


def write_scene(scene: Scene, path, truth: SceneTruth | None = None) -> None:
    Path(path).write_text(dump_scene(scene, truth) + "\n")
