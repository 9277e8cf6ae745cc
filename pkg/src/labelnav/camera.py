"""Synthetic map databases and pinhole-camera scenes.

World frame: x east, y north, z up (meters).  The nominal camera looks
straight down with image ``u`` along east and image ``v`` along south, so
the camera axes are X_c = east, Y_c = south, Z_c = down.  Attitude errors
perturb that nominal orientation by ``Rz(yaw) @ Rx(pitch) @ Ry(roll)`` in
the world frame: roll tilts about the north axis, pitch about the east axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import LabeledPoint, MapDatabase, Rect, Scene

# Columns are the camera axes expressed in world coordinates.
_NADIR = np.array([[1.0, 0.0, 0.0],
                   [0.0, -1.0, 0.0],
                   [0.0, 0.0, -1.0]])


@dataclass(frozen=True)
class CameraModel:
    width_px: int = 640
    height_px: int = 480
    hfov: float = math.radians(35.0)

    def __post_init__(self):
        if not 0.0 < self.hfov < math.pi:
            raise ValueError("hfov must be in (0, pi)")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("image size must be positive")

    @classmethod
    def from_degrees(cls, hfov_deg: float, width_px: int = 640, height_px: int = 480):
        return cls(width_px, height_px, math.radians(hfov_deg))

    @property
    def f_px(self) -> float:
        return (self.width_px / 2.0) / math.tan(self.hfov / 2.0)

    @property
    def tan_half_vfov(self) -> float:
        return math.tan(self.hfov / 2.0) * self.height_px / self.width_px

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.width_px / 2.0, self.height_px / 2.0)

    def footprint_half_extents(self, alt: float) -> tuple[float, float]:
        """Ground half-width and half-height seen from ``alt`` at nadir."""
        return alt * math.tan(self.hfov / 2.0), alt * self.tan_half_vfov


@dataclass(frozen=True)
class TruePose:
    x: float
    y: float
    alt: float
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        if not self.alt > 0:
            raise ValueError("alt must be positive")


@dataclass(frozen=True)
class NoiseModel:
    sigma_att: float = 0.0
    sigma_px: float = 0.0
    seed: int | Sequence[int] = 0

    def __post_init__(self):
        if self.sigma_att < 0 or self.sigma_px < 0:
            raise ValueError("noise standard deviations must be >= 0")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Camera-to-world rotation for the given attitude errors."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    ry = np.array([[cr, 0.0, sr], [0.0, 1.0, 0.0], [-sr, 0.0, cr]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return rz @ rx @ ry @ _NADIR


def synth_database(region: Rect, n_objects: int,
                   labels: Mapping[str, float] | Sequence[str] | str = "obj",
                   seed=0, cell_size: float = 10.0) -> MapDatabase:
    """Objects drawn i.i.d. uniform over ``region``.

    ``labels`` is a single label, a sequence of equally likely labels, or a
    mapping of label to relative weight.
    """
    if n_objects < 0:
        raise ValueError("n_objects must be >= 0")
    if isinstance(labels, str):
        names, probs = [labels], np.array([1.0])
    elif isinstance(labels, Mapping):
        names = list(labels)
        probs = np.array([float(labels[k]) for k in names])
        if (probs < 0).any() or probs.sum() <= 0:
            raise ValueError("label weights must be non-negative with a positive sum")
        probs = probs / probs.sum()
    else:
        names = list(labels)
        probs = np.full(len(names), 1.0 / len(names))
    rng = np.random.default_rng(seed)
    xs = rng.uniform(region.xmin, region.xmax, n_objects)
    ys = rng.uniform(region.ymin, region.ymax, n_objects)
    lab = rng.choice(len(names), size=n_objects, p=probs)
    objs = [LabeledPoint(f"o{k}", names[lab[k]], float(xs[k]), float(ys[k]))
            for k in range(n_objects)]
    return MapDatabase(objs, region, cell_size)


def project_points(xs, ys, pose: TruePose, cam: CameraModel):
    """Ideal pinhole projection of ground points (z = 0), no noise.

    Returns ``(u, v, in_front)``.
    """
    r_cw = rotation(pose.roll, pose.pitch, pose.yaw)
    rel = np.stack([np.asarray(xs, float) - pose.x,
                    np.asarray(ys, float) - pose.y,
                    np.full(np.shape(xs), -pose.alt)])
    pc = r_cw.T @ rel
    in_front = pc[2] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.width_px / 2.0 + cam.f_px * pc[0] / pc[2]
        v = cam.height_px / 2.0 + cam.f_px * pc[1] / pc[2]
    return u, v, in_front


def project_scene(db: MapDatabase, pose: TruePose, cam: CameraModel,
                  noise: NoiseModel | None = None) -> Scene:
    """Render the database objects visible from ``pose`` as a scene.

    Gaussian pixel noise is added after projection; an object is kept when
    its noisy pixel lies inside the image.  The attitude in ``pose`` is used
    as-is; attitude noise is drawn by :func:`sample_pose`.
    """
    noise = noise or NoiseModel()
    u, v, front = project_points(db.xs, db.ys, pose, cam)
    rng = noise.rng()
    if noise.sigma_px > 0:
        u = u + rng.normal(0.0, noise.sigma_px, len(u))
        v = v + rng.normal(0.0, noise.sigma_px, len(v))
    keep = front & (u >= 0) & (u <= cam.width_px) & (v >= 0) & (v <= cam.height_px)
    objs = tuple(LabeledPoint(db.objects[k].id, db.objects[k].label, float(u[k]), float(v[k]))
                 for k in np.flatnonzero(keep))
    return Scene(objs, cam.width_px, cam.height_px)


def unproject_nadir(u: float, v: float, pose: TruePose, cam: CameraModel) -> tuple[float, float]:
    """Ground point seen at pixel ``(u, v)`` by an ideal nadir camera."""
    k = pose.alt / cam.f_px
    return (pose.x + k * (u - cam.width_px / 2.0),
            pose.y - k * (v - cam.height_px / 2.0))


def sample_pose(rng: np.random.Generator, region: Rect, alt: float, sigma_att: float,
                cam: CameraModel | None = None, inset: bool = False) -> TruePose:
    """Uniform horizontal position with normally distributed roll and pitch.

    With ``inset`` the position is drawn so that the nadir footprint stays
    inside ``region`` (requires ``cam``).
    """
    x0, y0, x1, y1 = region.bounds
    if inset:
        if cam is None:
            raise ValueError("inset sampling needs the camera model")
        hx, hy = cam.footprint_half_extents(alt)
        x0, x1, y0, y1 = x0 + hx, x1 - hx, y0 + hy, y1 - hy
        if x1 < x0 or y1 < y0:
            raise ValueError("footprint does not fit inside the region")
    x = rng.uniform(x0, x1)
    y = rng.uniform(y0, y1)
    roll = rng.normal(0.0, sigma_att) if sigma_att > 0 else 0.0
    pitch = rng.normal(0.0, sigma_att) if sigma_att > 0 else 0.0
    return TruePose(float(x), float(y), alt, float(roll), float(pitch), 0.0)
