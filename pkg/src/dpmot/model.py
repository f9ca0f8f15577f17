"""Core value types shared across the tracker.

Image coordinates are continuous pixels with ``v`` growing downwards, so the
bottom edge of a box is ``y + h`` and nearer ground objects have larger
bottom edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box width/height must be positive, got w={self.w}, h={self.h}")

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    def tlwh(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=float)

    def tlbr(self) -> np.ndarray:
        return np.array([self.x, self.y, self.x + self.w, self.y + self.h], dtype=float)

    @classmethod
    def from_tlbr(cls, x1, y1, x2, y2) -> "BBox":
        return cls(float(x1), float(y1), float(x2 - x1), float(y2 - y1))

    def union(self, other: "BBox") -> "BBox":
        return BBox.from_tlbr(
            min(self.x, other.x),
            min(self.y, other.y),
            max(self.x + self.w, other.x + other.w),
            max(self.bottom, other.bottom),
        )


def derived_box_features(bbox: BBox):
    """Return ``(c_x, c_y, s, r, v_l)``: center, area, aspect ratio w/h and bottom edge."""
    return (bbox.cx, bbox.cy, bbox.w * bbox.h, bbox.w / bbox.h, bbox.bottom)


def box_from_features(cx, cy, s, r) -> BBox:
    w = math.sqrt(s * r)
    h = math.sqrt(s / r)
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


@dataclass
class Detection:
    frame: int
    bbox: BBox
    confidence: float = 1.0
    embedding: Optional[np.ndarray] = None
    depth_order: Optional[int] = None

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frame index must be >= 1, got {self.frame}")


def rotation_matrix(theta_z: float, theta_y: float, theta_x: float) -> np.ndarray:
    """Closed-form expansion of ``R_z(theta_z) @ R_y(theta_y) @ R_x(theta_x)``."""
    cz, sz = math.cos(theta_z), math.sin(theta_z)
    cy, sy = math.cos(theta_y), math.sin(theta_y)
    cx, sx = math.cos(theta_x), math.sin(theta_x)
    return np.array(
        [
            [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
            [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
            [-sy, cy * sx, cy * cx],
        ]
    )


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera over a ground plane ``y = 0``.

    The world ``y`` axis is parallel to the image ``v`` axis at zero angles
    (points above ground have negative ``y``). The extrinsic translation is
    ``[0, Y_c, 0]`` with camera height ``Y_c > 0``; angles are in radians.
    """

    f: float
    u_c: float
    v_c: float
    Y_c: float
    theta_x: float = 0.0
    theta_y: float = 0.0
    theta_z: float = 0.0
    img_w: float = 1920.0
    img_h: float = 1080.0
    R: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("focal length must be positive")
        if self.Y_c <= 0:
            raise ValueError("camera height Y_c must be positive")
        if self.img_w <= 0 or self.img_h <= 0:
            raise ValueError("image size must be positive")
        if not (0 <= self.v_c <= self.img_h):
            raise ValueError("principal point v_c must lie within the image height")
        object.__setattr__(self, "R", rotation_matrix(self.theta_z, self.theta_y, self.theta_x))

    @classmethod
    def default(cls, img_w: float, img_h: float) -> "CameraModel":
        return cls(f=float(img_h), u_c=img_w / 2.0, v_c=img_h / 2.0, Y_c=1.0, img_w=img_w, img_h=img_h)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.u_c], [0.0, self.f, self.v_c], [0.0, 0.0, 1.0]])

    @property
    def P(self) -> np.ndarray:
        return np.hstack([self.R, np.array([[0.0], [self.Y_c], [0.0]])])

    def r(self, k: int) -> float:
        """Rotation entry ``r_k`` with 1-based row-major numbering (r_1 .. r_9)."""
        return float(self.R.flat[k - 1])


@dataclass(frozen=True)
class SequenceInfo:
    name: str
    img_w: int
    img_h: int
    frame_rate: float
    n_frames: int
    embedding_dim: Optional[int] = None

    def __post_init__(self):
        if min(self.img_w, self.img_h, self.frame_rate, self.n_frames) <= 0:
            raise ValueError("sequence info fields must be positive")


@dataclass(frozen=True)
class TrackRecord:
    id: int
    frame: int
    bbox: BBox
    confidence: float = 1.0
