"""Subject-ordered depth estimation from the bottom edge of a box.

Objects standing on the ground plane touch it at their box bottom ``v_l``.
Inverting the pinhole projection at ``y = 0`` gives a continuous depth
``z_bar``; the tracker itself only needs the coarse integer order ``z_hat``,
which is a quantisation of ``1 / v_l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometry
from .model import CameraModel, Detection

DEFAULT_LAMBDA_Q = 10.0
_EPS = 1e-9


@dataclass(frozen=True)
class DepthEstimate:
    z_bar: float
    z_hat: int
    valid: bool


def y_of_v(camera: CameraModel, v: float, x: float, z: float) -> float:
    """World height ``y`` of the point at depth ``z`` and lateral ``x`` that images to row ``v``."""
    r = camera.R
    f, v_c = camera.f, camera.v_c
    dv = v - v_c
    den = -dv * r[2, 1] + f * r[1, 1]
    if abs(den) < _EPS:
        raise DegenerateGeometry(f"viewing ray through v={v} is parallel to the ground plane")
    num = z * (dv * r[2, 2] - f * r[1, 2]) - f * camera.Y_c + x * (dv * r[2, 0] - f * r[1, 0])
    return num / den


def horizon_row(camera: CameraModel, moving: bool = False) -> float:
    """Image row where ground points recede to infinity (for the x = 0 column)."""
    if moving:
        return camera.v_c
    r = camera.R
    if abs(r[2, 2]) < _EPS:
        return -math.inf
    return camera.v_c + camera.f * r[1, 2] / r[2, 2]


def quantize_order(v_l: float, img_h: float, lambda_q: float = DEFAULT_LAMBDA_Q) -> int:
    v = min(max(float(v_l), 1.0), 1.5 * img_h)
    return int(math.floor(lambda_q * img_h / v))


def quantize_orders(v_l: np.ndarray, img_h: float, lambda_q: float = DEFAULT_LAMBDA_Q) -> np.ndarray:
    v = np.clip(np.asarray(v_l, dtype=float), 1.0, 1.5 * img_h)
    return np.floor(lambda_q * img_h / v).astype(np.int64)


def farthest_bin(img_h: float, lambda_q: float = DEFAULT_LAMBDA_Q) -> int:
    return int(math.floor(lambda_q * img_h))


def estimate_depth_static(
    camera: CameraModel, v_l: float, x_world_hint: float = 0.0, lambda_q: float = DEFAULT_LAMBDA_Q
) -> DepthEstimate:
    r = camera.R
    f, v_c = camera.f, camera.v_c
    den = (v_l - v_c) * r[2, 2] - f * r[1, 2]
    if abs(den) < _EPS:
        raise DegenerateGeometry(f"box bottom v_l={v_l} lies on the horizon")
    z_bar = (f * camera.Y_c + x_world_hint * (f * r[1, 0] + (v_c - v_l) * r[2, 0])) / den
    valid = z_bar > 0
    z_hat = quantize_order(v_l, camera.img_h, lambda_q) if valid else farthest_bin(camera.img_h, lambda_q)
    return DepthEstimate(z_bar, z_hat, valid)


def estimate_depth_moving(camera: CameraModel, v_l: float, lambda_q: float = DEFAULT_LAMBDA_Q) -> DepthEstimate:
    """Ego-frame estimate: identity rotation, so depth is ``f * Y_c / (v_l - v_c)``."""
    dv = v_l - camera.v_c
    if dv <= 0:
        return DepthEstimate(-math.inf if dv == 0 else camera.f * camera.Y_c / dv, farthest_bin(camera.img_h, lambda_q), False)
    return DepthEstimate(camera.f * camera.Y_c / dv, quantize_order(v_l, camera.img_h, lambda_q), True)


def depth_orders(
    bottoms: np.ndarray, camera: CameraModel, lambda_q: float = DEFAULT_LAMBDA_Q, moving: bool = False
) -> np.ndarray:
    """Vectorised ``z_hat`` for an array of box bottoms; above-horizon boxes get the farthest bin."""
    bottoms = np.asarray(bottoms, dtype=float)
    z_hat = quantize_orders(bottoms, camera.img_h, lambda_q)
    above = bottoms <= horizon_row(camera, moving)
    if camera.R[2, 2] <= 0 and not moving:
        above = np.ones_like(above)
    z_hat[above] = farthest_bin(camera.img_h, lambda_q)
    return z_hat


def order_detections(
    detections: Sequence[Detection],
    camera: CameraModel,
    lambda_q: float = DEFAULT_LAMBDA_Q,
    moving: bool = False,
) -> np.ndarray:
    """Assign ``depth_order`` to every detection and return indices nearest-first.

    Ties are broken by larger bottom edge, then smaller left edge.
    """
    if not detections:
        return np.zeros(0, dtype=np.int64)
    bottoms = np.array([d.bbox.bottom for d in detections])
    lefts = np.array([d.bbox.x for d in detections])
    z_hat = depth_orders(bottoms, camera, lambda_q, moving)
    for det, z in zip(detections, z_hat):
        det.depth_order = int(z)
    # lexsort: last key is primary
    return np.lexsort((lefts, -bottoms, z_hat))
