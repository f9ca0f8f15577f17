"""Active pseudo-3D Kalman filter.

State (depth variant, 9-d)::

    [c_x, c_y, z, s, r, c_x', c_y', z', s']

where ``z`` is the integer depth order scaled by ``w_z`` into pixel-comparable
units. The planar variant (7-d) drops ``z`` and ``z'``. Prediction takes an
acceleration control input ``u`` through the control matrix ``G``; the
"active" variants estimate ``u`` from recent motion of the track.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import IoFailure, NonFiniteState, ParseError, SingularInnovation
from .model import BBox, Detection, box_from_features

P0_DEPTH = (10.0, 10.0, 10.0, 100.0, 0.01, 1000.0, 1000.0, 1000.0, 1000.0)
R_DEPTH = (1.0, 1.0, 1.0, 10.0, 0.01)
Q_EPS = 1e-6
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class KfMatrices:
    F: np.ndarray
    G: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    sigma: float
    use_depth: bool

    @property
    def dim(self) -> int:
        return self.F.shape[0]

    @property
    def n_meas(self) -> int:
        return self.H.shape[0]

    @property
    def n_control(self) -> int:
        return self.G.shape[1]


def build_matrices(use_depth=True, sigma=1.0, dt=1.0, r_diag=None, q_eps=Q_EPS) -> KfMatrices:
    n_pos = 5 if use_depth else 4  # observed block
    n_ctl = 3 if use_depth else 2  # c_x, c_y[, z]
    dim = n_pos + n_ctl + 1  # + s'
    F = np.eye(dim)
    # (position, velocity) couplings: centre/depth plus scale; ratio is static
    moving = list(range(n_ctl)) + [n_pos - 2]
    for k, p in enumerate(moving):
        F[p, n_pos + k] = dt
    G = np.zeros((dim, n_ctl))
    for k in range(n_ctl):
        G[k, k] = 0.5 * dt * dt
        G[n_pos + k, k] = dt
    Q = G @ (sigma**2 * np.eye(n_ctl)) @ G.T + q_eps * np.eye(dim)
    H = np.zeros((n_pos, dim))
    H[:, :n_pos] = np.eye(n_pos)
    if r_diag is None:
        r_diag = R_DEPTH if use_depth else (R_DEPTH[0], R_DEPTH[1], R_DEPTH[3], R_DEPTH[4])
    R = np.diag(np.asarray(r_diag, dtype=float))
    return KfMatrices(F, G, Q, H, R, float(sigma), bool(use_depth))


def default_p0(use_depth=True):
    if use_depth:
        return P0_DEPTH
    return tuple(v for k, v in enumerate(P0_DEPTH) if k not in (2, 7))


@dataclass
class KfState:
    mean: np.ndarray
    cov: np.ndarray

    def copy(self) -> "KfState":
        return KfState(self.mean.copy(), self.cov.copy())


def _check_finite(state: KfState) -> KfState:
    if not (np.all(np.isfinite(state.mean)) and np.all(np.isfinite(state.cov))):
        raise NonFiniteState("Kalman state became non-finite")
    return state


def predict(state: KfState, mats: KfMatrices, control=None) -> KfState:
    u = np.zeros(mats.n_control) if control is None else np.asarray(control, dtype=float)
    mean = mats.F @ state.mean + mats.G @ u
    cov = mats.F @ state.cov @ mats.F.T + mats.Q
    return _check_finite(KfState(mean, 0.5 * (cov + cov.T)))


def kalman_gain(state: KfState, mats: KfMatrices) -> np.ndarray:
    pht = state.cov @ mats.H.T
    S = mats.H @ pht + mats.R
    if np.linalg.cond(S) > MAX_CONDITION:
        raise SingularInnovation("innovation covariance is ill-conditioned")
    # K = A H^T S^-1, with S symmetric
    return np.linalg.solve(S, pht.T).T


def update(state: KfState, mats: KfMatrices, z) -> KfState:
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise NonFiniteState("measurement is not finite")
    K = kalman_gain(state, mats)
    mean = state.mean + K @ (z - mats.H @ state.mean)
    cov = (np.eye(mats.dim) - K @ mats.H) @ state.cov
    return _check_finite(KfState(mean, 0.5 * (cov + cov.T)))


def measurement(det: Detection, w_z: float, use_depth=True) -> np.ndarray:
    b = det.bbox
    if use_depth:
        z = 0.0 if det.depth_order is None else det.depth_order * w_z
        return np.array([b.cx, b.cy, z, b.w * b.h, b.w / b.h])
    return np.array([b.cx, b.cy, b.w * b.h, b.w / b.h])


def init_track_state(det: Detection, w_z: float, use_depth=True, p0=None) -> KfState:
    z = measurement(det, w_z, use_depth)
    dim = 9 if use_depth else 7
    mean = np.zeros(dim)
    mean[: len(z)] = z
    p0 = default_p0(use_depth) if p0 is None else p0
    return KfState(mean, np.diag(np.asarray(p0, dtype=float)))


def state_box(mean: np.ndarray, use_depth=True) -> BBox:
    s_idx = 3 if use_depth else 2
    s = max(float(mean[s_idx]), 1e-6)
    r = max(float(mean[s_idx + 1]), 1e-6)
    return box_from_features(float(mean[0]), float(mean[1]), s, r)


# ---------------------------------------------------------------------------
# Control input
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HistoryEntry:
    frame: int
    cx: float
    cy: float
    bottom: float
    det_index: int = -1


@dataclass(frozen=True)
class ControlInput:
    u: np.ndarray

    @classmethod
    def zero(cls, n=3) -> "ControlInput":
        return cls(np.zeros(n))


def control_gamma(bottom: float, img_h: float, lambda_q: float, w_z: float) -> float:
    """Signed d(z_hat * w_z)/dv at the given box bottom; negative because nearer boxes sit lower."""
    v = max(float(bottom), 1.0)
    return -lambda_q * img_h / (v * v) * w_z


class DetectionDifferenceProvider:
    """Per-frame centre displacements from the track's own matched detections."""

    name = "detections"
    needs = 3

    def deltas(self, history: Sequence[HistoryEntry]):
        if len(history) < 3:
            return None
        h0, h1, h2 = list(history)[-3:]
        g1 = h1.frame - h0.frame
        g2 = h2.frame - h1.frame
        d_prev = np.array([(h1.cx - h0.cx) / g1, (h1.cy - h0.cy) / g1])
        d_next = np.array([(h2.cx - h1.cx) / g2, (h2.cy - h1.cy) / g2])
        # per-frame^2 when the three samples are not consecutive
        return d_prev, d_next, 0.5 * (g1 + g2)


class FlowFileProvider:
    """Precomputed displacements keyed by ``(frame, det_index)``.

    Each row ``frame,det_index,dx,dy`` gives the image motion of that
    detection's region from ``frame - 1`` to ``frame``.
    """

    name = "flow-file"
    needs = 2

    def __init__(self, flows: dict):
        self.flows = flows

    @classmethod
    def from_csv(cls, path) -> "FlowFileProvider":
        path = Path(path)
        flows = {}
        try:
            fh = open(path, newline="")
        except OSError as exc:
            raise IoFailure(f"{path}: {exc.strerror}") from exc
        with fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 4:
                    raise ParseError(path, lineno, f"expected 4 fields, got {len(row)}")
                try:
                    flows[(int(row[0]), int(row[1]))] = (float(row[2]), float(row[3]))
                except ValueError as exc:
                    raise ParseError(path, lineno, str(exc)) from None
        return cls(flows)

    def deltas(self, history: Sequence[HistoryEntry]):
        if len(history) < 2:
            return None
        a = self.flows.get((history[-2].frame, history[-2].det_index))
        b = self.flows.get((history[-1].frame, history[-1].det_index))
        if a is None or b is None:
            return None
        return np.asarray(a, dtype=float), np.asarray(b, dtype=float), float(history[-1].frame - history[-2].frame)


def estimate_control(
    history: Sequence[HistoryEntry],
    provider,
    img_h: float,
    lambda_q: float,
    w_z: float,
) -> ControlInput:
    """Acceleration ``[c_x'', c_y'', z'']`` from two successive displacements.

    The depth component maps the vertical acceleration through the local
    slope of the depth quantiser at the latest box bottom. Returns zeros when
    the provider lacks enough history.
    """
    got = provider.deltas(history) if history else None
    if got is None:
        return ControlInput.zero()
    d_prev, d_next, span = got
    acc = (d_next - d_prev) / span
    gamma = control_gamma(history[-1].bottom, img_h, lambda_q, w_z)
    u = np.array([acc[0], acc[1], gamma * acc[1]])
    if not np.all(np.isfinite(u)):
        return ControlInput.zero()
    return ControlInput(u)
