"""Per-frame tracking loop.

Each call to :meth:`Tracker.step` runs, in order: depth ordering of the new
detections, Kalman prediction of every live track (with its estimated
acceleration), the fused cost matrix, Hungarian assignment, merged-detection
checks, and lifecycle bookkeeping.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .assign import solve
from .assoc import SENTINEL, build_cost
from .errors import ConfigError, InvalidFrameOrder, NonFiniteState
from .kalman import (
    DetectionDifferenceProvider,
    FlowFileProvider,
    HistoryEntry,
    KfState,
    build_matrices,
    estimate_control,
    init_track_state,
    measurement,
    state_box,
)
from .model import BBox, CameraModel, Detection, SequenceInfo, TrackRecord
from .sode import order_detections

MOTION_MODELS = ("2DKF", "3DKF", "A-2DKF", "A-3DKF")
ASSOCIATIONS = ("first-order", "high-order")
WEIGHT_PRESETS = {"main": (0.6, 0.4), "appendix": (0.45, 0.55)}


class TrackStatus(Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    LOST = "lost"
    REMOVED = "removed"


@dataclass
class TrackerConfig:
    alpha: float = 0.6
    beta: float = 0.4
    tau_z: float = 3.0
    tau_z_mode: str = "steps"  # "steps" or "pixels" (img_h / 10 in filter units)
    tau_gate: float = 1.0
    tau_c: float = 0.1
    min_hits: int = 3
    max_age: int = 30
    sigma: float = 1.0
    w_z: Optional[float] = None  # default img_h / (lambda_q * 10)
    lambda_q: float = 10.0
    s_d: float = 100.0
    s_a: float = 0.5
    momentum: float = 0.9
    min_confidence: float = 0.1
    control_coast: int = 1
    control_gate: float = 13.82  # chi-square, 2 dof, 99.9%
    control_deadband: float = 2.0  # in std-devs of a second difference of measured centres
    motion_provider: str = "detections"
    flow_file: Optional[str] = None
    moving_camera: bool = False
    motion: str = "A-3DKF"
    association: str = "high-order"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.motion not in MOTION_MODELS:
            raise ConfigError(f"unknown motion model {self.motion!r}; expected one of {MOTION_MODELS}")
        if self.association not in ASSOCIATIONS:
            raise ConfigError(f"unknown association {self.association!r}; expected one of {ASSOCIATIONS}")
        if self.tau_z_mode not in ("steps", "pixels"):
            raise ConfigError(f"tau_z_mode must be 'steps' or 'pixels', got {self.tau_z_mode!r}")
        if self.motion_provider not in ("detections", "flow-file"):
            raise ConfigError(f"unknown motion provider {self.motion_provider!r}")
        if self.motion_provider == "flow-file" and not self.flow_file:
            raise ConfigError("motion_provider 'flow-file' requires flow_file")
        for name in ("alpha", "beta", "tau_z", "tau_gate", "tau_c", "sigma", "s_d", "s_a", "min_confidence", "control_coast", "control_gate", "control_deadband"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.alpha + self.beta <= 0:
            raise ConfigError("alpha + beta must be positive")
        if self.min_hits < 1 or self.max_age < 1:
            raise ConfigError("min_hits and max_age must be >= 1")
        if self.lambda_q <= 0 or self.s_d <= 0 or self.s_a <= 0:
            raise ConfigError("lambda_q, s_d and s_a must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.w_z is not None and self.w_z <= 0:
            raise ConfigError("w_z must be positive")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @property
    def use_depth(self) -> bool:
        return self.motion in ("3DKF", "A-3DKF")

    @property
    def use_control(self) -> bool:
        return self.motion.startswith("A-")

    def weights(self):
        """``(alpha, beta)`` normalised to sum 1; first-order association collapses to (1, 0)."""
        if self.association == "first-order":
            return 1.0, 0.0
        total = self.alpha + self.beta
        return self.alpha / total, self.beta / total

    def ablated(self, motion: str, association: str) -> "TrackerConfig":
        return replace(self, motion=motion, association=association)


@dataclass
class Track:
    id: int
    kf: KfState
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    misses: int = 0
    age: int = 0
    embedding_memory: Optional[np.ndarray] = None
    center_history: deque = field(default_factory=lambda: deque(maxlen=3))
    last_zhat: float = 0.0
    control: Optional[np.ndarray] = None
    coasted: int = 0
    pending: List[TrackRecord] = field(default_factory=list)


@dataclass
class StepInfo:
    """Diagnostics of the most recent step (used by tests and the cost dump)."""

    frame: int = 0
    components: object = None
    fused: object = None
    track_ids: tuple = ()
    merges: list = field(default_factory=list)


class Tracker:
    def __init__(self, config: TrackerConfig, camera: CameraModel, seq_info: Optional[SequenceInfo] = None):
        config.validate()
        self.config = config
        self.camera = camera
        self.seq_info = seq_info
        self.img_h = float(seq_info.img_h if seq_info else camera.img_h)
        self.w_z = config.w_z if config.w_z is not None else self.img_h / (config.lambda_q * 10.0)
        self.mats = build_matrices(use_depth=config.use_depth, sigma=config.sigma)
        self.n_ctl = self.mats.n_control
        if config.motion_provider == "flow-file":
            self.provider = FlowFileProvider.from_csv(config.flow_file)
        else:
            self.provider = DetectionDifferenceProvider()
        if config.tau_z_mode == "pixels":
            self.tau_z_steps = (self.img_h / 10.0) / self.w_z
        else:
            self.tau_z_steps = config.tau_z
        self.alpha, self.beta = config.weights()
        # std-dev of (z2 - z1) - (z1 - z0) for independent centre measurements is sqrt(6 R)
        self._u_floor = config.control_deadband * np.sqrt(6.0 * np.diag(self.mats.R)[:2])
        self.tracks: List[Track] = []
        self.next_id = 1
        self.n_spawned = 0
        self.last_frame: Optional[int] = None
        self.frame_count = 0
        self.timings: Dict[str, float] = {k: 0.0 for k in ("sode", "predict", "cost", "assign", "update")}
        self.last_step = StepInfo()
        self.on_cost: Optional[Callable[[StepInfo], None]] = None

    # -- helpers -------------------------------------------------------------

    def _z_steps(self, track: Track) -> float:
        if self.config.use_depth:
            return float(track.kf.mean[2]) / self.w_z
        return track.last_zhat

    def _predict_all(self, elapsed: int):
        live = self.tracks
        if not live:
            return
        s_idx = 3 if self.config.use_depth else 2
        vs_idx = self.mats.dim - 1
        means = np.stack([t.kf.mean for t in live])
        covs = np.stack([t.kf.cov for t in live])
        for _ in range(elapsed):
            # area must stay positive
            bad = means[:, s_idx] + means[:, vs_idx] <= 0
            means[bad, vs_idx] = 0.0
            ctl = np.zeros((len(live), self.n_ctl))
            if self.config.use_control:
                for k, t in enumerate(live):
                    if t.control is not None and t.coasted < self.config.control_coast:
                        ctl[k] = t.control
                    t.coasted += 1
            means, covs = kernels.kf_predict_batch(means, covs, self.mats.F, self.mats.G, self.mats.Q, ctl)
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise NonFiniteState(f"frame {self.last_frame}: prediction produced non-finite state")
        for k, t in enumerate(live):
            t.kf = KfState(means[k], covs[k])
            t.age += elapsed

    def _record(self, track: Track, frame: int, conf: float) -> TrackRecord:
        return TrackRecord(track.id, frame, state_box(track.kf.mean, self.config.use_depth), conf)

    # -- main loop -----------------------------------------------------------

    def step(self, frame: int, detections: Sequence[Detection]) -> List[TrackRecord]:
        cfg = self.config
        if self.last_frame is not None and frame <= self.last_frame:
            raise InvalidFrameOrder(f"frame {frame} does not follow frame {self.last_frame}")
        elapsed = 1 if self.last_frame is None else frame - self.last_frame
        self.last_frame = frame
        self.frame_count += 1
        dets = [d for d in detections if d.confidence >= cfg.min_confidence]
        info = StepInfo(frame=frame)
        self.last_step = info

        t0 = time.perf_counter()
        if dets:
            order_detections(dets, self.camera, cfg.lambda_q, cfg.moving_camera)
        t1 = time.perf_counter()
        self._predict_all(elapsed)
        t2 = time.perf_counter()

        tracks = self.tracks
        nt, no = len(tracks), len(dets)
        matches, unmatched_t, unmatched_d = [], list(range(nt)), list(range(no))
        merged_tracks = set()
        consumed = set()
        if nt and no:
            t_tlbr = np.array([state_box(t.kf.mean, cfg.use_depth).tlbr() for t in tracks])
            d_tlbr = np.array([d.bbox.tlbr() for d in dets])
            t_z = np.array([self._z_steps(t) for t in tracks])
            d_z = np.array([float(d.depth_order) for d in dets])
            # a 2D filter carries no depth: the depth gate is inert and neighbourhoods are planar
            tau_z = self.tau_z_steps if cfg.use_depth else np.inf
            zw = self.w_z if cfg.use_depth else 0.0
            t_pos = np.column_stack([(t_tlbr[:, 0] + t_tlbr[:, 2]) * 0.5, (t_tlbr[:, 1] + t_tlbr[:, 3]) * 0.5, t_z * zw])
            d_pos = np.column_stack([(d_tlbr[:, 0] + d_tlbr[:, 2]) * 0.5, (d_tlbr[:, 1] + d_tlbr[:, 3]) * 0.5, d_z * zw])
            high_order = cfg.association == "high-order"
            has_app = all(d.embedding is not None for d in dets) and all(t.embedding_memory is not None for t in tracks)
            t_emb = np.stack([t.embedding_memory for t in tracks]) if has_app else None
            d_emb = np.stack([d.embedding for d in dets]) if has_app else None
            comp, fused = build_cost(
                t_tlbr, d_tlbr, t_z, d_z, t_pos, d_pos, t_emb, d_emb,
                alpha=self.alpha, beta=self.beta, tau_z=tau_z, tau_gate=cfg.tau_gate,
                s_d=cfg.s_d, s_a=cfg.s_a, second_order=high_order,
                track_ref=np.array([t.status is not TrackStatus.LOST for t in tracks]),
            )
            info.components, info.fused, info.track_ids = comp, fused, tuple(t.id for t in tracks)
            t3 = time.perf_counter()
            result = solve(fused.C, SENTINEL)
            matched_t = {i for i, _, _ in result.matches}
            for i, j, c in result.matches:
                pair = detect_merged_detection(fused.C[:, j], cfg.tau_c) if high_order else None
                if pair is not None and i in pair:
                    other = pair[0] if pair[1] == i else pair[1]
                    if other not in matched_t and other not in merged_tracks:
                        merged_tracks.update((i, other))
                        consumed.add(j)
                        info.merges.append((tracks[i].id, tracks[other].id, j))
                        continue
                matches.append((i, j))
            unmatched_t = [i for i in range(nt) if i not in matched_t and i not in merged_tracks]
            matched_d = {j for _, j in matches} | consumed
            unmatched_d = [j for j in range(no) if j not in matched_d]
            self.timings["assign"] += time.perf_counter() - t3
            self.timings["cost"] += t3 - t2
            if self.on_cost is not None:
                self.on_cost(info)
        t4 = time.perf_counter()

        # measurement updates, batched
        if matches:
            idx = [i for i, _ in matches]
            means = np.stack([tracks[i].kf.mean for i in idx])
            covs = np.stack([tracks[i].kf.cov for i in idx])
            meas = np.stack([measurement(dets[j], self.w_z, cfg.use_depth) for _, j in matches])
            means, covs = kernels.kf_update_batch(means, covs, self.mats.H, self.mats.R, meas)
            if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
                raise NonFiniteState(f"frame {frame}: update produced non-finite state")
            for k, (i, j) in enumerate(matches):
                self._apply_match(tracks[i], dets[j], j, frame, KfState(means[k], covs[k]))

        for i in merged_tracks:
            t = tracks[i]
            if t.status is TrackStatus.LOST:
                t.status = TrackStatus.ACTIVE
        for i in unmatched_t:
            self._apply_miss(tracks[i])
        for j in unmatched_d:
            self._spawn(dets[j], j, frame)
        self.timings["update"] += time.perf_counter() - t4
        self.timings["sode"] += t1 - t0
        self.timings["predict"] += t2 - t1

        emitted: List[TrackRecord] = []
        touched = {i for i, _ in matches} | merged_tracks
        for i, t in enumerate(self.tracks):
            fresh = i in touched or (i >= nt)
            if not fresh:
                continue
            conf = 1.0
            rec = self._record(t, frame, conf)
            if t.status is TrackStatus.ACTIVE:
                emitted.extend(t.pending)
                t.pending.clear()
                emitted.append(rec)
            elif t.status is TrackStatus.TENTATIVE:
                t.pending.append(rec)
        self.tracks = [t for t in self.tracks if t.status is not TrackStatus.REMOVED]
        return emitted

    def _consistent(self, pred: KfState, det: Detection) -> bool:
        """Normalised centre innovation of ``det`` against the predicted state is within the gate."""
        innov = np.array([det.bbox.cx - pred.mean[0], det.bbox.cy - pred.mean[1]])
        S = pred.cov[:2, :2] + self.mats.R[:2, :2]
        return float(innov @ np.linalg.solve(S, innov)) <= self.config.control_gate

    def _apply_match(self, t: Track, det: Detection, det_index: int, frame: int, kf: KfState):
        cfg = self.config
        # an outlier would poison the finite differences of the next three matches
        outlier = cfg.use_control and not self._consistent(t.kf, det)
        t.kf = kf
        t.hits += 1
        t.misses = 0
        t.coasted = 0
        t.last_zhat = float(det.depth_order)
        b = det.bbox
        if outlier:
            t.center_history.clear()
        else:
            t.center_history.append(HistoryEntry(frame, b.cx, b.cy, b.bottom, det_index))
        if det.embedding is not None:
            e = det.embedding / max(np.linalg.norm(det.embedding), 1e-12)
            if t.embedding_memory is None:
                t.embedding_memory = e
            else:
                m = cfg.momentum * t.embedding_memory + (1.0 - cfg.momentum) * e
                t.embedding_memory = m / max(np.linalg.norm(m), 1e-12)
        if cfg.use_control:
            u = estimate_control(t.center_history, self.provider, self.img_h, cfg.lambda_q, self.w_z).u.copy()
            # components indistinguishable from measurement noise are dropped
            small = np.abs(u[:2]) < self._u_floor
            u[:2][small] = 0.0
            if small[1]:
                u[2] = 0.0
            t.control = u[: self.n_ctl]
        if t.status is TrackStatus.TENTATIVE and t.hits >= cfg.min_hits:
            t.status = TrackStatus.ACTIVE
        elif t.status is TrackStatus.LOST:
            t.status = TrackStatus.ACTIVE

    def _apply_miss(self, t: Track):
        t.misses += 1
        if t.status is TrackStatus.TENTATIVE:
            t.status = TrackStatus.REMOVED
        elif t.status is TrackStatus.ACTIVE:
            t.status = TrackStatus.LOST
        if t.status is TrackStatus.LOST and t.misses >= self.config.max_age:
            t.status = TrackStatus.REMOVED

    def _spawn(self, det: Detection, det_index: int, frame: int):
        cfg = self.config
        kf = init_track_state(det, self.w_z, cfg.use_depth)
        emb = None
        if det.embedding is not None:
            emb = det.embedding / max(np.linalg.norm(det.embedding), 1e-12)
        t = Track(id=self.next_id, kf=kf, embedding_memory=emb, last_zhat=float(det.depth_order))
        b = det.bbox
        t.center_history.append(HistoryEntry(frame, b.cx, b.cy, b.bottom, det_index))
        if t.hits >= cfg.min_hits:
            t.status = TrackStatus.ACTIVE
        self.next_id += 1
        self.n_spawned += 1
        self.tracks.append(t)


def detect_merged_detection(cost_column, tau_c: float = 0.1, sentinel: float = SENTINEL):
    """Row indices ``(best, second)`` when the two cheapest non-gated entries are within ``tau_c``."""
    col = np.asarray(cost_column, dtype=float)
    rows = np.flatnonzero(col < sentinel)
    if rows.size < 2:
        return None
    order = rows[np.argsort(col[rows], kind="stable")]
    a, b = int(order[0]), int(order[1])
    if col[b] - col[a] < tau_c:
        return a, b
    return None


@dataclass
class SequenceResult:
    records: List[TrackRecord]
    timings: Dict[str, float]
    n_frames: int
    elapsed: float

    @property
    def fps(self) -> float:
        return self.n_frames / self.elapsed if self.elapsed > 0 else float("inf")


def run_sequence(
    frames: Dict[int, List[Detection]],
    config: TrackerConfig,
    camera: CameraModel,
    seq_info: Optional[SequenceInfo] = None,
    on_cost=None,
) -> SequenceResult:
    """Track a whole sequence; ``frames`` maps 1-based frame index to detections.

    Frames absent from the mapping are processed as empty, up to
    ``seq_info.n_frames`` when given.
    """
    tracker = Tracker(config, camera, seq_info)
    tracker.on_cost = on_cost
    last = max(frames) if frames else 0
    if seq_info is not None:
        last = max(last, seq_info.n_frames)
    records: List[TrackRecord] = []
    start = time.perf_counter()
    for t in range(1, last + 1):
        try:
            records.extend(tracker.step(t, frames.get(t, [])))
        except NonFiniteState as exc:
            raise NonFiniteState(f"frame {t}: {exc}") from exc
    elapsed = time.perf_counter() - start
    records.sort(key=lambda r: (r.frame, r.id))
    timings = {k: 1000.0 * v for k, v in tracker.timings.items()}
    return SequenceResult(records, timings, last, elapsed)
