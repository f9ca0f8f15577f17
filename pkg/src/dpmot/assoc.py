"""Track-detection cost matrix.

First-order terms compare a track with a detection directly (appearance
cosine, depth-gated IoU). Second-order terms compare each object's sorted
distances to the other objects on its own side, so a track and a detection
with the same "neighbourhood signature" look alike even when the pairwise
terms are ambiguous.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import UnsortedInput, ZeroVector

SENTINEL = 1e9


@dataclass
class CostComponents:
    C_a: np.ndarray
    C_diou: np.ndarray
    C_Pd: np.ndarray
    C_Pa: np.ndarray
    has_appearance: bool = True


@dataclass
class FusedCost:
    C: np.ndarray
    gate_mask: np.ndarray
    alpha: float
    beta: float
    tau_z: float
    tau_gate: float


def _normalise(emb: np.ndarray) -> np.ndarray:
    emb = np.asarray(emb, dtype=float)
    norms = np.linalg.norm(emb, axis=1)
    if emb.shape[0] and norms.min() < 1e-12:
        raise ZeroVector("appearance embedding has zero norm")
    return emb / norms[:, None]


def appearance_matrix(track_emb: np.ndarray, det_emb: np.ndarray) -> np.ndarray:
    a = _normalise(track_emb)
    b = _normalise(det_emb)
    return np.clip(a @ b.T, -1.0, 1.0)


def iou_matrix(a_tlbr: np.ndarray, b_tlbr: np.ndarray) -> np.ndarray:
    a = np.asarray(a_tlbr, dtype=float).reshape(-1, 4)
    b = np.asarray(b_tlbr, dtype=float).reshape(-1, 4)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def diou_matrix(track_tlbr, det_tlbr, track_z, det_z, tau_z=3.0) -> np.ndarray:
    """IoU, zeroed wherever the two depth orders differ by ``tau_z`` steps or more."""
    iou = iou_matrix(track_tlbr, det_tlbr)
    dz = np.abs(np.asarray(track_z, dtype=float)[:, None] - np.asarray(det_z, dtype=float)[None, :])
    return iou * (dz < tau_z)


def _neighbour_rows(dist: np.ndarray, ref=None):
    """Ascending off-diagonal distances per row, restricted to reference columns.

    Returns ``(rows, lengths)``; row ``k`` is padded after ``lengths[k]`` entries.
    """
    n = dist.shape[0]
    keep = np.ones((n, n), dtype=bool) if ref is None else np.repeat(np.asarray(ref, dtype=bool)[None, :], n, axis=0)
    keep &= ~np.eye(n, dtype=bool)
    lengths = keep.sum(axis=1).astype(np.int64)
    width = int(lengths.max()) if n else 0
    rows = np.where(keep, dist, np.inf)
    rows.sort(axis=1)
    rows = rows[:, :width]
    return np.where(np.isfinite(rows), rows, 0.0), lengths


def _euclidean(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def sorted_distance_rows(positions: np.ndarray) -> np.ndarray:
    """Row ``k`` holds the ascending distances from object ``k`` to every other object."""
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    if n <= 1:
        return np.zeros((n, 0))
    return _neighbour_rows(_euclidean(pos))[0]


def sorted_distance_vector(k: int, positions: np.ndarray) -> np.ndarray:
    return sorted_distance_rows(positions)[k]


def _cosine_distances(emb: np.ndarray) -> np.ndarray:
    e = _normalise(emb)
    return 1.0 - np.clip(e @ e.T, -1.0, 1.0)


def sorted_cosine_distance_rows(emb: np.ndarray) -> np.ndarray:
    n = np.asarray(emb).shape[0]
    if n <= 1:
        return np.zeros((n, 0))
    return _neighbour_rows(_cosine_distances(emb))[0]


def _check_sorted(vec: np.ndarray, name: str):
    if vec.size > 1 and np.any(np.diff(vec) < 0):
        raise UnsortedInput(f"{name} must be sorted ascending")


def align_distance(d_tilde, d) -> float:
    """Distance between two ascending vectors after aligning their first elements.

    ``j`` is the index of the element of ``d`` nearest to ``d_tilde[0]``
    (smallest index on ties); the result sums ``|d_tilde[i] - d[j + i]|`` over
    the indices that exist in ``d``.
    """
    dt = np.ascontiguousarray(d_tilde, dtype=float)
    dd = np.ascontiguousarray(d, dtype=float)
    _check_sorted(dt, "d_tilde")
    _check_sorted(dd, "d")
    return float(kernels.align_pair(dt, dt.size, dd, dd.size))


def align_rows(track_rows: np.ndarray, det_rows: np.ndarray, track_len=None, det_len=None) -> np.ndarray:
    nt, no = track_rows.shape[0], det_rows.shape[0]
    if nt == 0 or no == 0:
        return np.zeros((nt, no))
    if track_len is None:
        track_len = np.full(nt, track_rows.shape[1], dtype=np.int64)
    if det_len is None:
        det_len = np.full(no, det_rows.shape[1], dtype=np.int64)
    return kernels.align_matrix(
        np.ascontiguousarray(track_rows, dtype=float),
        np.ascontiguousarray(track_len, dtype=np.int64),
        np.ascontiguousarray(det_rows, dtype=float),
        np.ascontiguousarray(det_len, dtype=np.int64),
    )


def second_order_matrices(track_pos, det_pos, track_emb=None, det_emb=None, track_ref=None):
    """``(C_Pd, C_Pa)``; ``C_Pa`` is all zeros when either side lacks embeddings.

    ``track_ref`` optionally masks which tracks count as neighbours; every
    track still gets a row, measured against the masked set.
    """
    track_pos = np.asarray(track_pos, dtype=float).reshape(-1, 3)
    det_pos = np.asarray(det_pos, dtype=float).reshape(-1, 3)
    nt, no = track_pos.shape[0], det_pos.shape[0]
    if nt == 0 or no == 0:
        return np.zeros((nt, no)), np.zeros((nt, no))
    t_rows, t_len = _neighbour_rows(_euclidean(track_pos), track_ref)
    d_rows, d_len = _neighbour_rows(_euclidean(det_pos))
    c_pd = align_rows(t_rows, d_rows, t_len, d_len)
    if track_emb is None or det_emb is None:
        c_pa = np.zeros_like(c_pd)
    else:
        t_rows, t_len = _neighbour_rows(_cosine_distances(track_emb), track_ref)
        d_rows, d_len = _neighbour_rows(_cosine_distances(det_emb))
        c_pa = align_rows(t_rows, d_rows, t_len, d_len)
    return c_pd, c_pa


def fuse(
    comp: CostComponents,
    alpha: float = 0.6,
    beta: float = 0.4,
    tau_gate: float = 1.0,
    s_d: float = 100.0,
    s_a: float = 0.5,
    tau_z: float = 3.0,
) -> FusedCost:
    # without embeddings the appearance term carries no information, so it costs nothing
    cost_a = (1.0 - comp.C_a) / 2.0 if comp.has_appearance else np.zeros_like(comp.C_a)
    cost_diou = 1.0 - comp.C_diou
    cost_pd = 1.0 - np.exp(-comp.C_Pd / s_d)
    cost_pa = 1.0 - np.exp(-comp.C_Pa / s_a)
    C = alpha * (cost_a + cost_diou) + beta * (cost_pa + cost_pd)
    no_overlap = cost_diou >= 1.0
    if comp.has_appearance:
        hard = no_overlap & (cost_a > 0.8)
    else:
        hard = no_overlap
    gate = (C > tau_gate) | hard
    C = np.where(gate, SENTINEL, C)
    return FusedCost(C, gate, alpha, beta, tau_z, tau_gate)


def build_cost(
    track_tlbr,
    det_tlbr,
    track_z,
    det_z,
    track_pos,
    det_pos,
    track_emb: Optional[np.ndarray] = None,
    det_emb: Optional[np.ndarray] = None,
    *,
    alpha=0.6,
    beta=0.4,
    tau_z=3.0,
    tau_gate=1.0,
    s_d=100.0,
    s_a=0.5,
    second_order=True,
    track_ref=None,
):
    """Assemble all components and fuse them; returns ``(CostComponents, FusedCost)``."""
    nt, no = len(track_tlbr), len(det_tlbr)
    has_app = track_emb is not None and det_emb is not None
    c_a = appearance_matrix(track_emb, det_emb) if has_app else np.zeros((nt, no))
    c_diou = diou_matrix(track_tlbr, det_tlbr, track_z, det_z, tau_z)
    if second_order and beta > 0:
        c_pd, c_pa = second_order_matrices(track_pos, det_pos, track_emb, det_emb, track_ref)
    else:
        c_pd = np.zeros((nt, no))
        c_pa = np.zeros((nt, no))
    comp = CostComponents(c_a, c_diou, c_pd, c_pa, has_app)
    return comp, fuse(comp, alpha, beta, tau_gate, s_d, s_a, tau_z)
