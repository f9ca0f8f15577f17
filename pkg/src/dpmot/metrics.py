"""Tracking evaluation: CLEAR-MOT counts, IDF1 and depth-ordering LCS accuracy."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np

from . import kernels
from .assign import linear_assignment
from .assoc import iou_matrix
from .errors import EmptyGroundTruth, MismatchedIndexSets

TABLE_COLUMNS = ("MOTA", "IDF1", "MT", "ML", "ID Sw.")


@dataclass(frozen=True)
class MotReport:
    mota: float
    idf1: float
    mt: int
    ml: int
    id_switches: int
    fragments: int
    fp: int
    fn: int
    gt_count: int
    idtp: float = 0.0
    n_hyp: int = 0

    def as_dict(self):
        return asdict(self)

    def table_row(self):
        """Values in ``TABLE_COLUMNS`` order, rates in percent."""
        return (100.0 * self.mota, 100.0 * self.idf1, self.mt, self.ml, self.id_switches)


def _considered(rec) -> bool:
    return getattr(rec, "considered", True)


def _by_frame(records: Iterable) -> Dict[int, list]:
    out = defaultdict(list)
    for r in records:
        out[r.frame].append(r)
    return out


def _tlbr(records) -> np.ndarray:
    if not records:
        return np.zeros((0, 4))
    return np.array([r.bbox.tlbr() for r in records])


def _match(iou: np.ndarray, threshold: float):
    """Max-IoU one-to-one matching restricted to pairs with ``iou >= threshold``."""
    if iou.size == 0:
        return []
    cost = np.where(iou >= threshold, 1.0 - iou, 1e6)
    return [(int(r), int(c)) for r, c in linear_assignment(cost) if iou[r, c] >= threshold]


def _prepare(gt, hyp, iou_threshold):
    """Per-frame (gt list, hyp list) with hypotheses sitting on ignored GT removed."""
    gt_f = _by_frame(gt)
    hyp_f = _by_frame(hyp)
    frames = sorted(set(gt_f) | set(hyp_f))
    out = []
    for t in frames:
        g_all = gt_f.get(t, [])
        h = hyp_f.get(t, [])
        g_keep = [g for g in g_all if _considered(g)]
        if len(g_keep) != len(g_all) and h:
            pairs = _match(iou_matrix(_tlbr(g_all), _tlbr(h)), iou_threshold)
            drop = {c for r, c in pairs if not _considered(g_all[r])}
            h = [x for k, x in enumerate(h) if k not in drop]
        out.append((t, g_keep, h))
    return out


def _idf1_from_frames(frames, iou_threshold) -> float:
    idtp, n_gt, n_hyp = _id_counts(frames, iou_threshold)
    if n_gt + n_hyp == 0:
        return 1.0
    return 2.0 * idtp / (n_gt + n_hyp)


def _id_counts(frames, iou_threshold):
    """``(idtp, n_gt, n_hyp)`` under the optimal global one-to-one id mapping."""
    gt_ids = sorted({g.id for _, gs, _ in frames for g in gs})
    hyp_ids = sorted({h.id for _, _, hs in frames for h in hs})
    n_gt = sum(len(gs) for _, gs, _ in frames)
    n_hyp = sum(len(hs) for _, _, hs in frames)
    if not gt_ids or not hyp_ids:
        return 0.0, n_gt, n_hyp
    gi = {k: i for i, k in enumerate(gt_ids)}
    hi = {k: i for i, k in enumerate(hyp_ids)}
    overlap = np.zeros((len(gt_ids), len(hyp_ids)))
    for _, gs, hs in frames:
        if not gs or not hs:
            continue
        iou = iou_matrix(_tlbr(gs), _tlbr(hs))
        rr, cc = np.nonzero(iou >= iou_threshold)
        for r, c in zip(rr, cc):
            overlap[gi[gs[r].id], hi[hs[c].id]] += 1
    pairs = linear_assignment(-overlap)
    idtp = float(sum(overlap[r, c] for r, c in pairs))
    return idtp, n_gt, n_hyp


def idf1(gt: Sequence, hyp: Sequence, iou_threshold: float = 0.5) -> float:
    frames = _prepare(gt, hyp, iou_threshold)
    if sum(len(gs) for _, gs, _ in frames) == 0:
        raise EmptyGroundTruth("ground truth contains no evaluated boxes")
    return _idf1_from_frames(frames, iou_threshold)


def clear_mot(gt: Sequence, hyp: Sequence, iou_threshold: float = 0.5) -> MotReport:
    frames = _prepare(gt, hyp, iou_threshold)
    gt_count = sum(len(gs) for _, gs, _ in frames)
    if gt_count == 0:
        raise EmptyGroundTruth("ground truth contains no evaluated boxes")

    last_match: Dict[int, int] = {}  # gt id -> most recently matched hyp id
    tracked: Dict[int, List[bool]] = defaultdict(list)
    fp = fn = switches = 0
    for _, gs, hs in frames:
        iou = iou_matrix(_tlbr(gs), _tlbr(hs)) if gs and hs else np.zeros((len(gs), len(hs)))
        h_index = {h.id: k for k, h in enumerate(hs)}
        pairs = {}
        # keep last correspondences that are still valid
        for r, g in enumerate(gs):
            prev = last_match.get(g.id)
            c = h_index.get(prev)
            if c is not None and iou[r, c] >= iou_threshold and c not in pairs.values():
                pairs[r] = c
        free_r = [r for r in range(len(gs)) if r not in pairs]
        used_c = set(pairs.values())
        free_c = [c for c in range(len(hs)) if c not in used_c]
        if free_r and free_c:
            sub = iou[np.ix_(free_r, free_c)]
            for a, b in _match(sub, iou_threshold):
                r, c = free_r[a], free_c[b]
                pairs[r] = c
                prev = last_match.get(gs[r].id)
                if prev is not None and prev != hs[c].id:
                    switches += 1
        for r, g in enumerate(gs):
            if r in pairs:
                last_match[g.id] = hs[pairs[r]].id
            tracked[g.id].append(r in pairs)
        fn += len(gs) - len(pairs)
        fp += len(hs) - len(pairs)

    mt = ml = frag = 0
    for flags in tracked.values():
        ratio = sum(flags) / len(flags)
        if ratio >= 0.8:
            mt += 1
        if ratio <= 0.2:
            ml += 1
        # interruptions that are later resumed
        hit = np.flatnonzero(flags)
        if hit.size:
            frag += int(np.sum(np.diff(hit) > 1))
    mota = 1.0 - (fn + fp + switches) / gt_count
    idtp, _, n_hyp = _id_counts(frames, iou_threshold)
    return MotReport(
        mota=mota,
        idf1=2.0 * idtp / (gt_count + n_hyp),
        mt=mt,
        ml=ml,
        id_switches=switches,
        fragments=frag,
        fp=fp,
        fn=fn,
        gt_count=gt_count,
        idtp=idtp,
        n_hyp=n_hyp,
    )


def combine(reports: Sequence[MotReport]) -> MotReport:
    """Pool several sequences: counts add, MOTA and IDF1 are recomputed from the sums."""
    if not reports:
        raise EmptyGroundTruth("no reports to combine")
    tot = {k: sum(getattr(r, k) for r in reports) for k in ("mt", "ml", "id_switches", "fragments", "fp", "fn", "gt_count", "idtp", "n_hyp")}
    gt = tot["gt_count"]
    return MotReport(
        mota=1.0 - (tot["fn"] + tot["fp"] + tot["id_switches"]) / gt,
        idf1=2.0 * tot["idtp"] / (gt + tot["n_hyp"]),
        **tot,
    )


def lcs_accuracy(d_truth, d_estimated) -> float:
    truth = np.asarray(d_truth, dtype=np.int64)
    est = np.asarray(d_estimated, dtype=np.int64)
    if truth.size == 0:
        raise MismatchedIndexSets("depth orderings are empty")
    if truth.size != est.size or not np.array_equal(np.sort(truth), np.sort(est)):
        raise MismatchedIndexSets("orderings are not permutations of the same index set")
    if np.unique(truth).size != truth.size:
        raise MismatchedIndexSets("orderings contain repeated indices")
    return int(kernels.lcs_length(truth, est)) * 100.0 / truth.size


def frame_lcs(truth: Dict[int, Sequence[int]], estimated: Dict[int, Sequence[int]]):
    """Per-frame ``(frame, n, accuracy)`` rows and the count-weighted aggregate accuracy."""
    rows = []
    hit = total = 0
    for frame in sorted(set(truth) | set(estimated)):
        t = truth.get(frame)
        e = estimated.get(frame)
        if t is None or e is None:
            raise MismatchedIndexSets("frame present in only one ordering", frame=frame)
        if len(t) == 0 and len(e) == 0:
            continue
        try:
            acc = lcs_accuracy(t, e)
        except MismatchedIndexSets as exc:
            raise MismatchedIndexSets(str(exc), frame=frame) from None
        rows.append((frame, len(t), acc))
        hit += int(kernels.lcs_length(np.asarray(t, dtype=np.int64), np.asarray(e, dtype=np.int64)))
        total += len(t)
    if total == 0:
        raise MismatchedIndexSets("depth orderings are empty")
    return rows, hit * 100.0 / total
