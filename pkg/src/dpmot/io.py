"""Readers and writers for MOT Challenge text files, the binary embedding sidecar,
camera calibration and tracker configuration.

Writers are byte-deterministic: numbers are printed with fixed 2-decimal
formatting and rows keep their input order.
"""
from __future__ import annotations

import configparser
import struct
import typing
from collections import defaultdict
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import BadMagic, ConfigError, DimMismatch, EmptyFile, IoFailure, MissingField, ParseError, TruncatedFile
from .model import BBox, CameraModel, Detection, SequenceInfo, TrackRecord

EMB_MAGIC = b"DPEM"
EMB_VERSION = 1
EMB_HEADER = struct.Struct("<4sBIQ")
MAX_EMB_DIM = 8192
PEDESTRIAN = 1


@dataclass(frozen=True)
class GtRecord(TrackRecord):
    considered: bool = True
    class_id: int = PEDESTRIAN
    visibility: float = 1.0


def _read_text(path) -> str:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise IoFailure(f"{path}: no such file") from None
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror}") from None
    if not text.strip():
        raise EmptyFile(path)
    return text


def _rows(path, min_fields: int, max_fields: int):
    """Yield ``(lineno, fields)`` for every non-blank line."""
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if not min_fields <= len(parts) <= max_fields:
            raise ParseError(path, lineno, f"expected {min_fields}-{max_fields} comma-separated fields, got {len(parts)}")
        yield lineno, parts


def _num(path, lineno, text, name, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise ParseError(path, lineno, f"field {name!r} is not a valid {kind.__name__}: {text!r}") from None
    if kind is float and not np.isfinite(value):
        raise ParseError(path, lineno, f"field {name!r} is not finite")
    return value


def _box(path, lineno, parts) -> BBox:
    x, y, w, h = (_num(path, lineno, parts[k], n) for k, n in zip(range(2, 6), ("bb_left", "bb_top", "bb_width", "bb_height")))
    if w <= 0 or h <= 0:
        raise ParseError(path, lineno, f"box width and height must be positive (w={w}, h={h})")
    return BBox(x, y, w, h)


def _frame(path, lineno, text) -> int:
    frame = _num(path, lineno, text, "frame", int)
    if frame < 1:
        raise ParseError(path, lineno, f"frame index must be >= 1, got {frame}")
    return frame


def parse_detections(path) -> Dict[int, List[Detection]]:
    """Frame-indexed detections, rows kept in file order within each frame."""
    out: Dict[int, List[Detection]] = defaultdict(list)
    for lineno, p in _rows(path, 7, 10):
        frame = _frame(path, lineno, p[0])
        _num(path, lineno, p[1], "id")
        box = _box(path, lineno, p)
        conf = _num(path, lineno, p[6], "conf")
        for k in range(7, len(p)):
            _num(path, lineno, p[k], "world coordinate")
        out[frame].append(Detection(frame, box, conf))
    return dict(sorted(out.items()))


def parse_gt(path) -> List[GtRecord]:
    """MOT17-style ground truth: ``frame,id,left,top,w,h,consider,class,visibility``."""
    out = []
    for lineno, p in _rows(path, 6, 10):
        frame = _frame(path, lineno, p[0])
        tid = _num(path, lineno, p[1], "id", int)
        box = _box(path, lineno, p)
        flag = _num(path, lineno, p[6], "consider") if len(p) > 6 else 1.0
        cls = _num(path, lineno, p[7], "class", int) if len(p) > 7 else PEDESTRIAN
        vis = _num(path, lineno, p[8], "visibility") if len(p) > 8 else 1.0
        considered = flag != 0 and cls in (PEDESTRIAN, -1)
        out.append(GtRecord(tid, frame, box, 1.0, considered, cls, vis))
    return out


def parse_tracks(path) -> List[TrackRecord]:
    """Tracker output in MOT submission format."""
    out = []
    for lineno, p in _rows(path, 7, 10):
        frame = _frame(path, lineno, p[0])
        tid = _num(path, lineno, p[1], "id", int)
        out.append(TrackRecord(tid, frame, _box(path, lineno, p), _num(path, lineno, p[6], "conf")))
    return out


def _fmt_box(b: BBox) -> str:
    return f"{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f}"


def format_tracks(records: Iterable[TrackRecord]) -> str:
    rows = sorted(records, key=lambda r: (r.frame, r.id))
    return "".join(f"{r.frame},{r.id},{_fmt_box(r.bbox)},{r.confidence:.2f},-1,-1,-1\n" for r in rows)


def write_tracks(path, records: Iterable[TrackRecord]):
    Path(path).write_text(format_tracks(records))


def format_detections(frames: Dict[int, Sequence[Detection]]) -> str:
    lines = []
    for frame in sorted(frames):
        for d in frames[frame]:
            lines.append(f"{frame},-1,{_fmt_box(d.bbox)},{d.confidence:.2f},-1,-1,-1\n")
    return "".join(lines)


def write_detections(path, frames: Dict[int, Sequence[Detection]]):
    Path(path).write_text(format_detections(frames))


def format_gt(records: Iterable[GtRecord]) -> str:
    lines = []
    for r in records:
        flag = 1 if getattr(r, "considered", True) else 0
        cls = getattr(r, "class_id", PEDESTRIAN)
        vis = getattr(r, "visibility", 1.0)
        lines.append(f"{r.frame},{r.id},{_fmt_box(r.bbox)},{flag},{cls},{vis:.2f}\n")
    return "".join(lines)


def write_gt(path, records: Iterable[GtRecord]):
    Path(path).write_text(format_gt(records))


# ---------------------------------------------------------------------------
# seqinfo.ini
# ---------------------------------------------------------------------------


def parse_seqinfo(path, camera: Optional[CameraModel] = None) -> SequenceInfo:
    """Read ``[Sequence]``; image size falls back to ``camera`` when absent."""
    path = Path(path)
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(_read_text(path), source=str(path))
    except configparser.Error as exc:
        raise ParseError(path, getattr(exc, "lineno", 0), str(exc).splitlines()[0]) from None
    if not parser.has_section("Sequence"):
        raise MissingField("[Sequence]", path)
    sec = parser["Sequence"]

    def get(key, kind, fallback=None):
        if key not in sec:
            if fallback is None:
                raise MissingField(key, path)
            return fallback
        try:
            return kind(sec[key])
        except ValueError:
            raise ParseError(path, 0, f"{key} is not a valid {kind.__name__}: {sec[key]!r}") from None

    img_w = get("imWidth", int, int(camera.img_w) if camera else None)
    img_h = get("imHeight", int, int(camera.img_h) if camera else None)
    emb = get("embeddingDim", int, 0) or None
    try:
        return SequenceInfo(
            name=sec.get("name", path.parent.name),
            img_w=img_w,
            img_h=img_h,
            frame_rate=get("frameRate", float, 30.0),
            n_frames=get("seqLength", int),
            embedding_dim=emb,
        )
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from None


def format_seqinfo(info: SequenceInfo) -> str:
    lines = [
        "[Sequence]",
        f"name={info.name}",
        "imDir=img1",
        f"frameRate={info.frame_rate:g}",
        f"seqLength={info.n_frames}",
        f"imWidth={info.img_w}",
        f"imHeight={info.img_h}",
        "imExt=.jpg",
    ]
    if info.embedding_dim:
        lines.append(f"embeddingDim={info.embedding_dim}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Embedding sidecar
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingFile:
    dim: int
    frames: np.ndarray  # (n,) uint32
    det_index: np.ndarray  # (n,) uint32
    vectors: np.ndarray  # (n, dim) float32

    def __len__(self):
        return int(self.frames.shape[0])

    def lookup(self) -> Dict[tuple, np.ndarray]:
        return {(int(f), int(k)): self.vectors[i] for i, (f, k) in enumerate(zip(self.frames, self.det_index))}


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("frame", "<u4"), ("det", "<u4"), ("vec", "<f4", (dim,))])


def write_embeddings(path, emb: EmbeddingFile):
    if not 1 <= emb.dim <= MAX_EMB_DIM:
        raise DimMismatch(f"embedding dim {emb.dim} outside [1, {MAX_EMB_DIM}]")
    n = len(emb)
    vecs = np.asarray(emb.vectors)
    if vecs.shape != (n, emb.dim):
        raise DimMismatch(f"vectors have shape {vecs.shape}, expected ({n}, {emb.dim})")
    body = np.zeros(n, dtype=_record_dtype(emb.dim))
    body["frame"] = emb.frames
    body["det"] = emb.det_index
    body["vec"] = vecs.astype("<f4", copy=False)
    with open(path, "wb") as fh:
        fh.write(EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, emb.dim, n))
        fh.write(body.tobytes())


def read_embeddings(path, expected_dim: Optional[int] = None) -> EmbeddingFile:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise IoFailure(f"{path}: no such file") from None
    if len(data) < 4 or data[:4] != EMB_MAGIC:
        raise BadMagic(f"{path}: not an embedding file (expected magic {EMB_MAGIC!r})")
    if len(data) < EMB_HEADER.size:
        raise TruncatedFile(path, len(data), "header ends early")
    _, version, dim, count = EMB_HEADER.unpack_from(data)
    if version != EMB_VERSION:
        raise ParseError(path, 0, f"unsupported embedding file version {version}")
    if not 1 <= dim <= MAX_EMB_DIM:
        raise DimMismatch(f"{path}: header dim {dim} outside [1, {MAX_EMB_DIM}]")
    if expected_dim is not None and dim != expected_dim:
        raise DimMismatch(f"{path}: embedding dim {dim} does not match configured {expected_dim}")
    dt = _record_dtype(dim)
    body = len(data) - EMB_HEADER.size
    if body < count * dt.itemsize:
        complete = body // dt.itemsize
        raise TruncatedFile(path, EMB_HEADER.size + complete * dt.itemsize, f"record {complete} of {count} is incomplete")
    if body > count * dt.itemsize:
        raise ParseError(path, 0, f"{body - count * dt.itemsize} bytes after the last of {count} records")
    rec = np.frombuffer(data, dtype=dt, count=count, offset=EMB_HEADER.size)
    return EmbeddingFile(int(dim), rec["frame"].copy(), rec["det"].copy(), rec["vec"].copy())


def embeddings_from_detections(frames: Dict[int, Sequence[Detection]]) -> EmbeddingFile:
    fr, idx, vecs = [], [], []
    for frame in sorted(frames):
        for k, d in enumerate(frames[frame]):
            if d.embedding is None:
                continue
            fr.append(frame)
            idx.append(k)
            vecs.append(np.asarray(d.embedding, dtype=np.float32))
    if not vecs:
        raise DimMismatch("no detection carries an embedding")
    dim = vecs[0].shape[0]
    return EmbeddingFile(dim, np.array(fr, dtype=np.uint32), np.array(idx, dtype=np.uint32), np.stack(vecs))


def attach_embeddings(frames: Dict[int, List[Detection]], emb: EmbeddingFile, path="<embeddings>"):
    """Set ``Detection.embedding`` from the sidecar; every record must name an existing detection."""
    for f, k, v in zip(emb.frames, emb.det_index, emb.vectors):
        dets = frames.get(int(f))
        if dets is None or int(k) >= len(dets):
            raise ParseError(path, 0, f"record (frame {int(f)}, det {int(k)}) has no matching detection")
        dets[int(k)].embedding = v


# ---------------------------------------------------------------------------
# Camera calibration and configuration (key = value text)
# ---------------------------------------------------------------------------


def parse_key_values(path) -> Dict[str, tuple]:
    """``{key: (value, lineno)}`` from ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(path, lineno, "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(path, lineno, "empty key")
        out[key] = (value, lineno)
    return out


CAMERA_KEYS = ("f", "u_c", "v_c", "Y_c", "theta_x", "theta_y", "theta_z", "img_w", "img_h")


def read_camera(path, img_w: float, img_h: float) -> CameraModel:
    """Calibration file, or the default camera when ``path`` is None or missing."""
    if path is None or not Path(path).exists():
        return CameraModel.default(img_w, img_h)
    kv = parse_key_values(path)
    vals = {"img_w": float(img_w), "img_h": float(img_h)}
    for key, (text, lineno) in kv.items():
        if key not in CAMERA_KEYS:
            raise ParseError(path, lineno, f"unknown calibration key {key!r}")
        vals[key] = _num(path, lineno, text, key)
    vals.setdefault("f", vals["img_h"])
    vals.setdefault("u_c", vals["img_w"] / 2.0)
    vals.setdefault("v_c", vals["img_h"] / 2.0)
    vals.setdefault("Y_c", 1.0)
    try:
        return CameraModel(**vals)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def format_camera(camera: CameraModel) -> str:
    return "".join(f"{k} = {float(getattr(camera, k))!r}\n" for k in CAMERA_KEYS)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _none_or(kind):
    def conv(text):
        return None if text.strip().lower() in ("", "none") else kind(text)

    conv.__name__ = kind.__name__
    return conv


def config_converters(config_cls) -> Dict[str, typing.Callable]:
    """Text-to-value converter for every dataclass field, derived from its annotation."""
    hints = typing.get_type_hints(config_cls)
    out = {}
    for f in fields(config_cls):
        tp = hints[f.name]
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        optional = typing.get_origin(tp) is typing.Union
        base = args[0] if optional else tp
        conv = _bool if base is bool else base
        out[f.name] = _none_or(conv) if optional else conv
    return out


def coerce_config_values(config_cls, raw: Dict[str, str], source="<flags>") -> Dict[str, object]:
    conv = config_converters(config_cls)
    out = {}
    for key, text in raw.items():
        if key not in conv:
            raise ConfigError(f"{source}: unknown configuration key {key!r}")
        try:
            out[key] = conv[key](text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: bad value for {key}: {exc}") from None
    return out


def read_config_file(path, config_cls) -> Dict[str, object]:
    kv = parse_key_values(path)
    conv = config_converters(config_cls)
    out = {}
    for key, (text, lineno) in kv.items():
        if key not in conv:
            raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
        try:
            out[key] = conv[key](text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# True depth orders
# ---------------------------------------------------------------------------


def format_truth_orders(orders: Dict[int, Sequence[int]]) -> str:
    lines = ["frame,rank,det_index\n"]
    for frame in sorted(orders):
        for rank, k in enumerate(orders[frame]):
            lines.append(f"{frame},{rank},{int(k)}\n")
    return "".join(lines)


def parse_truth_orders(path) -> Dict[int, np.ndarray]:
    """Per-frame detection indices, nearest first."""
    rows = defaultdict(list)
    for lineno, p in _rows(path, 3, 3):
        if lineno == 1 and p[0] == "frame":
            continue
        frame = _frame(path, lineno, p[0])
        rank = _num(path, lineno, p[1], "rank", int)
        k = _num(path, lineno, p[2], "det_index", int)
        rows[frame].append((rank, k))
    out = {}
    for frame, items in sorted(rows.items()):
        items.sort()
        out[frame] = np.array([k for _, k in items], dtype=np.int64)
    return out


# ---------------------------------------------------------------------------
# Sequence directories
# ---------------------------------------------------------------------------

SEQINFO = "seqinfo.ini"
DET_FILE = "det/det.txt"
GT_FILE = "gt/gt.txt"
EMB_FILE = "det/det.emb"
ORDER_FILE = "gt/depth_order.csv"
CAMERA_FILE = "calib.txt"
SEQ_CONFIG = "dpmot.cfg"


@dataclass
class LoadedSequence:
    path: Path
    info: SequenceInfo
    camera: CameraModel
    frames: Dict[int, List[Detection]]


def load_camera_and_info(seq_dir):
    seq_dir = Path(seq_dir)
    calib = seq_dir / CAMERA_FILE
    fallback = None
    if calib.exists():
        kv = parse_key_values(calib)
        if "img_w" in kv and "img_h" in kv:
            fallback = read_camera(calib, 1.0, 1.0)
    info = parse_seqinfo(seq_dir / SEQINFO, fallback)
    return info, read_camera(calib, info.img_w, info.img_h)


def load_sequence(seq_dir, embedding_dim: Optional[int] = None) -> LoadedSequence:
    """Detections of a MOT-style sequence directory, with embeddings attached when the sidecar exists."""
    seq_dir = Path(seq_dir)
    info, camera = load_camera_and_info(seq_dir)
    frames = parse_detections(seq_dir / DET_FILE)
    emb_path = seq_dir / EMB_FILE
    if emb_path.exists():
        attach_embeddings(frames, read_embeddings(emb_path, embedding_dim or info.embedding_dim), emb_path)
    return LoadedSequence(seq_dir, info, camera, frames)
