"""Synthetic ground-plane scenes rendered to detections, ground truth and true depth orders.

Agents walk on the plane ``y = 0`` along keyframed trajectories. Every
frame, each visible agent is projected through the exact pinhole model to a
box whose bottom edge is the image of its ground-contact point. Scripted
occlusion events either drop the farther agent's detection or merge the two
boxes into one, mimicking a detector that mistakes two people for one.

All randomness is drawn from ``numpy.random.default_rng`` seeded by
``(scenario.seed, frame)``, so rendering a frame is reproducible in isolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import io as seqio
from .errors import BehindCamera, ConfigError, ParseError
from .model import BBox, CameraModel, Detection, SequenceInfo, TrackRecord

PROFILES = ("linear", "accel", "decel")
OCCLUSION_MODES = ("drop_far", "merge_boxes")


def project_point(camera: CameraModel, x: float, y: float, z: float) -> Tuple[float, float]:
    """Image ``(u, v)`` of world point ``(x, y, z)``; raises ``BehindCamera`` when depth <= 0."""
    p = camera.R @ np.array([x, y, z], dtype=float)
    X, Y, Z = p[0], p[1] + camera.Y_c, p[2]
    if Z <= 1e-9:
        raise BehindCamera(f"point ({x}, {y}, {z}) has camera depth {Z:.3g}")
    return camera.u_c + camera.f * X / Z, camera.v_c + camera.f * Y / Z


def camera_depth(camera: CameraModel, x: float, y: float, z: float) -> float:
    return float(camera.R[2] @ np.array([x, y, z], dtype=float))


@dataclass
class Keyframe:
    frame: int
    x: float
    z: float
    profile: str = "linear"  # easing of the segment that starts here


@dataclass
class Agent:
    agent_id: int
    trajectory: List[Keyframe]
    height: float = 1.7
    width: float = 0.5
    appearance_seed: int = 0
    appearance_noise: float = 0.0

    def __post_init__(self):
        if len(self.trajectory) < 1:
            raise ConfigError(f"agent {self.agent_id} has an empty trajectory")
        frames = [k.frame for k in self.trajectory]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ConfigError(f"agent {self.agent_id}: keyframes must have increasing frames")
        for k in self.trajectory:
            if k.profile not in PROFILES:
                raise ConfigError(f"agent {self.agent_id}: unknown profile {k.profile!r}")

    @property
    def first_frame(self) -> int:
        return self.trajectory[0].frame

    @property
    def last_frame(self) -> int:
        return self.trajectory[-1].frame

    def position(self, frame: int) -> Optional[Tuple[float, float]]:
        kf = self.trajectory
        if frame < kf[0].frame or frame > kf[-1].frame:
            return None
        for a, b in zip(kf, kf[1:]):
            if a.frame <= frame <= b.frame:
                tau = (frame - a.frame) / (b.frame - a.frame)
                if a.profile == "accel":
                    tau = tau * tau
                elif a.profile == "decel":
                    tau = 2.0 * tau - tau * tau
                return a.x + (b.x - a.x) * tau, a.z + (b.z - a.z) * tau
        return kf[-1].x, kf[-1].z


@dataclass
class OcclusionEvent:
    start: int
    end: int
    agent_a: int
    agent_b: int
    mode: str

    def covers(self, frame: int) -> bool:
        return self.start <= frame <= self.end


@dataclass
class Scenario:
    camera: CameraModel
    agents: List[Agent]
    n_frames: int
    det_noise: float = 0.0
    occlusion_events: List[OcclusionEvent] = field(default_factory=list)
    seed: int = 0
    embedding_dim: int = 512
    separation: float = 1.0
    moving_camera: bool = False
    camera_velocity: Tuple[float, float] = (0.0, 0.0)  # ego motion (x, z) per frame, metres
    frame_rate: float = 30.0
    name: str = "synth"

    def __post_init__(self):
        ids = {a.agent_id for a in self.agents}
        if len(ids) != len(self.agents):
            raise ConfigError("agent ids must be unique")
        for ev in self.occlusion_events:
            if ev.agent_a not in ids or ev.agent_b not in ids:
                raise ConfigError(f"occlusion event references unknown agent ({ev.agent_a}, {ev.agent_b})")
            if ev.mode not in OCCLUSION_MODES:
                raise ConfigError(f"unknown occlusion mode {ev.mode!r}")
            if ev.end < ev.start:
                raise ConfigError("occlusion event ends before it starts")
        if self.moving_camera and (self.camera.theta_x or self.camera.theta_y or self.camera.theta_z):
            raise ConfigError("moving-camera scenarios use the ego frame and require zero camera angles")
        if not 0.0 <= self.separation <= 1.0:
            raise ConfigError("separation must lie in [0, 1]")
        self._bases: Optional[Dict[int, np.ndarray]] = None

    def ego_offset(self, frame: int) -> Tuple[float, float]:
        if not self.moving_camera:
            return 0.0, 0.0
        vx, vz = self.camera_velocity
        return vx * (frame - 1), vz * (frame - 1)

    def agent_camera_point(self, agent: Agent, frame: int) -> Optional[Tuple[float, float]]:
        """Ground position ``(x, z)`` of the agent in the camera's (ego) world frame."""
        pos = agent.position(frame)
        if pos is None:
            return None
        ox, oz = self.ego_offset(frame)
        return pos[0] - ox, pos[1] - oz

    def appearance_bases(self) -> Dict[int, np.ndarray]:
        """Unit base embedding per agent with pairwise cosine close to ``1 - separation``."""
        if self._bases is None:
            d = self.embedding_dim
            common = np.random.default_rng([self.seed, 0xC0]).standard_normal(d)
            common /= np.linalg.norm(common)
            out = {}
            for a in self.agents:
                own = np.random.default_rng([a.appearance_seed, 0xA9]).standard_normal(d)
                own /= np.linalg.norm(own)
                v = math.sqrt(1.0 - self.separation) * common + math.sqrt(self.separation) * own
                out[a.agent_id] = v / np.linalg.norm(v)
            self._bases = out
        return self._bases


@dataclass
class RenderedFrame:
    detections: List[Detection]
    gt: List[TrackRecord]
    true_depth_order: np.ndarray  # detection indices, nearest first
    det_depths: np.ndarray  # true camera-frame depth per detection
    det_agents: List[Tuple[int, ...]]  # agent ids behind each detection
    visibility: Dict[int, float] = field(default_factory=dict)


def agent_box(camera: CameraModel, agent: Agent, x: float, z: float) -> Optional[BBox]:
    half = agent.width / 2.0
    us, vs = [], []
    try:
        for dx in (-half, half):
            for y in (0.0, -agent.height):
                u, v = project_point(camera, x + dx, y, z)
                us.append(u)
                vs.append(v)
    except BehindCamera:
        return None
    return BBox.from_tlbr(min(us), min(vs), max(us), max(vs))


def _in_image(camera: CameraModel, b: BBox) -> bool:
    return b.x < camera.img_w and b.x + b.w > 0 and b.y < camera.img_h and b.bottom > 0


def render_frame(scenario: Scenario, frame: int) -> RenderedFrame:
    cam = scenario.camera
    rng = np.random.default_rng([scenario.seed, frame])
    bases = scenario.appearance_bases()
    d = scenario.embedding_dim
    items = []  # (agent_id, clean box, noisy box, depth, embedding)
    for agent in sorted(scenario.agents, key=lambda a: a.agent_id):
        # fixed draw count per agent keeps later agents' noise independent of visibility
        noise = rng.standard_normal(4) * scenario.det_noise
        emb_noise = rng.standard_normal(d)
        p = scenario.agent_camera_point(agent, frame)
        if p is None:
            continue
        x, z = p
        depth = camera_depth(cam, x, 0.0, z)
        if depth <= 0.1:
            continue
        box = agent_box(cam, agent, x, z)
        if box is None or not _in_image(cam, box):
            continue
        noisy = box
        if scenario.det_noise > 0:
            x1, y1, x2, y2 = box.tlbr() + noise
            if x2 - x1 > 1.0 and y2 - y1 > 1.0:
                noisy = BBox.from_tlbr(x1, y1, x2, y2)
        emb = bases[agent.agent_id] + emb_noise * (agent.appearance_noise / math.sqrt(d))
        emb = (emb / np.linalg.norm(emb)).astype(np.float32)
        items.append((agent.agent_id, box, noisy, depth, emb))

    by_id = {it[0]: k for k, it in enumerate(items)}
    gt = [TrackRecord(aid, frame, box, 1.0) for aid, box, _, _, _ in items]
    visibility = {aid: 1.0 for aid, *_ in items}
    dropped = set()
    merged = {}  # kept item index -> partner item index
    for ev in scenario.occlusion_events:
        if not ev.covers(frame):
            continue
        ka, kb = by_id.get(ev.agent_a), by_id.get(ev.agent_b)
        if ka is None or kb is None or ka in dropped or kb in dropped:
            continue
        if ev.mode == "drop_far":
            far = ka if items[ka][3] > items[kb][3] else kb
            dropped.add(far)
            visibility[items[far][0]] = 0.0
        else:
            keep, gone = min(ka, kb), max(ka, kb)
            merged[keep] = gone
            dropped.add(gone)
            visibility[items[ka][0]] = visibility[items[kb][0]] = 0.5

    dets, depths, agents_of = [], [], []
    for k, (aid, box, noisy, depth, emb) in enumerate(items):
        if k in dropped:
            continue
        if k in merged:
            other = items[merged[k]]
            noisy = noisy.union(other[2])
            mix = emb.astype(float) + other[4].astype(float)
            emb = (mix / np.linalg.norm(mix)).astype(np.float32)
            depth = min(depth, other[3])
            agents_of.append((aid, other[0]))
        else:
            agents_of.append((aid,))
        dets.append(Detection(frame, noisy, 1.0, emb))
        depths.append(depth)
    depths = np.asarray(depths, dtype=float)
    order = np.argsort(depths, kind="stable")
    return RenderedFrame(dets, gt, order, depths, agents_of, visibility)


def render(scenario: Scenario) -> List[RenderedFrame]:
    return [render_frame(scenario, t) for t in range(1, scenario.n_frames + 1)]


def detections_by_frame(rendered: Sequence[RenderedFrame]) -> Dict[int, List[Detection]]:
    return {k + 1: list(r.detections) for k, r in enumerate(rendered)}


def ground_truth(rendered: Sequence[RenderedFrame]) -> List[TrackRecord]:
    return [g for r in rendered for g in r.gt]


# ---------------------------------------------------------------------------
# Scenario description files
# ---------------------------------------------------------------------------

_SCALARS = {
    "name": str,
    "seed": int,
    "n_frames": int,
    "img_w": float,
    "img_h": float,
    "f": float,
    "u_c": float,
    "v_c": float,
    "Y_c": float,
    "theta_x": float,
    "theta_y": float,
    "theta_z": float,
    "det_noise": float,
    "embedding_dim": int,
    "separation": float,
    "moving_camera": lambda s: s.strip().lower() in ("1", "true", "yes"),
    "camera_vx": float,
    "camera_vz": float,
    "frame_rate": float,
}


def parse_scenario(text: str, path="<scenario>") -> Scenario:
    """Parse the key-value + table scenario format (see ``docs/formats.md``)."""
    values = {}
    agents: List[Agent] = []
    events: List[OcclusionEvent] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("agents", "occlusions"):
                raise ParseError(path, lineno, f"unknown section [{section}]")
            continue
        try:
            if section is None:
                if "=" not in line:
                    raise ValueError("expected 'key = value'")
                key, val = (s.strip() for s in line.split("=", 1))
                if key not in _SCALARS:
                    raise ValueError(f"unknown key {key!r}")
                values[key] = _SCALARS[key](val)
            elif section == "agents":
                tok = line.split()
                if len(tok) < 6:
                    raise ValueError("agent row needs: id height width appearance_seed appearance_noise keyframe...")
                kfs = []
                for spec in tok[5:]:
                    parts = spec.split(":")
                    if len(parts) not in (3, 4):
                        raise ValueError(f"bad keyframe {spec!r}; expected frame:x:z[:profile]")
                    prof = parts[3] if len(parts) == 4 else "linear"
                    kfs.append(Keyframe(int(parts[0]), float(parts[1]), float(parts[2]), prof))
                agents.append(Agent(int(tok[0]), kfs, float(tok[1]), float(tok[2]), int(tok[3]), float(tok[4])))
            else:
                tok = line.split()
                if len(tok) != 5:
                    raise ValueError("occlusion row needs: start end agent_a agent_b mode")
                events.append(OcclusionEvent(int(tok[0]), int(tok[1]), int(tok[2]), int(tok[3]), tok[4]))
        except (ValueError, ConfigError) as exc:
            raise ParseError(path, lineno, str(exc)) from None
    for req in ("n_frames", "img_w", "img_h"):
        if req not in values:
            raise ParseError(path, 0, f"missing required key {req!r}")
    img_w, img_h = values["img_w"], values["img_h"]
    try:
        camera = CameraModel(
            f=values.get("f", img_h),
            u_c=values.get("u_c", img_w / 2.0),
            v_c=values.get("v_c", img_h / 2.0),
            Y_c=values.get("Y_c", 1.0),
            theta_x=values.get("theta_x", 0.0),
            theta_y=values.get("theta_y", 0.0),
            theta_z=values.get("theta_z", 0.0),
            img_w=img_w,
            img_h=img_h,
        )
        return Scenario(
            camera=camera,
            agents=agents,
            n_frames=values["n_frames"],
            det_noise=values.get("det_noise", 0.0),
            occlusion_events=events,
            seed=values.get("seed", 0),
            embedding_dim=values.get("embedding_dim", 512),
            separation=values.get("separation", 1.0),
            moving_camera=values.get("moving_camera", False),
            camera_velocity=(values.get("camera_vx", 0.0), values.get("camera_vz", 0.0)),
            frame_rate=values.get("frame_rate", 30.0),
            name=values.get("name", "synth"),
        )
    except (ValueError, ConfigError) as exc:
        raise ParseError(path, 0, str(exc)) from None


def read_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), path)


def _num(v) -> str:
    # repr of a plain float round-trips exactly; numpy scalars would print their type
    return repr(float(v))


def format_scenario(sc: Scenario) -> str:
    c = sc.camera
    lines = [
        "# dpmot scenario",
        f"name = {sc.name}",
        f"seed = {sc.seed}",
        f"n_frames = {sc.n_frames}",
        f"img_w = {_num(c.img_w)}",
        f"img_h = {_num(c.img_h)}",
        f"f = {_num(c.f)}",
        f"u_c = {_num(c.u_c)}",
        f"v_c = {_num(c.v_c)}",
        f"Y_c = {_num(c.Y_c)}",
        f"theta_x = {_num(c.theta_x)}",
        f"theta_y = {_num(c.theta_y)}",
        f"theta_z = {_num(c.theta_z)}",
        f"det_noise = {_num(sc.det_noise)}",
        f"embedding_dim = {sc.embedding_dim}",
        f"separation = {_num(sc.separation)}",
        f"moving_camera = {'true' if sc.moving_camera else 'false'}",
        f"camera_vx = {_num(sc.camera_velocity[0])}",
        f"camera_vz = {_num(sc.camera_velocity[1])}",
        f"frame_rate = {_num(sc.frame_rate)}",
        "",
        "[agents]",
        "# id height width appearance_seed appearance_noise frame:x:z[:profile] ...",
    ]
    for a in sc.agents:
        kfs = " ".join(f"{k.frame}:{_num(k.x)}:{_num(k.z)}:{k.profile}" for k in a.trajectory)
        lines.append(f"{a.agent_id} {_num(a.height)} {_num(a.width)} {a.appearance_seed} {_num(a.appearance_noise)} {kfs}")
    lines += ["", "[occlusions]", "# start end agent_a agent_b mode"]
    for ev in sc.occlusion_events:
        lines.append(f"{ev.start} {ev.end} {ev.agent_a} {ev.agent_b} {ev.mode}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Scene generators used by the test-suite, the ablation harness and benchmarks
# ---------------------------------------------------------------------------


def surveillance_camera(pitch_deg: float = 10.0, img_w=1920.0, img_h=1080.0, f=1200.0, height=4.0) -> CameraModel:
    return CameraModel(f=f, u_c=img_w / 2, v_c=img_h / 2, Y_c=height, theta_x=math.radians(pitch_deg), img_w=img_w, img_h=img_h)


def sample_depths(rng, n, lo, hi, min_sep) -> np.ndarray:
    """``n`` depths in ``[lo, hi]`` pairwise at least ``min_sep`` apart, in random order.

    Sorted uniforms over the slack plus ``k * min_sep`` are uniform over the
    constrained set, so no rejection loop is needed.
    """
    slack = (hi - lo) - (n - 1) * min_sep
    if slack < 0:
        raise ValueError(f"cannot place {n} depths in [{lo}, {hi}] with separation {min_sep}")
    z = lo + np.sort(rng.uniform(0.0, slack, n)) + min_sep * np.arange(n)
    return rng.permutation(z)


def static_scene(seed: int, n_agents=10, pitch_deg=0.0, z_range=(2.0, 50.0), min_sep=0.5, det_noise=0.0, n_frames=1) -> Scenario:
    """Stationary agents at random depths; every agent stays inside the lateral field of view."""
    rng = np.random.default_rng(seed)
    cam = surveillance_camera(pitch_deg)
    z = sample_depths(rng, n_agents, z_range[0], z_range[1], min_sep)
    agents = []
    for k in range(n_agents):
        half_fov = (cam.img_w / 2 - 40) / cam.f * z[k]
        x = rng.uniform(-half_fov, half_fov)
        agents.append(Agent(k + 1, [Keyframe(1, x, z[k]), Keyframe(n_frames + 1, x, z[k])], appearance_seed=seed * 100 + k))
    return Scenario(cam, agents, n_frames, det_noise=det_noise, seed=seed, embedding_dim=16, name=f"static-{seed}")


def ego_scene(seed: int, n_agents=10, n_frames=20, z_range=(4.0, 40.0), min_sep=0.5, speed=0.3, det_noise=0.0) -> Scenario:
    """Camera translating forward at constant height past stationary and walking agents."""
    rng = np.random.default_rng(seed)
    cam = CameraModel(f=1200.0, u_c=960.0, v_c=540.0, Y_c=1.5, img_w=1920.0, img_h=1080.0)
    travel = speed * n_frames
    z = sample_depths(rng, n_agents, z_range[0] + travel, z_range[1] + travel, min_sep)
    agents = []
    for k in range(n_agents):
        half = (cam.img_w / 2 - 40) / cam.f * (z[k] - travel)
        x = rng.uniform(-half, half)
        agents.append(Agent(k + 1, [Keyframe(1, x, z[k]), Keyframe(n_frames + 1, x, z[k])], appearance_seed=seed * 100 + k))
    return Scenario(cam, agents, n_frames, det_noise=det_noise, seed=seed, embedding_dim=16, moving_camera=True, camera_velocity=(0.0, speed), name=f"ego-{seed}")


def walkers_scene(seed: int, n_agents=5, n_frames=100, det_noise=0.0, separation=1.0, embedding_dim=64) -> Scenario:
    """Agents walking parallel lanes at distinct depths; no crossings, all visible from frame 1."""
    rng = np.random.default_rng(seed)
    cam = surveillance_camera(10.0)
    depths = 8.0 + 4.0 * np.arange(n_agents)
    agents = []
    for k in range(n_agents):
        z = depths[k]
        half = (cam.img_w / 2 - 100) / cam.f * z
        x0 = rng.uniform(-half, -0.3 * half)
        x1 = rng.uniform(0.3 * half, half)
        if rng.random() < 0.5:
            x0, x1 = x1, x0
        agents.append(Agent(k + 1, [Keyframe(1, x0, z), Keyframe(n_frames, x1, z)], appearance_seed=seed * 100 + k, appearance_noise=0.05))
    return Scenario(cam, agents, n_frames, det_noise=det_noise, seed=seed, embedding_dim=embedding_dim, separation=separation, name=f"walkers-{seed}")


def clean_box(scenario: Scenario, agent: Agent, frame: int) -> Optional[BBox]:
    p = scenario.agent_camera_point(agent, frame)
    return None if p is None else agent_box(scenario.camera, agent, *p)


def pair_iou_series(scenario: Scenario, a: Agent, b: Agent) -> np.ndarray:
    """Noiseless box IoU of two agents per frame (index 0 is frame 1)."""
    out = np.zeros(scenario.n_frames)
    for t in range(1, scenario.n_frames + 1):
        ba, bb = clean_box(scenario, a, t), clean_box(scenario, b, t)
        if ba is None or bb is None:
            continue
        x1, y1 = max(ba.x, bb.x), max(ba.y, bb.y)
        x2, y2 = min(ba.x + ba.w, bb.x + bb.w), min(ba.bottom, bb.bottom)
        inter = max(0.0, x2 - x1) * max(0.0, y2 - y1)
        out[t - 1] = inter / (ba.w * ba.h + bb.w * bb.h - inter)
    return out


def crossing_scenario(
    seed: int,
    kind: str = "merge",
    n_frames: int = 80,
    det_noise: float = 1.0,
    separation: float = 0.02,
    appearance_noise: float = 0.05,
    bystanders: int = 3,
    merge_iou: float = 0.3,
    drop_iou: float = 0.4,
    embedding_dim: int = 64,
) -> Scenario:
    """Two look-alike agents crossing in opposite directions among bystanders.

    ``kind="merge"``: the pair walks side by side in depth; the detector
    returns one union box on the first frame their boxes overlap by
    ``merge_iou`` and loses the farther agent while the overlap exceeds
    ``drop_iou``. ``kind="depth"``: the pair is separated by roughly four
    depth steps and the farther agent is hidden for the whole overlap. Either
    agent may speed up or slow down after the crossing.
    """
    if kind not in ("merge", "depth"):
        raise ConfigError(f"unknown crossing kind {kind!r}")
    rng = np.random.default_rng([seed, 0x5C])
    cam = surveillance_camera(10.0)
    if kind == "merge":
        z_a = rng.uniform(6.5, 12.0)
        z_b = z_a + rng.uniform(0.3, 1.0)
    else:
        z_a = rng.uniform(6.5, 9.0)
        z_b = z_a + rng.uniform(3.5, 5.0)
    tc = n_frames // 2 + int(rng.integers(-5, 6))
    v_a, v_b = rng.uniform(0.04, 0.07, size=2)
    xc = rng.uniform(-1.0, 1.0)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    scale = {"accel": 1.6, "decel": 0.6, "linear": 1.0}
    agents = []
    for aid, z, v, d in ((1, z_a, v_a, sign), (2, z_b, v_b, -sign)):
        prof = str(rng.choice(["accel", "decel", "linear"]))
        tail = d * v * (n_frames - tc) * scale[prof]
        traj = [Keyframe(1, xc - d * v * (tc - 1), z), Keyframe(tc, xc, z, prof), Keyframe(n_frames, xc + tail, z)]
        agents.append(Agent(aid, traj, appearance_seed=seed * 10 + aid, appearance_noise=appearance_noise))
    for k in range(bystanders):
        z = rng.uniform(5.5, 25.0)
        half = (cam.img_w / 2 - 100) / cam.f * z
        x0 = rng.uniform(-half, half)
        x1 = float(np.clip(x0 + rng.uniform(-2.0, 2.0), -half, half))
        traj = [Keyframe(1, x0, z), Keyframe(n_frames, x1, z + rng.uniform(-1.0, 1.0))]
        agents.append(Agent(3 + k, traj, appearance_seed=seed * 10 + 3 + k, appearance_noise=appearance_noise))
    sc = Scenario(cam, agents, n_frames, det_noise=det_noise, seed=seed, embedding_dim=embedding_dim, separation=separation, name=f"crossing-{kind}-{seed}")
    iou = pair_iou_series(sc, agents[0], agents[1])
    frames = np.arange(1, n_frames + 1)
    events = []
    if kind == "merge":
        first = int(frames[iou >= merge_iou][0])
        events.append(OcclusionEvent(first, first, 1, 2, "merge_boxes"))
        hidden = frames[(iou >= drop_iou) & (frames > first)]
    else:
        hidden = frames[iou > 0.0]
    if hidden.size:
        events.append(OcclusionEvent(int(hidden[0]), int(hidden[-1]), 1, 2, "drop_far"))
    sc.occlusion_events = events
    sc.__post_init__()
    return sc


def adversarial_suite(n: int = 30, base_seed: int = 0) -> List[Scenario]:
    """Crossing scenarios: two side-by-side merge crossings for every depth-separated one."""
    return [crossing_scenario(base_seed + k, "depth" if k % 3 == 2 else "merge") for k in range(n)]


def pacing_scene(seed: int, n_agents: int = 20, n_frames: int = 1000, det_noise: float = 1.0, embedding_dim: int = 128) -> Scenario:
    """Agents pacing back and forth across the view at distinct depths for a long sequence."""
    rng = np.random.default_rng([seed, 0xFA])
    cam = surveillance_camera(10.0)
    z = sample_depths(rng, n_agents, 6.0, 30.0, 0.8)
    agents = []
    for k in range(n_agents):
        half = (cam.img_w / 2 - 100) / cam.f * z[k]
        seg = int(rng.integers(120, 260))
        x = rng.uniform(-half, half)
        traj = [Keyframe(1, x, z[k])]
        t = 1
        while t < n_frames:
            t = min(n_frames, t + seg)
            x = -x if abs(x) > 0.3 * half else float(rng.uniform(-half, half))
            traj.append(Keyframe(t, x, z[k]))
        agents.append(Agent(k + 1, traj, appearance_seed=seed * 1000 + k, appearance_noise=0.05))
    return Scenario(cam, agents, n_frames, det_noise=det_noise, seed=seed, embedding_dim=embedding_dim, separation=0.8, name=f"pacing-{seed}")


def write_sequence(scenario: Scenario, root) -> Path:
    """Render ``scenario`` into a MOT-style directory ``root/<name>`` and return its path."""
    out = Path(root) / scenario.name
    (out / "det").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    rendered = render(scenario)
    frames = detections_by_frame(rendered)
    cam = scenario.camera
    info = SequenceInfo(scenario.name, int(round(cam.img_w)), int(round(cam.img_h)), scenario.frame_rate, scenario.n_frames, scenario.embedding_dim)
    gt = [
        seqio.GtRecord(g.id, g.frame, g.bbox, 1.0, visibility=r.visibility.get(g.id, 1.0))
        for r in rendered
        for g in r.gt
    ]
    (out / seqio.SEQINFO).write_text(seqio.format_seqinfo(info))
    seqio.write_detections(out / seqio.DET_FILE, frames)
    seqio.write_gt(out / seqio.GT_FILE, gt)
    if any(frames.values()):
        seqio.write_embeddings(out / seqio.EMB_FILE, seqio.embeddings_from_detections(frames))
    orders = {k + 1: r.true_depth_order for k, r in enumerate(rendered)}
    (out / seqio.ORDER_FILE).write_text(seqio.format_truth_orders(orders))
    (out / seqio.CAMERA_FILE).write_text(seqio.format_camera(cam))
    if scenario.moving_camera:
        (out / seqio.SEQ_CONFIG).write_text("moving_camera = true\n")
    (out / "scenario.txt").write_text(format_scenario(scenario))
    return out
