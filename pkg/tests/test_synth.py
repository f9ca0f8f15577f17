import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpmot import synth
from dpmot.errors import BehindCamera, ParseError
from dpmot.model import CameraModel
from dpmot.sode import estimate_depth_static

FLAT = CameraModel(f=1000.0, u_c=640.0, v_c=360.0, Y_c=3.0, img_w=1280.0, img_h=720.0)


def test_project_zero_angles():
    assert synth.project_point(FLAT, 0.0, 0.0, 12.0) == (640.0, 360.0 + 1000.0 * 3.0 / 12.0)


def test_project_optical_axis():
    u, v = synth.project_point(FLAT, 0.0, -3.0, 7.0)
    assert (u, v) == (640.0, 360.0)


@pytest.mark.parametrize("pitch", [0.05, 0.2, -0.1])
def test_project_pitch_two_paths(pitch):
    cam = CameraModel(f=1000.0, u_c=640.0, v_c=360.0, Y_c=3.0, theta_x=pitch)
    x, y, z = 1.3, -0.8, 15.0
    # rotate about x by hand, then translate and divide
    yc = math.cos(pitch) * y - math.sin(pitch) * z + 3.0
    zc = math.sin(pitch) * y + math.cos(pitch) * z
    u, v = synth.project_point(cam, x, y, z)
    assert abs(u - (640.0 + 1000.0 * x / zc)) < 1e-12
    assert abs(v - (360.0 + 1000.0 * yc / zc)) < 1e-12


def test_behind_camera():
    with pytest.raises(BehindCamera):
        synth.project_point(FLAT, 0.0, 0.0, -1.0)


def test_noiseless_bottoms_are_ground_projections():
    sc = synth.walkers_scene(3)
    frame = synth.render_frame(sc, 10)
    ids = [g.id for g in frame.gt]
    for det, aid in zip(frame.detections, ids):
        agent = next(a for a in sc.agents if a.agent_id == aid)
        x, z = agent.position(10)
        assert det.bbox.bottom == pytest.approx(synth.project_point(sc.camera, x, 0.0, z)[1], abs=1e-9)


def test_merge_event_drops_one_detection():
    sc = synth.crossing_scenario(2, "merge")
    ev = next(e for e in sc.occlusion_events if e.mode == "merge_boxes")
    fr = synth.render_frame(sc, ev.start)
    assert len(fr.detections) == len(fr.gt) - 1
    merged = [k for k, a in enumerate(fr.det_agents) if len(a) == 2]
    assert len(merged) == 1
    a, b = (g.bbox for g in fr.gt if g.id in fr.det_agents[merged[0]])
    u = fr.detections[merged[0]].bbox
    # a noisy union: close to the union of the clean boxes
    assert np.allclose(u.tlbr(), a.union(b).tlbr(), atol=5.0)


def test_drop_far_hides_farther_agent():
    sc = synth.crossing_scenario(2, "depth")
    ev = next(e for e in sc.occlusion_events if e.mode == "drop_far")
    fr = synth.render_frame(sc, ev.start)
    visible = {a[0] for a in fr.det_agents}
    assert 1 in visible and 2 not in visible and fr.visibility[2] == 0.0


def test_true_depth_order_ascending():
    fr = synth.render_frame(synth.static_scene(4, pitch_deg=5.0), 1)
    assert np.all(np.diff(fr.det_depths[fr.true_depth_order]) > 0)


def test_render_deterministic(tmp_path):
    sc = synth.crossing_scenario(7, "merge")
    a = synth.render_frame(sc, 33)
    b = synth.render_frame(synth.crossing_scenario(7, "merge"), 33)
    assert [d.bbox for d in a.detections] == [d.bbox for d in b.detections]
    assert all(np.array_equal(x.embedding, y.embedding) for x, y in zip(a.detections, b.detections))
    p1 = synth.write_sequence(sc, tmp_path / "one")
    p2 = synth.write_sequence(sc, tmp_path / "two")
    files = sorted(p.relative_to(p1) for p in p1.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(p2) for p in p2.rglob("*") if p.is_file())
    assert all((p1 / f).read_bytes() == (p2 / f).read_bytes() for f in files)


@pytest.mark.parametrize("pitch", [0.0, 5.0, 15.0])
def test_oracle_self_consistency(pitch):
    sc = synth.static_scene(11, pitch_deg=pitch)
    fr = synth.render_frame(sc, 1)
    for det, g in zip(fr.detections, fr.gt):
        agent = next(a for a in sc.agents if a.agent_id == g.id)
        x, z = agent.position(1)
        est = estimate_depth_static(sc.camera, det.bbox.bottom, x)
        assert abs(est.z_bar - z) <= 1e-6 * z


def test_appearance_separation():
    sc = synth.walkers_scene(0, separation=0.3, embedding_dim=4096)
    b = sc.appearance_bases()
    cos = float(b[1] @ b[2])
    assert cos == pytest.approx(0.7, abs=0.06)


@given(st.integers(0, 10_000), st.integers(2, 30), st.floats(0.1, 1.5))
def test_sample_depths(seed, n, sep):
    lo, hi = 2.0, 2.0 + n * 1.6
    z = synth.sample_depths(np.random.default_rng(seed), n, lo, hi, sep)
    s = np.sort(z)
    assert s[0] >= lo and s[-1] <= hi + 1e-9 and np.all(np.diff(s) >= sep - 1e-9)


def test_sample_depths_infeasible():
    with pytest.raises(ValueError):
        synth.sample_depths(np.random.default_rng(0), 10, 0.0, 1.0, 0.5)


@pytest.mark.parametrize(
    "sc",
    [synth.crossing_scenario(3, "merge"), synth.ego_scene(2), synth.static_scene(1, pitch_deg=15.0)],
    ids=["crossing", "ego", "static"],
)
def test_scenario_text_round_trip(sc):
    text = synth.format_scenario(sc)
    back = synth.parse_scenario(text)
    assert synth.format_scenario(back) == text
    for t in (1, sc.n_frames):
        a, b = synth.render_frame(sc, t), synth.render_frame(back, t)
        assert [d.bbox for d in a.detections] == [d.bbox for d in b.detections]


def test_example_scenario_parses():
    from pathlib import Path

    sc = synth.read_scenario(Path(__file__).parent.parent / "docs" / "example_scenario.txt")
    assert sc.name == "demo" and len(sc.agents) == 2 and sc.occlusion_events[0].mode == "merge_boxes"


@pytest.mark.parametrize(
    "text,msg",
    [
        ("img_w = 10\nimg_h = 10\n", "n_frames"),
        ("n_frames = 5\nimg_w = 10\nimg_h = 10\nbogus = 1\n", "bogus"),
        ("n_frames = 5\nimg_w = 10\nimg_h = 10\n[agents]\n1 1.7 0.5 0 0 1:0:5:wobble\n", "wobble"),
        ("n_frames = 5\nimg_w = 10\nimg_h = 10\n[occlusions]\n1 2 1 2 merge_boxes\n", "unknown agent"),
        ("n_frames = 5\nimg_w = 10\nimg_h = 10\n[people]\n", "people"),
    ],
)
def test_scenario_parse_errors(text, msg):
    with pytest.raises(ParseError, match=msg):
        synth.parse_scenario(text)


def test_keyframe_profiles():
    a = synth.Agent(1, [synth.Keyframe(1, 0.0, 10.0, "accel"), synth.Keyframe(11, 10.0, 10.0, "decel"), synth.Keyframe(21, 20.0, 10.0)])
    assert a.position(6)[0] == pytest.approx(2.5)  # tau^2 at tau = 0.5
    assert a.position(16)[0] == pytest.approx(17.5)  # 2 tau - tau^2
    assert a.position(0) is None and a.position(22) is None
