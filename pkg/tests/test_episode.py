"""Episode format and receding-horizon playback tests.

The chunking property (every recorded action executed exactly once, in
order, tail chunk included) is checked both on hand cases and with
hypothesis over the (n_p, n_a) grid.
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from teleopsim.episode import (
    DEFAULT_CHUNKING,
    ChunkUnderflow,
    Episode,
    EpisodeRecorder,
    FormatError,
    playback,
    record_episode,
    replay,
    replay_head_source,
)
from teleopsim.geometry import Pose, quat_angle, quat_conjugate, quat_mul
from teleopsim.pipeline import PipelineConfig
from teleopsim.trajectories import make_trajectory

CFG = PipelineConfig(width=80, height=60, render_hz=50.0, cloud_hz=5.0,
                     command_interval=0.3, transport_delay=0.05, seed=7)


def synthetic_episode(n: int) -> Episode:
    """In-memory episode whose action i encodes i (for order checking)."""
    acts = np.zeros((n, 23))
    acts[:, 22] = np.arange(n)
    return Episode(
        meta={}, stamps=0.1 * (np.arange(n) + 1), proprio=np.zeros((n, 23)), actions=acts
    )


@pytest.fixture(scope="module")
def recorded(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("ep") / "episode")
    log = record_episode(CFG, "open-table", make_trajectory("sine-yaw"), 2.0, out)
    return out, log


# -- recording --------------------------------------------------------------


def test_two_seconds_gives_twenty_steps(recorded):
    out, log = recorded
    ep = Episode.load(out)
    assert len(ep) == 20
    assert log.event_counts["record"] == 20
    np.testing.assert_allclose(ep.stamps, 0.1 * np.arange(1, 21), atol=1e-12)
    assert ep.proprio.shape == (20, 23) and ep.actions.shape == (20, 23)


def test_meta_fields(recorded):
    out, _ = recorded
    meta = json.loads(open(f"{out}/meta.json").read())
    assert meta["step_count"] == 20
    assert meta["format_version"] == 1
    assert meta["record_hz"] == 10.0
    assert meta["duration"] == 2.0
    assert meta["scene"] == "open-table"
    assert meta["config"]["mode"] == "decoupled"


def test_frames_written(recorded):
    out, _ = recorded
    ep = Episode.load(out)
    img = ep.load_frame(0)
    assert img.shape == (60, 80, 3)
    assert ep.frame_files[19] == "frames/frame_000019.png"


def test_float_exact_round_trip(recorded):
    out, _ = recorded
    a = Episode.load(out)
    b = Episode.load(out)
    np.testing.assert_array_equal(a.proprio, b.proprio)
    # JSON shortest-repr: writing the loaded values again is lossless
    rec2 = EpisodeRecorder(out + "2", save_frames=False)
    for i in range(len(a)):
        rec2.add_step(a.stamps[i], None, a.proprio[i], a.actions[i])
    rec2.finalize({})
    c = Episode.load(out + "2")
    np.testing.assert_array_equal(c.proprio, a.proprio)
    np.testing.assert_array_equal(c.actions, a.actions)


def test_metrics_only_episode(tmp_path):
    out = str(tmp_path / "noframes")
    record_episode(CFG, "open-table", make_trajectory("static"), 1.0, out, save_frames=False)
    ep = Episode.load(out)
    assert len(ep) == 10
    assert all(f is None for f in ep.frame_files)
    with pytest.raises(FormatError, match="no frame"):
        ep.load_frame(0)


# -- format errors ----------------------------------------------------------


def test_short_proprio_row_named(tmp_path):
    d = tmp_path / "bad"
    d.mkdir()
    (d / "meta.json").write_text("{}")
    good = json.dumps({"stamp": 0.1, "proprio": [0.0] * 23, "action": [0.0] * 23, "frame": None})
    bad = json.dumps({"stamp": 0.2, "proprio": [0.0] * 22, "action": [0.0] * 23, "frame": None})
    (d / "steps.jsonl").write_text(good + "\n" + bad + "\n")
    with pytest.raises(FormatError) as e:
        Episode.load(str(d))
    assert "row 1" in str(e.value) and "steps.jsonl" in str(e.value) and "23" in str(e.value)


def test_invalid_json_row_named(tmp_path):
    d = tmp_path / "badjson"
    d.mkdir()
    (d / "meta.json").write_text("{}")
    (d / "steps.jsonl").write_text("{not json\n")
    with pytest.raises(FormatError, match="row 0"):
        Episode.load(str(d))


def test_missing_meta(tmp_path):
    with pytest.raises(FormatError, match="meta.json"):
        Episode.load(str(tmp_path / "nope"))


# -- playback ---------------------------------------------------------------


def test_playback_16_8_over_32_steps():
    ep = synthetic_episode(32)
    order = [a[22] for _, a in playback(ep, (16, 8))]
    assert order == list(range(32))  # every action exactly once, in order


def test_playback_tail_partial_chunk():
    # 20 steps, (16, 8): execute 8, 8, then the final partial chunk of 4
    ep = synthetic_episode(20)
    out = [a[22] for _, a in playback(ep, (16, 8))]
    assert out == list(range(20))


def test_playback_one_one_is_identity():
    ep = synthetic_episode(7)
    got = [(s, a[22]) for s, a in playback(ep, (1, 1))]
    want = [(float(ep.stamps[i]), float(i)) for i in range(7)]
    assert got == want


def test_playback_rejects_bad_chunking():
    ep = synthetic_episode(20)
    with pytest.raises(ValueError, match="n_a=9 > n_p=8"):
        list(playback(ep, (8, 9)))
    with pytest.raises(ValueError, match="positive"):
        list(playback(ep, (0, 0)))


def test_playback_underflow():
    with pytest.raises(ChunkUnderflow, match="15"):
        list(playback(synthetic_episode(15), (16, 8)))


@settings(max_examples=80, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=60),
    n_p=st.integers(min_value=1, max_value=20),
    n_a=st.integers(min_value=1, max_value=20),
)
def test_playback_property(n, n_p, n_a):
    ep = synthetic_episode(n)
    if n_a > n_p:
        with pytest.raises(ValueError):
            list(playback(ep, (n_p, n_a)))
    elif n < n_p:
        with pytest.raises(ChunkUnderflow):
            list(playback(ep, (n_p, n_a)))
    else:
        out = [a[22] for _, a in playback(ep, (n_p, n_a))]
        assert out == list(range(n))


def test_default_chunking():
    assert DEFAULT_CHUNKING == (16, 8)


# -- replay -----------------------------------------------------------------


def test_replay_head_source_zoh():
    ep = synthetic_episode(5)
    ep.actions[:, 0] = [1, 2, 3, 4, 5]  # neck x position per step
    ep.actions[:, 3] = 1.0  # unit quaternion w
    fn = replay_head_source(ep, (1, 1))
    assert fn(0.0).position[0] == 1.0  # before first stamp: hold first
    assert fn(0.1).position[0] == 1.0
    assert fn(0.15).position[0] == 1.0
    assert fn(0.2).position[0] == 2.0
    assert fn(9.0).position[0] == 5.0


def test_replay_one_one_is_bit_exact(recorded):
    out, _ = recorded
    ep = Episode.load(out)
    _, trace = replay(ep, (1, 1))
    assert len(trace.stamps) == len(ep)
    np.testing.assert_array_equal(np.array(trace.stamps), ep.stamps)
    np.testing.assert_array_equal(np.array(trace.proprio), ep.proprio)


def test_replay_chunked_within_ik_tolerance(recorded):
    out, _ = recorded
    ep = Episode.load(out)
    _, trace = replay(ep, (16, 8))
    assert len(trace.stamps) == len(ep)
    worst_pos = worst_rot = 0.0
    for i in range(len(ep)):
        rec_neck = Pose.from_array(ep.proprio[i][0:7])
        got_neck = Pose.from_array(np.asarray(trace.proprio[i])[0:7])
        worst_pos = max(worst_pos, float(np.linalg.norm(rec_neck.position - got_neck.position)))
        worst_rot = max(
            worst_rot,
            quat_angle(quat_mul(rec_neck.orientation, quat_conjugate(got_neck.orientation))),
        )
    assert worst_pos <= 1e-4 and worst_rot <= 1e-3
