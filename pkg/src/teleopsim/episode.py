"""Episode recording and receding-horizon playback.

An episode directory holds:

    meta.json                run configuration and counts
    steps.jsonl              one JSON object per 10 Hz step
    frames/frame_%06d.png    the displayed view at each step (optional)

Each step stores the 23-float proprio vector [neck pose 7 | left 7 |
right 7 | gripper widths 2], the matching 23-float action (commanded
targets), the stamp in simulation seconds, and the frame filename.
Floats survive a JSON round trip exactly (shortest-repr encoding).

`playback` walks the episode the way a chunked policy executor would:
predict a chunk of n_p future actions, execute the first n_a, re-predict.
Every action is executed exactly once; the final partial chunk is executed
to its end.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .pipeline import (
    MetricsLog,
    PipelineConfig,
    PROPRIO_DIM,
    VirtualPipeline,
    resolve_scene,
)
from .geometry import Pose

DEFAULT_CHUNKING = (16, 8)  # predict 16 steps, execute 8, re-predict


class FormatError(ValueError):
    """Malformed episode file; message names the file and row."""


class ChunkUnderflow(ValueError):
    """Episode shorter than one prediction horizon."""


class EpisodeRecorder:
    """Collects steps during a pipeline run and writes the episode layout."""

    def __init__(self, out_dir: str, save_frames: bool = True):
        self.out_dir = out_dir
        self.save_frames = save_frames
        self.steps: list[dict] = []
        os.makedirs(os.path.join(out_dir, "frames"), exist_ok=True)

    def add_step(self, stamp: float, rgb, proprio: np.ndarray, action: np.ndarray) -> None:
        idx = len(self.steps)
        frame_name = f"frames/frame_{idx:06d}.png"
        if self.save_frames and rgb is not None:
            Image.fromarray(rgb).save(os.path.join(self.out_dir, frame_name))
        else:
            frame_name = None
        self.steps.append(
            {
                "stamp": float(stamp),
                "proprio": [float(v) for v in proprio],
                "action": [float(v) for v in action],
                "frame": frame_name,
            }
        )

    def finalize(self, meta: dict) -> None:
        meta = dict(meta)
        meta["step_count"] = len(self.steps)
        meta["format_version"] = 1
        with open(os.path.join(self.out_dir, "meta.json"), "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
            f.write("\n")
        with open(os.path.join(self.out_dir, "steps.jsonl"), "w") as f:
            for s in self.steps:
                f.write(json.dumps(s, sort_keys=True) + "\n")


@dataclass
class Episode:
    meta: dict
    stamps: np.ndarray  # (N,)
    proprio: np.ndarray  # (N, 23)
    actions: np.ndarray  # (N, 23)
    frame_files: list = field(default_factory=list)
    path: str = ""

    def __len__(self):
        return len(self.stamps)

    @staticmethod
    def load(path: str) -> "Episode":
        meta_path = os.path.join(path, "meta.json")
        steps_path = os.path.join(path, "steps.jsonl")
        if not os.path.exists(meta_path):
            raise FormatError(f"{meta_path}: missing")
        with open(meta_path) as f:
            meta = json.load(f)
        stamps, proprio, actions, frames = [], [], [], []
        with open(steps_path) as f:
            for i, line in enumerate(f):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as e:
                    raise FormatError(f"{steps_path}: row {i}: invalid JSON: {e}") from e
                p = row.get("proprio")
                a = row.get("action")
                if not isinstance(p, list) or len(p) != PROPRIO_DIM:
                    raise FormatError(
                        f"{steps_path}: row {i}: proprio must have {PROPRIO_DIM} floats, "
                        f"got {len(p) if isinstance(p, list) else type(p).__name__}"
                    )
                if not isinstance(a, list) or len(a) != PROPRIO_DIM:
                    raise FormatError(
                        f"{steps_path}: row {i}: action must have {PROPRIO_DIM} floats, "
                        f"got {len(a) if isinstance(a, list) else type(a).__name__}"
                    )
                stamps.append(float(row["stamp"]))
                proprio.append(p)
                actions.append(a)
                frames.append(row.get("frame"))
        return Episode(
            meta=meta,
            stamps=np.array(stamps),
            proprio=np.array(proprio),
            actions=np.array(actions),
            frame_files=frames,
            path=path,
        )

    def load_frame(self, i: int) -> np.ndarray:
        name = self.frame_files[i]
        if name is None:
            raise FormatError(f"step {i} has no frame (metrics-only episode)")
        return np.asarray(Image.open(os.path.join(self.path, name)))


def playback(episode: Episode, chunking: tuple[int, int] = DEFAULT_CHUNKING):
    """Yield (stamp, action) pairs in receding-horizon execution order.

    chunking = (n_p, n_a): each predicted chunk covers n_p steps, the first
    n_a get executed before re-predicting.  Requires 1 <= n_a <= n_p and an
    episode at least n_p steps long.
    """
    n_p, n_a = chunking
    if n_p < 1 or n_a < 1:
        raise ValueError(f"chunk sizes must be positive, got {chunking}")
    if n_a > n_p:
        raise ValueError(f"cannot execute more steps than predicted: n_a={n_a} > n_p={n_p}")
    n = len(episode)
    if n < n_p:
        raise ChunkUnderflow(f"episode has {n} steps, prediction horizon needs {n_p}")
    idx = 0
    while idx < n:
        chunk_end = min(idx + n_p, n)
        if chunk_end - idx < n_p:
            exec_end = chunk_end  # partial tail chunk runs to its end
        else:
            exec_end = min(idx + n_a, n)
        for i in range(idx, exec_end):
            yield float(episode.stamps[i]), episode.actions[i]
        idx = exec_end


def replay_head_source(episode: Episode, chunking=DEFAULT_CHUNKING):
    """Zero-order-hold head-pose source over the episode's neck actions."""
    seq = list(playback(episode, chunking))
    stamps = np.array([s for s, _ in seq])
    poses = [Pose.from_array(a[0:7]) for _, a in seq]

    def head_fn(t: float) -> Pose:
        i = int(np.searchsorted(stamps, t + 1e-12, side="right")) - 1
        return poses[max(i, 0)]

    return head_fn


def replay(episode: Episode, chunking=DEFAULT_CHUNKING, config: PipelineConfig | None = None):
    """Re-run an episode through the virtual pipeline by feeding its recorded
    actions back as the head-pose source.

    Returns (metrics log, replay trace) where the trace holds the camera
    pose actually reached at each original step stamp."""
    if config is None:
        cfg_dict = dict(episode.meta.get("config", {}))
        cfg_dict["clock"] = "virtual"
        config = PipelineConfig(**cfg_dict)
    scene = resolve_scene(episode.meta.get("scene", "open-table"))
    head_fn = replay_head_source(episode, chunking)
    trace = ReplayTrace()
    pipe = VirtualPipeline(config, scene, head_fn, recorder=trace)
    duration = float(episode.meta.get("duration", episode.stamps[-1]))
    log = pipe.run(duration)
    return log, trace


class ReplayTrace:
    """Recorder stub that keeps poses in memory instead of writing files."""

    def __init__(self):
        self.stamps: list[float] = []
        self.proprio: list[np.ndarray] = []

    def add_step(self, stamp, rgb, proprio, action):
        self.stamps.append(stamp)
        self.proprio.append(np.asarray(proprio))

    def finalize(self, meta):
        pass


def record_episode(
    config: PipelineConfig,
    scene,
    head_source,
    duration: float,
    out_dir: str,
    scene_name: str | None = None,
    save_frames: bool = True,
) -> MetricsLog:
    """Run the pipeline while writing an episode to out_dir."""
    from dataclasses import asdict

    sc = resolve_scene(scene)
    rec = EpisodeRecorder(out_dir, save_frames=save_frames)
    pipe = VirtualPipeline(config, sc, head_source, recorder=rec)
    log = pipe.run(duration)
    rec.finalize(
        {
            "config": asdict(config),
            "scene": scene_name or sc.name,
            "duration": float(duration),
            "record_hz": 10.0,
            "seed": config.seed,
            "sim_start": 0.0,
        }
    )
    return log
