"""Three-rate teleoperation pipeline and its latency accounting.

Activities (all periods configurable):

* SENSE   at cloud_hz: capture an RGB-D frame at the robot camera pose;
  the frame reaches the viewer side transport_delay later.
* DISPLAY at render_hz: DECOUPLED renders the world cloud at the user's
  latest head pose; DIRECT re-presents the newest arrived robot frame.
* COMMAND every command_interval seconds: aggregate the head poses seen
  since the previous command and send the result to the neck, which also
  pays the transport delay.

Latency metrics are defined purely on timestamps carried through the
pipeline:

* pose_age  = display time minus the stamp of the head pose the displayed
  view was rendered from.
* scene_age = display time minus the capture time of the newest scene data
  in the displayed view.

In DIRECT mode the displayed image only changes when a robot frame
arrives, so the metrics log holds one record per newly displayed frame at
its arrival time; the frame's pose stamp is the stamp of the newest neck
command that had settled (arrival + LatencyModel.settle_time) by capture.
In DECOUPLED mode there is one record per render tick.

The virtual clock runs on integer microseconds so that cross-run
timestamp comparisons are exact, which the latency-invariance checks
rely on.  The realtime driver reuses the same core handlers from plain
threads against the wall clock.
"""

from __future__ import annotations

import heapq
import json
import threading
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import neck as neck_mod
from .cloud import FusionPolicy, WorldCloud, unproject_frame, update as cloud_update
from .geometry import Intrinsics, Pose, quat_normalize
from .render import RenderedView, render
from .scene import RGBDFrame, Scene, _render_rgbd_at, preset_scene

US = 1_000_000  # microseconds per second

PROPRIO_DIM = 23

# virtual event loop ordering at equal timestamps
PRI_PLANT = 0
PRI_ARRIVE = 1
PRI_POSE = 2
PRI_SENSE = 3
PRI_COMMAND = 4
PRI_DISPLAY = 5
PRI_RECORD = 6

RECORD_HZ = 10.0  # episode step rate, fixed by the data model


class ConfigError(ValueError):
    pass


class EmptyWindow(ValueError):
    """Raised when aggregating an empty head-pose window."""


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "decoupled"  # "decoupled" | "direct"
    render_hz: float = 150.0
    cloud_hz: float = 10.0
    command_interval: float = 0.3
    transport_delay: float = 0.05  # seconds, applies to frames and commands
    tracking_rate: float = 10.0  # neck first-order lag gain
    height_offset: float = 0.0  # added to incoming head-pose z
    aggregation: str = "latest"  # "latest" | "ema"
    ema_alpha: float = 0.3
    clock: str = "virtual"  # "virtual" | "realtime"
    width: int = 320
    height: int = 240
    focal: float = 0.0  # 0 means 0.75 * width
    splat_px: int = 2
    noise_sigma: float = 0.0
    fusion: str = "replace"  # "replace" | "ring"
    ring_window: int = 3
    plant_hz: float = 100.0  # neck integration rate (simulation plumbing)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("decoupled", "direct"):
            raise ConfigError(f"mode must be 'decoupled' or 'direct', got {self.mode!r}")
        if self.clock not in ("virtual", "realtime"):
            raise ConfigError(f"clock must be 'virtual' or 'realtime', got {self.clock!r}")
        if self.aggregation not in ("latest", "ema"):
            raise ConfigError(f"aggregation must be 'latest' or 'ema', got {self.aggregation!r}")
        for name in ("render_hz", "cloud_hz", "command_interval", "tracking_rate", "plant_hz"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.transport_delay < 0:
            raise ConfigError(f"transport_delay must be >= 0, got {self.transport_delay}")
        if self.render_hz <= self.cloud_hz:
            raise ConfigError(
                f"render_hz ({self.render_hz}) must exceed cloud_hz ({self.cloud_hz})"
            )
        if self.command_interval < 1.0 / self.cloud_hz - 1e-12:
            raise ConfigError(
                f"command_interval ({self.command_interval}) must be >= 1/cloud_hz "
                f"({1.0 / self.cloud_hz})"
            )
        if not (0.0 < self.ema_alpha <= 1.0):
            raise ConfigError(f"ema_alpha must be in (0, 1], got {self.ema_alpha}")
        if self.splat_px < 1:
            raise ConfigError(f"splat_px must be >= 1, got {self.splat_px}")

    def intrinsics(self) -> Intrinsics:
        return Intrinsics.default(self.width, self.height, self.focal or None)

    def fusion_policy(self) -> FusionPolicy:
        return FusionPolicy(self.fusion, self.ring_window if self.fusion == "ring" else 1)


# ---------------------------------------------------------------------------
# head pose aggregation and body state


@dataclass(frozen=True)
class StampedPose:
    stamp: float  # seconds
    pose: Pose


def aggregate_head(poses: list[StampedPose], policy: str = "latest", alpha: float = 0.3) -> Pose:
    """Collapse the head poses seen since the last command into one target.

    `latest` takes the newest sample.  `ema` runs an exponential moving
    average oldest-to-newest: positions lerp, quaternions sign-align then
    normalized-lerp.  alpha=1.0 reduces exactly to `latest`.
    """
    if not poses:
        raise EmptyWindow("no head poses since previous command")
    if policy == "latest":
        return poses[-1].pose
    if policy != "ema":
        raise ValueError(f"unknown aggregation policy {policy!r}")
    acc_p = poses[0].pose.position.copy()
    acc_q = poses[0].pose.orientation.copy()
    for sp in poses[1:]:
        p, q = sp.pose.position, sp.pose.orientation
        if np.dot(acc_q, q) < 0.0:
            q = -q
        acc_p = (1.0 - alpha) * acc_p + alpha * p
        acc_q = quat_normalize((1.0 - alpha) * acc_q + alpha * q)
    return Pose(acc_p, acc_q)


def ingest_head_pose(pose: Pose, height_offset: float) -> Pose:
    """Map a device head pose into the simulator world (height calibration)."""
    if height_offset == 0.0:
        return pose
    return Pose(pose.position + np.array([0.0, 0.0, height_offset]), pose.orientation)


@dataclass(frozen=True)
class BodyState:
    """Arm and gripper pass-through state alongside the simulated neck."""

    left: Pose = field(
        default_factory=lambda: Pose(np.array([0.25, 0.28, 0.12]), np.array([1.0, 0, 0, 0]))
    )
    right: Pose = field(
        default_factory=lambda: Pose(np.array([0.25, -0.28, 0.12]), np.array([1.0, 0, 0, 0]))
    )
    width_left: float = 0.08
    width_right: float = 0.08


@dataclass(frozen=True)
class ProprioState:
    """Observation vector of the data model: three poses plus gripper widths."""

    neck: Pose
    left: Pose
    right: Pose
    width_left: float
    width_right: float

    def to_array(self) -> np.ndarray:
        """Flatten to 23 floats: [neck 7 | left 7 | right 7 | width_l | width_r]."""
        return np.concatenate(
            [
                self.neck.to_array(),
                self.left.to_array(),
                self.right.to_array(),
                [self.width_left, self.width_right],
            ]
        )

    @staticmethod
    def from_array(a: np.ndarray) -> "ProprioState":
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (PROPRIO_DIM,):
            raise ValueError(f"proprio vector must have {PROPRIO_DIM} entries, got shape {a.shape}")
        return ProprioState(
            neck=Pose.from_array(a[0:7]),
            left=Pose.from_array(a[7:14]),
            right=Pose.from_array(a[14:21]),
            width_left=float(a[21]),
            width_right=float(a[22]),
        )


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricsRecord:
    display_time: float
    pose_age: float
    scene_age: float
    coverage: float
    mode: str


CSV_HEADER = "display_time,pose_age,scene_age,coverage,mode"


@dataclass
class MetricsLog:
    records: list[MetricsRecord] = field(default_factory=list)
    event_counts: dict = field(default_factory=dict)
    mode: str = "decoupled"

    def pose_ages(self) -> np.ndarray:
        return np.array([r.pose_age for r in self.records])

    def scene_ages(self) -> np.ndarray:
        return np.array([r.scene_age for r in self.records])

    def coverages(self) -> np.ndarray:
        return np.array([r.coverage for r in self.records])

    def summary(self) -> dict:
        if not self.records:
            return {"records": 0, "mode": self.mode}
        pa, sa, cov = self.pose_ages(), self.scene_ages(), self.coverages()
        return {
            "mode": self.mode,
            "records": len(self.records),
            "median_pose_age": float(np.median(pa)),
            "p95_pose_age": float(np.percentile(pa, 95)),
            "median_scene_age": float(np.median(sa)),
            "p95_scene_age": float(np.percentile(sa, 95)),
            "mean_coverage": float(np.mean(cov)),
        }

    def to_csv(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(CSV_HEADER + "\n")
            for r in self.records:
                f.write(
                    f"{r.display_time!r},{r.pose_age!r},{r.scene_age!r},{r.coverage!r},{r.mode}\n"
                )

    def to_jsonl(self, path: str) -> None:
        with open(path, "w") as f:
            for r in self.records:
                f.write(json.dumps(asdict(r), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# pipeline core: one set of handlers shared by the virtual and realtime drivers


def _period_us(rate_hz: float) -> int:
    return max(1, round(US / rate_hz))


class PipelineCore:
    """Mutable pipeline state plus per-activity handlers keyed on integer
    microsecond timestamps.  Drivers are responsible for calling handlers in
    causal order; the core itself is single-threaded (realtime callers hold
    `lock`)."""

    def __init__(self, config: PipelineConfig, scene: Scene, recorder=None):
        self.config = config
        self.scene = scene
        self.recorder = recorder
        self.lock = threading.Lock()

        self.k = config.intrinsics()
        self.rig = neck_mod.NeckRig(
            latency=neck_mod.LatencyModel(
                transport_delay=config.transport_delay, tracking_rate=config.tracking_rate
            )
        )
        from .trajectories import base_view_pose

        start_view = base_view_pose()
        try:
            q0 = neck_mod.ik(
                self.rig.chain, self.rig.flange_target_for_camera(start_view), np.zeros(6)
            )
        except neck_mod.NoConvergence:
            q0 = np.zeros(6)
        self.neck_state = neck_mod.NeckState(joints=q0)
        self.body = BodyState()

        self.transport_us = round(config.transport_delay * US)
        self.settle_us = round(self.rig.latency.settle_time * US)

        self.latest_pose: StampedPose | None = None
        self.latest_pose_us = -1
        self.window: list[StampedPose] = []
        self.window_newest_us = 0

        self.cloud = WorldCloud.empty()
        self.cloud_scene_us = 0
        self.policy = config.fusion_policy()

        self.direct_frame: RGBDFrame | None = None
        self.direct_frame_stamp_us = 0
        self.direct_coverage = 0.0

        # (settle_time_us, head stamp_us) of sent commands, in send order
        self.settles: list[tuple[int, int]] = []
        self.settled_stamp_us = 0

        self.last_view: RenderedView | None = None
        self.capture_index = 0
        self.log = MetricsLog(mode=config.mode)
        self.counts = self.log.event_counts
        for name in ("plant", "arrive", "pose", "sense", "command", "command_sent", "display", "record"):
            self.counts[name] = 0

    # -- helpers

    def _settled_stamp(self, t_us: int) -> int:
        while self.settles and self.settles[0][0] <= t_us:
            self.settled_stamp_us = self.settles.pop(0)[1]
        return self.settled_stamp_us

    def camera_pose(self) -> Pose:
        return self.rig.camera_pose(self.neck_state.joints)

    # -- handlers

    def handle_plant(self, t_us: int) -> None:
        self.counts["plant"] += 1
        t = t_us / US
        dt = t - self.neck_state.time
        if dt <= 0:
            return
        st = neck_mod.step(self.neck_state, dt, self.rig.chain, self.rig.latency)
        # rebase onto the exact driver grid so queue comparisons stay aligned
        self.neck_state = replace(st, time=t)

    def handle_pose(self, t_us: int, raw_pose: Pose) -> None:
        if t_us <= self.latest_pose_us:
            return  # stamps must be strictly increasing per source
        self.counts["pose"] += 1
        pose = ingest_head_pose(raw_pose, self.config.height_offset)
        sp = StampedPose(t_us / US, pose)
        self.latest_pose = sp
        self.latest_pose_us = t_us
        self.window.append(sp)
        self.window_newest_us = t_us

    def handle_sense(self, t_us: int) -> tuple[int, tuple]:
        """Capture a frame; returns (arrival_time_us, payload) for delivery."""
        self.counts["sense"] += 1
        frame = _render_rgbd_at(
            self.scene,
            self.camera_pose(),
            self.k,
            self.config.noise_sigma,
            seed=(self.config.seed * 100_003 + self.capture_index),
            capture_time=t_us / US,
        )
        self.capture_index += 1
        stamp_us = self._settled_stamp(t_us)
        return t_us + self.transport_us, (t_us, stamp_us, frame)

    def handle_arrive(self, t_us: int, payload: tuple) -> None:
        self.counts["arrive"] += 1
        capture_us, stamp_us, frame = payload
        if self.config.mode == "decoupled":
            self.cloud = cloud_update(self.cloud, unproject_frame(frame), self.policy)
            self.cloud_scene_us = capture_us
        else:
            self.direct_frame = frame
            self.direct_frame_stamp_us = stamp_us
            cov = float(np.count_nonzero(frame.depth > 0.0)) / frame.depth.size
            self.direct_coverage = cov
            self.log.records.append(
                MetricsRecord(
                    display_time=t_us / US,
                    pose_age=(t_us - stamp_us) / US,
                    scene_age=(t_us - capture_us) / US,
                    coverage=cov,
                    mode="direct",
                )
            )

    def handle_command(self, t_us: int) -> None:
        self.counts["command"] += 1
        if not self.window:
            return
        target = aggregate_head(self.window, self.config.aggregation, self.config.ema_alpha)
        stamp_us = self.window_newest_us
        self.window = []
        flange_target = self.rig.flange_target_for_camera(target)
        self.neck_state = neck_mod.command(
            self.neck_state, flange_target, send_time=t_us / US, latency=self.rig.latency
        )
        self.settles.append((t_us + self.transport_us + self.settle_us, stamp_us))
        self.counts["command_sent"] += 1

    def handle_display(self, t_us: int) -> None:
        self.counts["display"] += 1
        if self.config.mode != "decoupled":
            return  # direct mode re-presents the last arrived frame
        if self.latest_pose is None:
            return
        view = render(
            self.cloud,
            self.latest_pose.pose,
            self.k,
            splat_px=self.config.splat_px,
            pose_time=self.latest_pose.stamp,
            background=tuple(int(v) for v in self.scene.background),
        )
        self.last_view = view
        self.log.records.append(
            MetricsRecord(
                display_time=t_us / US,
                pose_age=(t_us - self.latest_pose_us) / US,
                scene_age=(t_us - self.cloud_scene_us) / US,
                coverage=view.coverage,
                mode="decoupled",
            )
        )

    def handle_record(self, t_us: int) -> None:
        self.counts["record"] += 1
        if self.recorder is None:
            return
        if self.config.mode == "decoupled":
            rgb = self.last_view.rgb if self.last_view is not None else None
        else:
            rgb = self.direct_frame.rgb if self.direct_frame is not None else None
        proprio = ProprioState(
            neck=self.camera_pose(),
            left=self.body.left,
            right=self.body.right,
            width_left=self.body.width_left,
            width_right=self.body.width_right,
        )
        head = self.latest_pose.pose if self.latest_pose else proprio.neck
        action = np.concatenate(
            [
                head.to_array(),
                self.body.left.to_array(),
                self.body.right.to_array(),
                [self.body.width_left, self.body.width_right],
            ]
        )
        self.recorder.add_step(t_us / US, rgb, proprio.to_array(), action)


# ---------------------------------------------------------------------------
# virtual-clock driver


class VirtualPipeline:
    """Deterministic single-threaded discrete-event driver.

    Each activity fires at t_k = round(k / rate * 1e6) microseconds for
    k = 1..floor(duration * rate); simultaneous events run in fixed
    priority order (plant, frame arrivals, head pose, sense, command,
    display, record)."""

    def __init__(self, config: PipelineConfig, scene: Scene, head_fn, recorder=None):
        if config.clock != "virtual":
            raise ConfigError("VirtualPipeline requires clock='virtual'")
        self.core = PipelineCore(config, scene, recorder)
        self.head_fn = head_fn

    def run(self, duration: float) -> MetricsLog:
        if duration <= 0:
            raise ConfigError(f"duration must be positive, got {duration}")
        cfg = self.core.config
        dur_us = round(duration * US)
        heap: list[tuple] = []
        seq = 0

        def push(t_us, pri, kind, payload=None):
            nonlocal seq
            if t_us <= dur_us:
                heapq.heappush(heap, (t_us, pri, seq, kind, payload))
                seq += 1

        def schedule(kind, pri, rate_hz, k):
            t_us = round(k * US / rate_hz)
            if t_us <= dur_us:
                push(t_us, pri, kind, k)

        schedule("plant", PRI_PLANT, cfg.plant_hz, 1)
        schedule("pose", PRI_POSE, cfg.render_hz, 1)
        schedule("sense", PRI_SENSE, cfg.cloud_hz, 1)
        schedule("command", PRI_COMMAND, 1.0 / cfg.command_interval, 1)
        schedule("display", PRI_DISPLAY, cfg.render_hz, 1)
        if self.core.recorder is not None:
            schedule("record", PRI_RECORD, RECORD_HZ, 1)

        rates = {
            "plant": (PRI_PLANT, cfg.plant_hz),
            "pose": (PRI_POSE, cfg.render_hz),
            "sense": (PRI_SENSE, cfg.cloud_hz),
            "command": (PRI_COMMAND, 1.0 / cfg.command_interval),
            "display": (PRI_DISPLAY, cfg.render_hz),
            "record": (PRI_RECORD, RECORD_HZ),
        }

        core = self.core
        while heap:
            t_us, pri, _, kind, payload = heapq.heappop(heap)
            if kind == "plant":
                core.handle_plant(t_us)
            elif kind == "arrive":
                core.handle_arrive(t_us, payload)
            elif kind == "pose":
                core.handle_pose(t_us, self.head_fn(t_us / US))
            elif kind == "sense":
                arrival, frame_payload = core.handle_sense(t_us)
                push(arrival, PRI_ARRIVE, "arrive", frame_payload)
            elif kind == "command":
                core.handle_command(t_us)
            elif kind == "display":
                core.handle_display(t_us)
            elif kind == "record":
                core.handle_record(t_us)
            if kind != "arrive":
                schedule(kind, rates[kind][0], rates[kind][1], payload + 1)
        return core.log


# ---------------------------------------------------------------------------
# realtime driver


class RealtimePipeline:
    """Wall-clock driver running the same core from periodic threads.

    Not deterministic; used by the live server.  Head poses arrive either
    from a scripted head_fn (sampled in the display loop) or externally via
    `submit_head_pose` (the WebSocket path)."""

    def __init__(self, config: PipelineConfig, scene: Scene, head_fn=None, recorder=None):
        self.core = PipelineCore(config, scene, recorder)
        self.head_fn = head_fn
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._delivery: list[tuple[int, tuple]] = []
        self._delivery_lock = threading.Lock()
        self._origin_ns = None

    def now_us(self) -> int:
        return (time.monotonic_ns() - self._origin_ns) // 1000

    def submit_head_pose(self, pose: Pose, stamp_us: int | None = None) -> None:
        with self.core.lock:
            self.core.handle_pose(self.now_us() if stamp_us is None else stamp_us, pose)

    def _loop(self, period_us: int, fn):
        nxt = self.now_us() + period_us
        while not self._stop.is_set():
            now = self.now_us()
            if now < nxt:
                time.sleep(min((nxt - now) / US, 0.005))
                continue
            fn(nxt)
            nxt += period_us

    def _plant_tick(self, t_us):
        with self.core.lock:
            self.core.handle_plant(self.now_us())

    def _sense_tick(self, t_us):
        with self.core.lock:
            arrival, payload = self.core.handle_sense(self.now_us())
        with self._delivery_lock:
            heapq.heappush(self._delivery, (arrival, payload))

    def _delivery_tick(self, t_us):
        while True:
            with self._delivery_lock:
                if not self._delivery or self._delivery[0][0] > self.now_us():
                    return
                arrival, payload = heapq.heappop(self._delivery)
            with self.core.lock:
                self.core.handle_arrive(arrival, payload)

    def _command_tick(self, t_us):
        with self.core.lock:
            self.core.handle_command(self.now_us())

    def _display_tick(self, t_us):
        now = self.now_us()
        with self.core.lock:
            if self.head_fn is not None:
                self.core.handle_pose(now, self.head_fn(now / US))
            self.core.handle_display(now)

    def start(self) -> None:
        self._origin_ns = time.monotonic_ns()
        cfg = self.core.config
        loops = [
            (_period_us(cfg.plant_hz), self._plant_tick),
            (_period_us(cfg.cloud_hz), self._sense_tick),
            (1000, self._delivery_tick),
            (round(cfg.command_interval * US), self._command_tick),
            (_period_us(cfg.render_hz), self._display_tick),
        ]
        for period, fn in loops:
            th = threading.Thread(target=self._loop, args=(period, fn), daemon=True)
            th.start()
            self._threads.append(th)

    def stop(self) -> None:
        self._stop.set()
        for th in self._threads:
            th.join(timeout=2.0)

    def run(self, duration: float) -> MetricsLog:
        self.start()
        try:
            time.sleep(duration)
        finally:
            self.stop()
        return self.core.log


# ---------------------------------------------------------------------------


def resolve_scene(scene) -> Scene:
    if isinstance(scene, Scene):
        return scene
    return preset_scene(str(scene))


def run(config: PipelineConfig, scene, head_source, duration: float, recorder=None) -> MetricsLog:
    """Run the pipeline for `duration` seconds and return the metrics log.

    `scene` is a Scene or preset name; `head_source` is a callable t -> Pose.
    """
    sc = resolve_scene(scene)
    if config.clock == "virtual":
        return VirtualPipeline(config, sc, head_source, recorder).run(duration)
    return RealtimePipeline(config, sc, head_source, recorder).run(duration)
