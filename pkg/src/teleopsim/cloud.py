"""World-frame point cloud state: unprojection, fusion, crop, downsample.

The cloud is the shared world model that decouples viewing from the robot
camera.  Fusion policies:

* REPLACE: the newest frame's points replace everything (default).
* RING(n): keep the most recent n frames' points concatenated.

`scene_time` is the capture time of the newest fused frame and is the
timestamp used for scene-age metrics downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, quat_to_matrix
from .scene import RGBDFrame

POINT_DTYPE = np.dtype(
    [("position", "<f4", (3,)), ("color", "u1", (3,)), ("_pad", "u1")]
)  # little-endian, 16 bytes per point


class StaleFrame(ValueError):
    """Raised when a fused frame's capture time regresses."""


@dataclass(frozen=True)
class FusionPolicy:
    kind: str = "replace"  # "replace" | "ring"
    window: int = 1

    def __post_init__(self):
        if self.kind not in ("replace", "ring"):
            raise ValueError(f"unknown fusion kind {self.kind!r}")
        if self.kind == "ring" and self.window < 1:
            raise ValueError(f"ring window must be >= 1, got {self.window}")


class WorldCloud:
    """Immutable-by-convention world-frame point set.

    positions: (N, 3) float64, colors: (N, 3) uint8.  `segments` records the
    (capture_time, count) runs of the concatenated per-frame blocks so ring
    fusion can evict the oldest frame by slicing.
    """

    __slots__ = ("positions", "colors", "scene_time", "segments", "_f32")

    def __init__(self, positions, colors, scene_time=0.0, segments=None):
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
        if len(self.positions) != len(self.colors):
            raise ValueError("positions and colors length mismatch")
        self.scene_time = float(scene_time)
        if segments is None:
            segments = ((self.scene_time, len(self.positions)),) if len(self.positions) else ()
        self.segments = tuple(segments)
        self._f32 = None

    @staticmethod
    def empty() -> "WorldCloud":
        return WorldCloud(np.empty((0, 3)), np.empty((0, 3), dtype=np.uint8), 0.0, ())

    def __len__(self):
        return len(self.positions)

    @property
    def frame_count(self) -> int:
        return len(self.segments)

    def positions_f32(self) -> np.ndarray:
        """Cached single-precision copy for the renderer hot path."""
        if self._f32 is None:
            self._f32 = np.ascontiguousarray(self.positions, dtype=np.float32)
        return self._f32

    # -- binary dump: u32 count, then count * (3 f32 position, 3 u8 color, 1 pad)

    def to_bytes(self) -> bytes:
        return np.uint32(len(self)).tobytes() + pack_points(self.positions, self.colors)

    @staticmethod
    def from_bytes(buf: bytes) -> "WorldCloud":
        if len(buf) < 4:
            raise ValueError("cloud dump truncated: missing count")
        count = int(np.frombuffer(buf[:4], dtype="<u4")[0])
        pos, col = unpack_points(buf[4:], count)
        return WorldCloud(pos, col, 0.0)


def pack_points(positions: np.ndarray, colors: np.ndarray) -> bytes:
    rec = np.empty(len(positions), dtype=POINT_DTYPE)
    rec["position"] = positions.astype(np.float32)
    rec["color"] = colors
    rec["_pad"] = 0
    return rec.tobytes()


def unpack_points(buf: bytes, count: int) -> tuple[np.ndarray, np.ndarray]:
    expect = count * POINT_DTYPE.itemsize
    if len(buf) < expect:
        raise ValueError(f"point block truncated: need {expect} bytes, have {len(buf)}")
    rec = np.frombuffer(buf[:expect], dtype=POINT_DTYPE)
    return rec["position"].astype(np.float64), rec["color"].copy()


def unproject_frame(frame: RGBDFrame) -> WorldCloud:
    """Lift every valid-depth pixel of an RGB-D frame into world coordinates."""
    k = frame.intrinsics
    depth = np.asarray(frame.depth, dtype=np.float64)
    mask = depth > 0.0
    if not mask.any():
        return WorldCloud(
            np.empty((0, 3)), np.empty((0, 3), dtype=np.uint8), frame.capture_time, ()
        )
    vs, us = np.nonzero(mask)
    d = depth[vs, us]
    x = (us - k.cx) * d / k.fx
    y = (vs - k.cy) * d / k.fy
    pts_cam = np.stack([x, y, d], axis=1)
    r = quat_to_matrix(frame.pose.orientation)
    pts_w = pts_cam @ r.T + frame.pose.position
    return WorldCloud(pts_w, frame.rgb[vs, us], frame.capture_time)


def update(current: WorldCloud, new_frame: WorldCloud, policy: FusionPolicy) -> WorldCloud:
    """Fuse a newly unprojected frame into the cloud under the given policy."""
    if new_frame.scene_time < current.scene_time:
        raise StaleFrame(
            f"frame capture_time {new_frame.scene_time} precedes cloud scene_time {current.scene_time}"
        )
    seg = ((new_frame.scene_time, len(new_frame)),)
    if policy.kind == "replace":
        return WorldCloud(new_frame.positions, new_frame.colors, new_frame.scene_time, seg)
    segments = current.segments + seg
    positions = np.concatenate([current.positions, new_frame.positions])
    colors = np.concatenate([current.colors, new_frame.colors])
    while len(segments) > policy.window:
        drop = segments[0][1]
        segments = segments[1:]
        positions = positions[drop:]
        colors = colors[drop:]
    return WorldCloud(positions, colors, new_frame.scene_time, segments)


@dataclass(frozen=True)
class WorkspaceBox:
    """Closed axis-aligned crop box in world coordinates."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if not all(l <= h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"invalid box: lo={self.lo} hi={self.hi}")


def crop(c: WorldCloud, box: WorkspaceBox) -> WorldCloud:
    """Keep points inside the closed box (boundary points survive)."""
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    m = np.all((c.positions >= lo) & (c.positions <= hi), axis=1)
    return WorldCloud(c.positions[m], c.colors[m], c.scene_time, ((c.scene_time, int(m.sum())),))


def _voxel_reduce_count(positions: np.ndarray, voxel: float) -> np.ndarray:
    """Indices of one representative input point per occupied voxel."""
    keys = np.floor(positions / voxel).astype(np.int64)
    # lexicographic unique over rows; first occurrence is the representative
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    sk = keys[order]
    new = np.empty(len(sk), dtype=bool)
    new[0] = True
    new[1:] = np.any(sk[1:] != sk[:-1], axis=1)
    return order[new]


def downsample(c: WorldCloud, target: int, seed: int = 0) -> WorldCloud:
    """Voxel-grid reduction to at most `target` points, exact when oversized.

    The voxel size is found by bisection to the coarsest grid that still
    keeps at least `target` representatives; a seeded uniform thinning then
    removes the excess so clouds larger than `target` come out at exactly
    `target` points.  Every output point is one of the input points.
    """
    if target <= 0:
        raise ValueError(f"target must be positive, got {target}")
    n = len(c)
    if n <= target:
        return c
    span = float(np.max(c.positions.max(axis=0) - c.positions.min(axis=0)))
    if span == 0.0:  # all points coincide; voxels cannot separate them
        idx = np.sort(np.random.default_rng(seed).choice(n, size=target, replace=False))
        return WorldCloud(c.positions[idx], c.colors[idx], c.scene_time, ((c.scene_time, target),))
    lo, hi = span * 1e-6, span * 2.0  # lo keeps ~all points, hi collapses to one voxel
    keep = np.arange(n)
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        idx = _voxel_reduce_count(c.positions, mid)
        if len(idx) >= target:
            keep = idx
            lo = mid
        else:
            hi = mid
        if len(idx) == target:
            break
    if len(keep) > target:
        rng = np.random.default_rng(seed)
        sel = rng.choice(len(keep), size=target, replace=False)
        keep = keep[np.sort(sel)]
    return WorldCloud(
        c.positions[keep], c.colors[keep], c.scene_time, ((c.scene_time, len(keep)),)
    )
