"""Software point splatter with z-buffer semantics.

Renders a world-frame point cloud from an arbitrary eye pose by projecting
every point and painting splat_px x splat_px squares far-to-near, so the
nearest point wins each pixel exactly as a per-pixel z-buffer would.  The
hot path is single precision and allocates only whole arrays, never per
point; a 76,800-point cloud at 320x240 should render in a handful of
milliseconds on one desktop core.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .cloud import WorldCloud
from .geometry import Intrinsics, Pose, quat_to_matrix

NEAR_CLIP = 1e-4
DEFAULT_IPD = 0.064


@dataclass(frozen=True)
class RenderedView:
    rgb: np.ndarray  # (H, W, 3) uint8
    pose_used: Pose  # exactly the requested eye pose
    pose_time: float  # stamp of the head pose that produced this view
    scene_time: float  # capture stamp of the newest data in the cloud
    render_duration: float  # seconds of wall clock spent in render()
    coverage: float  # fraction of pixels hit by at least one splat


def _splat_offsets(splat_px: int) -> np.ndarray:
    if splat_px < 1:
        raise ValueError(f"splat_px must be >= 1, got {splat_px}")
    lo = -((splat_px - 1) // 2)
    return np.arange(lo, lo + splat_px)


_NO_HIT = np.uint64(0xFFFFFFFFFFFFFFFF)


def render(
    c: WorldCloud,
    eye_pose_w: Pose,
    k: Intrinsics,
    splat_px: int = 2,
    pose_time: float = 0.0,
    background: tuple[int, int, int] = (24, 26, 32),
) -> RenderedView:
    """Project the cloud into the eye camera and splat with z-buffering.

    Depth competition runs per pixel on packed (float32 depth bits, point
    index) keys via an unbuffered scatter-min, so the nearest point wins
    exactly; depth ties break toward the earlier point in the cloud.
    Splats whose square partially leaves the frame are clipped at the
    border (painted into padding and cropped)."""
    t0 = time.perf_counter()
    h, w = k.height, k.width
    offsets = _splat_offsets(splat_px)
    pad = 2 * splat_px
    hp, wp = h + 2 * pad, w + 2 * pad

    keybuf = np.full(hp * wp, _NO_HIT)

    rm = quat_to_matrix(eye_pose_w.orientation).astype(np.float32)
    pts = np.dot(c.positions_f32(), rm)  # world -> eye, (p - t) @ R == R.T @ (p - t)
    pts -= np.dot(eye_pose_w.position.astype(np.float32), rm)
    z = pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_z = np.float32(1.0) / z
        u_f = np.rint(pts[:, 0] * inv_z * np.float32(k.fx) + np.float32(k.cx))
        v_f = np.rint(pts[:, 1] * inv_z * np.float32(k.fy) + np.float32(k.cy))
        # anchor may sit up to splat_px outside the frame and still paint pixels
        m = (z > NEAR_CLIP) & (u_f >= -splat_px) & (u_f < w + splat_px)
        m &= (v_f >= -splat_px) & (v_f < h + splat_px)
        # lanes failing the mask can hold garbage after this cast; never taken
        flat_all = ((v_f + pad) * np.float32(wp) + (u_f + pad)).astype(np.intp)
    idx = np.flatnonzero(m)
    flat = flat_all.take(idx)
    zc = z.take(idx)
    # positive float32 depths compare like their bit patterns, so the
    # packed key (depth bits << 32 | index) makes min() a z-buffer
    key = (zc.view(np.uint32).astype(np.uint64) << np.uint64(32)) | np.arange(
        len(idx), dtype=np.uint64
    )
    for dv in offsets:
        for du in offsets:
            np.minimum.at(keybuf, flat + (dv * wp + du), key)

    # palette gather: winner index per pixel, misses clipped onto the
    # appended background entry
    nc = len(idx)
    palette = np.empty((nc + 1, 3), dtype=np.uint8)
    palette[:nc] = c.colors.take(idx, axis=0)
    palette[nc] = background
    winner = keybuf & np.uint64(0xFFFFFFFF)
    np.minimum(winner, np.uint64(nc), out=winner)
    img = palette.take(winner.astype(np.intp), axis=0)
    frame = np.ascontiguousarray(img.reshape(hp, wp, 3)[pad:pad + h, pad:pad + w])
    inner = (keybuf != _NO_HIT).reshape(hp, wp)[pad:pad + h, pad:pad + w]
    coverage = int(inner.sum()) / float(h * w)

    return RenderedView(
        rgb=frame,
        pose_used=eye_pose_w,
        pose_time=float(pose_time),
        scene_time=c.scene_time,
        render_duration=time.perf_counter() - t0,
        coverage=coverage,
    )


def render_stereo(
    c: WorldCloud,
    head_pose_w: Pose,
    k: Intrinsics,
    ipd: float = DEFAULT_IPD,
    splat_px: int = 2,
    pose_time: float = 0.0,
) -> tuple[RenderedView, RenderedView]:
    """Left/right eye pair displaced +-ipd/2 along the head's local x axis."""
    if ipd <= 0.0:
        raise ValueError(f"ipd must be positive, got {ipd}")
    half = ipd / 2.0
    rx = quat_to_matrix(head_pose_w.orientation)[:, 0]
    left = Pose(head_pose_w.position - half * rx, head_pose_w.orientation)
    right = Pose(head_pose_w.position + half * rx, head_pose_w.orientation)
    return (
        render(c, left, k, splat_px, pose_time),
        render(c, right, k, splat_px, pose_time),
    )


def save_view(view: RenderedView, path: str) -> None:
    """Write the image as PNG plus a JSON sidecar with the view metadata."""
    if not path.endswith(".png"):
        path = path + ".png"
    Image.fromarray(view.rgb).save(path)
    meta = {
        "pose_used": view.pose_used.to_array().tolist(),
        "pose_time": view.pose_time,
        "scene_time": view.scene_time,
        "coverage": view.coverage,
        "render_duration": view.render_duration,
    }
    with open(path[:-4] + ".json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def bench_render(
    sizes=(10_000, 76_800, 200_000),
    reps: int = 100,
    k: Intrinsics | None = None,
    splat_px: int = 2,
    seed: int = 0,
) -> list[dict]:
    """Render timing sweep over synthetic clouds; returns per-size stats."""
    k = k or Intrinsics.default(320, 240)
    eye = Pose.identity()
    rng = np.random.default_rng(seed)
    out = []
    for n in sizes:
        pos = rng.uniform([-1.5, -1.1, 0.5], [1.5, 1.1, 4.0], size=(n, 3))
        col = rng.integers(0, 256, size=(n, 3), dtype=np.uint8)
        c = WorldCloud(pos, col, 0.0)
        times = np.empty(reps)
        for i in range(reps):
            times[i] = render(c, eye, k, splat_px).render_duration
        out.append(
            {
                "points": int(n),
                "reps": int(reps),
                "median_ms": float(np.median(times) * 1e3),
                "p95_ms": float(np.percentile(times, 95) * 1e3),
            }
        )
    return out
