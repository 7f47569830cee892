"""Synthetic RGB-D sensor over analytic primitive scenes.

A scene is a list of posed primitives (axis-aligned box, sphere, infinite
plane) with uint8 albedos.  Rendering casts one ray per pixel through the
pinhole model and stores z-depth (distance along the optical axis, not ray
length), so `geometry.unproject` of a rendered pixel lands exactly on the
analytic surface when noise is zero.  Shading is flat Lambertian with a
fixed directional light; depth 0 means no return.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .geometry import Intrinsics, Pose, quat_to_matrix

RAY_EPS = 1e-6  # minimum accepted hit distance along the optical axis

# fixed scene light: direction toward the light, plus ambient floor
LIGHT_DIR = np.array([0.35, -0.25, 0.9]) / np.linalg.norm([0.35, -0.25, 0.9])
AMBIENT = 0.35
DIFFUSE = 0.65

SHAPES = ("box", "sphere", "plane")


class SpecError(ValueError):
    """Malformed scene description; message names the offending field."""


@dataclass(frozen=True)
class ScenePrimitive:
    shape: str
    pose: Pose
    dimensions: np.ndarray  # box: full extents xyz; sphere: [radius, 0, 0]; plane: unused
    albedo: np.ndarray  # uint8 rgb

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise SpecError(f"shape: unknown shape {self.shape!r}")
        dims = np.asarray(self.dimensions, dtype=np.float64).reshape(3)
        alb = np.asarray(self.albedo)
        if alb.shape != (3,) or alb.min() < 0 or alb.max() > 255:
            raise SpecError(f"albedo: expected 3 values in [0, 255], got {self.albedo}")
        if self.shape == "box" and not np.all(dims > 0):
            raise SpecError(f"dimensions: box extents must be positive, got {dims.tolist()}")
        if self.shape == "sphere" and dims[0] <= 0:
            raise SpecError(f"dimensions: sphere radius must be positive, got {dims[0]}")
        object.__setattr__(self, "dimensions", dims)
        object.__setattr__(self, "albedo", alb.astype(np.uint8))


@dataclass(frozen=True)
class Scene:
    name: str
    primitives: tuple[ScenePrimitive, ...]
    background: np.ndarray = field(default_factory=lambda: np.array([24, 26, 32], dtype=np.uint8))

    def __post_init__(self):
        if len(self.primitives) == 0:
            raise SpecError("primitives: scene must contain at least one primitive")
        object.__setattr__(self, "background", np.asarray(self.background, dtype=np.uint8).reshape(3))


@dataclass(frozen=True)
class RGBDFrame:
    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float32, z-depth in meters, 0 = no return
    pose: Pose  # camera pose in world at capture
    capture_time: float
    intrinsics: Intrinsics


def build_scene(spec: dict) -> Scene:
    """Build a Scene from a plain dict (the YAML schema, already parsed)."""
    if "primitives" not in spec:
        raise SpecError("primitives: missing")
    prims = []
    for i, p in enumerate(spec["primitives"]):
        try:
            shape = p["shape"]
            pose_arr = np.asarray(p.get("pose", [0, 0, 0, 1, 0, 0, 0]), dtype=np.float64)
            if pose_arr.shape != (7,):
                raise SpecError(f"primitives[{i}].pose: expected 7 numbers [px py pz qw qx qy qz]")
            dims = p.get("dimensions", [1.0, 1.0, 1.0])
            albedo = p.get("albedo", [128, 128, 128])
        except (KeyError, TypeError) as e:
            raise SpecError(f"primitives[{i}]: {e}") from e
        prims.append(
            ScenePrimitive(
                shape=shape,
                pose=Pose.from_array(pose_arr),
                dimensions=np.asarray(dims, dtype=np.float64),
                albedo=np.asarray(albedo),
            )
        )
    return Scene(
        name=str(spec.get("name", "custom")),
        primitives=tuple(prims),
        background=np.asarray(spec.get("background", [24, 26, 32])),
    )


def load_scene(path: str) -> Scene:
    with open(path, "r") as f:
        spec = yaml.safe_load(f)
    if not isinstance(spec, dict):
        raise SpecError(f"scene file {path}: top level must be a mapping")
    return build_scene(spec)


def _prim(shape, pos, quat, dims, albedo):
    return {
        "shape": shape,
        "pose": list(pos) + list(quat),
        "dimensions": list(dims),
        "albedo": list(albedo),
    }


_IDQ = (1, 0, 0, 0)

# Desk-scale presets.  World origin is the neck base sitting on the tabletop,
# +x points across the table, tabletop is the z=0 plane.
PRESETS: dict[str, dict] = {
    "open-table": {
        "name": "open-table",
        "background": [24, 26, 32],
        "primitives": [
            _prim("plane", (0, 0, 0), _IDQ, (0, 0, 0), (110, 110, 115)),
            _prim("box", (0.55, 0.18, 0.08), _IDQ, (0.18, 0.24, 0.16), (196, 70, 54)),
            _prim("box", (0.62, -0.20, 0.11), _IDQ, (0.14, 0.14, 0.22), (62, 96, 200)),
            _prim("box", (0.42, -0.02, 0.03), _IDQ, (0.30, 0.08, 0.06), (70, 170, 90)),
            _prim("sphere", (0.48, 0.10, 0.06), _IDQ, (0.06, 0, 0), (230, 200, 60)),
        ],
    },
    # Two-tier shelf with the open side facing the robot; a sphere sits in the
    # lower tier so it is only visible from a low or peeking viewpoint.
    "shelf-occlusion": {
        "name": "shelf-occlusion",
        "background": [24, 26, 32],
        "primitives": [
            _prim("plane", (0, 0, 0), _IDQ, (0, 0, 0), (110, 110, 115)),
            _prim("box", (0.68, 0.0, 0.20), _IDQ, (0.30, 0.44, 0.03), (150, 110, 70)),  # mid slab
            _prim("box", (0.68, 0.0, 0.40), _IDQ, (0.30, 0.44, 0.03), (150, 110, 70)),  # top slab
            _prim("box", (0.68, 0.23, 0.20), _IDQ, (0.30, 0.03, 0.43), (140, 100, 64)),  # left wall
            _prim("box", (0.68, -0.23, 0.20), _IDQ, (0.30, 0.03, 0.43), (140, 100, 64)),  # right wall
            _prim("box", (0.82, 0.0, 0.20), _IDQ, (0.03, 0.44, 0.43), (130, 92, 58)),  # back wall
            _prim("sphere", (0.68, 0.05, 0.06), _IDQ, (0.06, 0, 0), (220, 80, 160)),
        ],
    },
}


def preset_scene(name: str) -> Scene:
    if name not in PRESETS:
        raise SpecError(f"scene: unknown preset {name!r}, have {sorted(PRESETS)}")
    return build_scene(PRESETS[name])


# ---------------------------------------------------------------------------
# ray casting


def _intersect_box(o, d, half):
    """Slab test.  o, d: (N, 3) local-frame rays; half: (3,) half extents.

    Returns (t, hit_mask).  t is the entry distance, or the exit distance
    when the origin is inside the box.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - o) * inv
        t2 = (half - o) * inv
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    # rays parallel to a slab: inside iff |o| <= half on that axis
    par = np.abs(d) < 1e-12
    if par.any():
        inside = np.abs(o) <= half
        lo = np.where(par, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(par, np.where(inside, np.inf, -np.inf), hi)
    tmin = lo.max(axis=1)
    tmax = hi.min(axis=1)
    t = np.where(tmin > RAY_EPS, tmin, tmax)
    hit = (tmax >= tmin) & (t > RAY_EPS)
    return np.where(hit, t, np.inf), hit


def _box_normal(p_local, half):
    scaled = np.abs(p_local) / half
    axis = np.argmax(scaled, axis=1)
    n = np.zeros_like(p_local)
    rows = np.arange(p_local.shape[0])
    n[rows, axis] = np.sign(p_local[rows, axis])
    return n


def _intersect_sphere(o, d, radius):
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", o, d)
    c = np.einsum("ij,ij->i", o, o) - radius * radius
    disc = b * b - 4 * a * c
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t_near = (-b - sq) / (2 * a)
    t_far = (-b + sq) / (2 * a)
    t = np.where(t_near > RAY_EPS, t_near, t_far)
    hit = ok & (t > RAY_EPS)
    return np.where(hit, t, np.inf), hit


def _intersect_plane(o, d):
    dz = d[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -o[:, 2] / dz
    hit = (np.abs(dz) > 1e-12) & (t > RAY_EPS)
    return np.where(hit, t, np.inf), hit


def render_rgbd(
    scene: Scene,
    camera_pose_w: Pose,
    k: Intrinsics,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> "RGBDFrame":
    """Ray-cast an RGB-D frame.  Deterministic for identical inputs.

    Depth is the z-distance along the optical axis.  Gaussian noise with
    the given sigma is added to hit depths only; noisy depths that fall to
    or below zero become no-return pixels.
    """
    return _render_rgbd_at(scene, camera_pose_w, k, noise_sigma, seed, capture_time=0.0)


def _render_rgbd_at(scene, camera_pose_w, k, noise_sigma, seed, capture_time):
    h, w = k.height, k.width
    n = h * w
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    # rays are parametrized so that t equals z-depth: dir_cam = ((u-cx)/fx, (v-cy)/fy, 1)
    dirs_cam = np.stack(
        [((us - k.cx) / k.fx).ravel(), ((vs - k.cy) / k.fy).ravel(), np.ones(n)], axis=1
    )
    r_wc = quat_to_matrix(camera_pose_w.orientation)
    dirs_w = dirs_cam @ r_wc.T
    origin = camera_pose_w.position

    best_t = np.full(n, np.inf)
    best_prim = np.full(n, -1, dtype=np.int32)
    local = []
    for idx, prim in enumerate(scene.primitives):
        r_p = quat_to_matrix(prim.pose.orientation)
        o_l = np.broadcast_to((origin - prim.pose.position) @ r_p, (n, 3))
        d_l = dirs_w @ r_p
        if prim.shape == "box":
            t, _ = _intersect_box(o_l, d_l, prim.dimensions / 2.0)
        elif prim.shape == "sphere":
            t, _ = _intersect_sphere(o_l, d_l, float(prim.dimensions[0]))
        else:
            t, _ = _intersect_plane(o_l, d_l)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_prim = np.where(closer, idx, best_prim)
        local.append((o_l, d_l, r_p))

    depth = np.where(np.isfinite(best_t), best_t, 0.0)
    rgb = np.empty((n, 3), dtype=np.uint8)
    rgb[:] = scene.background

    for idx, prim in enumerate(scene.primitives):
        sel = best_prim == idx
        if not sel.any():
            continue
        o_l, d_l, r_p = local[idx]
        p_l = o_l[sel] + best_t[sel, None] * d_l[sel]
        if prim.shape == "box":
            n_l = _box_normal(p_l, prim.dimensions / 2.0)
        elif prim.shape == "sphere":
            n_l = p_l / np.linalg.norm(p_l, axis=1, keepdims=True)
        else:
            # plane normal faces the side the camera is on
            side = np.sign(o_l[sel][:, 2])
            n_l = np.zeros_like(p_l)
            n_l[:, 2] = np.where(side == 0, 1.0, side)
        n_w = n_l @ r_p.T
        shade = AMBIENT + DIFFUSE * np.clip(n_w @ LIGHT_DIR, 0.0, None)
        rgb[sel] = np.clip(prim.albedo * shade[:, None], 0, 255).astype(np.uint8)

    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(n) * noise_sigma
        hit = depth > 0.0
        depth = np.where(hit, depth + noise, 0.0)
        depth = np.where(depth > 0.0, depth, 0.0)
    rgb = np.where((depth > 0.0)[:, None], rgb, scene.background[None, :]).astype(np.uint8)

    return RGBDFrame(
        rgb=rgb.reshape(h, w, 3),
        depth=depth.reshape(h, w).astype(np.float32),
        pose=camera_pose_w,
        capture_time=float(capture_time),
        intrinsics=k,
    )
