"""Simulated 6R neck: forward kinematics, damped-least-squares inverse
kinematics, and a latency-aware tracking controller.

The chain is a generic six-revolute serial arm described by a small YAML
table (axis, offset, limits per joint); `default_chain()` loads the one
shipped with the package.  The controller models two latency effects:

* transport delay: a command sent at t becomes visible to the controller
  at t + transport_delay (latest-wins queue),
* first-order tracking lag: each joint moves toward the IK solution at
  rate min(tracking_rate * |error|, velocity_limit).

`LatencyModel.settle_time` is the 95 percent settling bound of that lag
(3 / tracking_rate); the pipeline uses it for pose-age bookkeeping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
import yaml

from .geometry import (
    Pose,
    compose,
    invert,
    matrix_to_quat,
    quat_from_axis_angle,
    quat_mul,
    quat_conjugate,
    quat_to_matrix,
    rotvec_from_quat,
)

log = logging.getLogger("teleopsim.neck")

IK_POS_TOL = 1e-4  # meters
IK_ROT_TOL = 1e-3  # radians
IK_MAX_ITERS = 60  # per descent attempt; stalled attempts fall through to restarts
IK_DAMPING = 0.05
IK_STEP_CLAMP = 0.2  # radians, per-iteration infinity-norm clamp
IK_RESTARTS = 64  # extra attempts from fixed pseudo-random seeds
IK_ERR_CLAMP = (0.3, 0.6)  # step-direction error caps, meters / radians
IK_STALL = 1e-9  # infinity-norm joint motion below this aborts the attempt
_RESTART_SEED = 0x6E656B  # restart sequence is part of the deterministic contract


class JointLimit(ValueError):
    """Joint vector outside the chain's declared limits."""


class NoConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"ik did not converge after {iterations} iterations, residual={residual:.6g} m")


@dataclass(frozen=True)
class JointSpec:
    axis: tuple[float, float, float]
    offset: tuple[float, float, float]
    lower: float
    upper: float
    velocity: float


@dataclass(frozen=True)
class KinematicChain:
    name: str
    joints: tuple[JointSpec, ...]

    def __post_init__(self):
        if len(self.joints) != 6:
            raise ValueError(f"chain must have 6 joints, got {len(self.joints)}")
        # IK runs thousands of fk evaluations per solve; precompute the
        # unit axes, offsets, and the constant parts of each joint's
        # axis-angle rotation (R(q) = cos q I + sin q K + (1 - cos q) aa^T)
        axes = np.array([j.axis for j in self.joints], dtype=np.float64)
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        skews = []
        outers = []
        for x, y, z in axes:
            skews.append(np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]]))
            outers.append(np.outer((x, y, z), (x, y, z)))
        object.__setattr__(self, "_axes_unit", axes)
        object.__setattr__(self, "_offsets", np.array([j.offset for j in self.joints]))
        object.__setattr__(self, "_skews", tuple(skews))
        object.__setattr__(self, "_outers", tuple(outers))

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    @property
    def velocity_limits(self) -> np.ndarray:
        return np.array([j.velocity for j in self.joints])


def load_chain(path: str) -> KinematicChain:
    with open(path, "r") as f:
        spec = yaml.safe_load(f)
    joints = tuple(
        JointSpec(
            axis=tuple(float(v) for v in j["axis"]),
            offset=tuple(float(v) for v in j["offset"]),
            lower=float(j["lower"]),
            upper=float(j["upper"]),
            velocity=float(j["velocity"]),
        )
        for j in spec["joints"]
    )
    return KinematicChain(name=str(spec.get("name", "chain")), joints=joints)


def default_chain() -> KinematicChain:
    with resources.as_file(resources.files("teleopsim").joinpath("data/neck_6r.yaml")) as p:
        return load_chain(str(p))


def _check_limits(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(6)
    for i, j in enumerate(chain.joints):
        if not (j.lower - 1e-12 <= q[i] <= j.upper + 1e-12):
            raise JointLimit(f"joint {i} value {q[i]:.4f} outside [{j.lower}, {j.upper}]")
    return q


def fk(chain: KinematicChain, q: np.ndarray) -> Pose:
    """Flange pose in the base frame for joint vector q."""
    q = _check_limits(chain, q)
    pose = Pose.identity()
    for qi, j in zip(q, chain.joints):
        rot = Pose(np.zeros(3), quat_from_axis_angle(np.array(j.axis), qi))
        pose = compose(compose(pose, rot), Pose(np.array(j.offset), np.array([1.0, 0, 0, 0])))
    return pose


_EYE3 = np.eye(3)
_EYE6 = np.eye(6)


def _fk_frames(chain: KinematicChain, q: np.ndarray):
    """Per-joint world axes and origins, plus the flange pose (for the Jacobian).

    Matrix form over the chain's precomputed rotation parts rather than
    quaternion composition: this runs once per IK iteration and dominates
    solve time.
    """
    r = _EYE3
    p = np.zeros(3)
    axes = np.empty((6, 3))
    origins = np.empty((6, 3))
    cs = np.cos(q)
    ss = np.sin(q)
    for i in range(6):
        axes[i] = r @ chain._axes_unit[i]
        origins[i] = p
        rot_i = cs[i] * _EYE3 + ss[i] * chain._skews[i] + (1.0 - cs[i]) * chain._outers[i]
        r = r @ rot_i
        p = p + r @ chain._offsets[i]
    return axes, origins, Pose(p, matrix_to_quat(r))


def _pose_error(current: Pose, target: Pose) -> np.ndarray:
    """6-vector [position error; rotation vector] in the base frame."""
    e_pos = target.position - current.position
    q_err = quat_mul(target.orientation, quat_conjugate(current.orientation))
    return np.concatenate([e_pos, rotvec_from_quat(q_err)])


def _dls_attempt(chain, target_pose, q0, pos_tol, rot_tol, max_iters, lam0):
    """One damped-least-squares descent with Levenberg-style adaptive damping.

    The damping factor shrinks while the error improves and grows when a
    step makes things worse, which keeps terminal convergence fast near
    ill-conditioned configurations (fixed damping flattens out just above
    tolerance there).  Far-field error is direction-clamped so distant
    targets do not produce wild first steps.  Returns (q, converged,
    pos_residual); an attempt whose update collapses below IK_STALL is
    abandoned early as a local minimum.
    """
    q = q0.copy()
    lower, upper = chain.lower, chain.upper
    eye6 = np.eye(6)
    cap_p, cap_r = IK_ERR_CLAMP
    lam = lam0
    prev_cost = np.inf
    ep = np.inf
    for _ in range(max_iters):
        axes, origins, pose = _fk_frames(chain, q)
        err = _pose_error(pose, target_pose)
        ep = float(np.linalg.norm(err[:3]))
        er = float(np.linalg.norm(err[3:]))
        if ep < pos_tol and er < rot_tol:
            return q, True, ep
        cost = ep + 0.1 * er
        if cost > prev_cost:
            lam = min(lam * 3.0, 1.0)
        else:
            lam = max(lam / 3.0, 1e-8)
        prev_cost = cost
        if ep > cap_p:
            err[:3] *= cap_p / ep
        if er > cap_r:
            err[3:] *= cap_r / er
        jac = np.empty((6, 6))
        jac[:3] = np.cross(axes, pose.position - origins).T
        jac[3:] = axes.T
        jjt = jac @ jac.T + lam * eye6
        dq = jac.T @ np.linalg.solve(jjt, err)
        step = np.max(np.abs(dq))
        if step > IK_STEP_CLAMP:
            dq *= IK_STEP_CLAMP / step
        q_next = np.clip(q + dq, lower, upper)
        if np.max(np.abs(q_next - q)) < IK_STALL:
            return q, False, ep
        q = q_next
    _, _, pose = _fk_frames(chain, q)
    err = _pose_error(pose, target_pose)
    return q, False, float(np.linalg.norm(err[:3]))


def _fk_arrays_batch(chain: KinematicChain, q: np.ndarray):
    """Batched _fk_frames over a (B, 6) joint block; returns raw arrays
    (axes (B,6,3), origins (B,6,3), flange position (B,3), rotation (B,3,3))."""
    b = len(q)
    r = np.broadcast_to(_EYE3, (b, 3, 3))
    p = np.zeros((b, 3))
    axes = np.empty((b, 6, 3))
    origins = np.empty((b, 6, 3))
    cs = np.cos(q)
    ss = np.sin(q)
    for i in range(6):
        axes[:, i] = r @ chain._axes_unit[i]
        origins[:, i] = p
        ci = cs[:, i, None, None]
        rot_i = ci * _EYE3 + ss[:, i, None, None] * chain._skews[i] + (1.0 - ci) * chain._outers[i]
        r = r @ rot_i
        p = p + r @ chain._offsets[i]
    return axes, origins, p, r


def _rotvec_from_matrices(rm: np.ndarray) -> np.ndarray:
    """Rotation vectors for a (B, 3, 3) stack of rotation matrices."""
    v = np.stack(
        [rm[:, 2, 1] - rm[:, 1, 2], rm[:, 0, 2] - rm[:, 2, 0], rm[:, 1, 0] - rm[:, 0, 1]],
        axis=1,
    )
    s = 0.5 * np.linalg.norm(v, axis=1)  # sin(theta)
    c = 0.5 * (rm[:, 0, 0] + rm[:, 1, 1] + rm[:, 2, 2] - 1.0)  # cos(theta)
    theta = np.arctan2(s, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(s > 1e-8, theta / (2.0 * s), 0.5)
    rv = v * scale[:, None]
    # theta near pi: v vanishes, recover the axis from R + I = 2 aa^T
    for i in np.flatnonzero((s <= 1e-8) & (c < 0.0)):
        a2 = 0.5 * (np.diag(rm[i]) + 1.0)
        j = int(np.argmax(a2))
        axis = 0.5 * (rm[i, j] + _EYE3[j])
        axis = axis / np.linalg.norm(axis)
        rv[i] = theta[i] * axis
    return rv


def _dls_batch(chain, target_pose, q0s, pos_tol, rot_tol, max_iters, lam0):
    """Lockstep twin of _dls_attempt over a (B, 6) block of seeds.

    Every row follows the solo update rule independently; rows freeze once
    converged or stalled, so the outcome per seed matches running the
    attempts one by one (modulo last-bit batched-BLAS differences, which
    is fine: restarts are fallbacks, not a reproducibility surface; the
    batch itself is deterministic).
    """
    q = np.array(q0s, dtype=np.float64)
    b = len(q)
    lower, upper = chain.lower, chain.upper
    cap_p, cap_r = IK_ERR_CLAMP
    lam = np.full(b, lam0)
    prev_cost = np.full(b, np.inf)
    active = np.ones(b, dtype=bool)
    converged = np.zeros(b, dtype=bool)
    residual = np.full(b, np.inf)
    r_t = quat_to_matrix(target_pose.orientation)
    p_t = target_pose.position
    for _ in range(max_iters):
        if not active.any():
            break
        axes, origins, p, r = _fk_arrays_batch(chain, q)
        e_pos = p_t - p
        rv = _rotvec_from_matrices(r_t[None] @ r.transpose(0, 2, 1))
        ep = np.linalg.norm(e_pos, axis=1)
        er = np.linalg.norm(rv, axis=1)
        residual = np.where(active, ep, residual)
        done = active & (ep < pos_tol) & (er < rot_tol)
        converged |= done
        active &= ~done
        if converged.any():
            # the first converged seed wins, so rows after it cannot matter
            active &= np.arange(b) < int(np.flatnonzero(converged)[0])
        if not active.any():
            break
        cost = ep + 0.1 * er
        lam = np.where(
            active,
            np.where(cost > prev_cost, np.minimum(lam * 3.0, 1.0), np.maximum(lam / 3.0, 1e-8)),
            lam,
        )
        prev_cost = np.where(active, cost, prev_cost)
        err = np.concatenate([e_pos, rv], axis=1)
        err[:, :3] *= np.where(ep > cap_p, cap_p / ep, 1.0)[:, None]
        err[:, 3:] *= np.where(er > cap_r, cap_r / er, 1.0)[:, None]
        jac = np.concatenate(
            [np.cross(axes, p[:, None, :] - origins).transpose(0, 2, 1), axes.transpose(0, 2, 1)],
            axis=1,
        )
        jjt = jac @ jac.transpose(0, 2, 1) + lam[:, None, None] * _EYE6
        dq = (jac.transpose(0, 2, 1) @ np.linalg.solve(jjt, err[..., None]))[..., 0]
        step = np.abs(dq).max(axis=1)
        dq *= np.where(step > IK_STEP_CLAMP, IK_STEP_CLAMP / np.maximum(step, 1e-300), 1.0)[:, None]
        q_next = np.clip(q + dq, lower, upper)
        stalled = active & (np.abs(q_next - q).max(axis=1) < IK_STALL)
        active &= ~stalled
        q = np.where(active[:, None], q_next, q)
    return q, converged, residual


def ik(
    chain: KinematicChain,
    target_pose: Pose,
    seed_q: np.ndarray,
    pos_tol: float = IK_POS_TOL,
    rot_tol: float = IK_ROT_TOL,
    max_iters: int = IK_MAX_ITERS,
    damping: float = IK_DAMPING,
    restarts: int = IK_RESTARTS,
) -> np.ndarray:
    """Damped-least-squares IK with deterministic random restarts.

    The first attempt descends from seed_q.  A stalled attempt (a local
    minimum of the clamped DLS update, common when the wrist must flip to
    reach the target orientation) falls through to up to `restarts` more
    attempts seeded from a fixed pseudo-random sequence of in-limit
    configurations, so the result is identical on every call.  Returns a
    within-limits joint vector whose fk lands within (pos_tol, rot_tol) of
    the target, else raises NoConvergence carrying the best position
    residual across attempts.
    """
    lam0 = damping * damping
    q, converged, residual = _dls_attempt(
        chain, target_pose, _check_limits(chain, seed_q).copy(), pos_tol, rot_tol, max_iters, lam0
    )
    if converged:
        return q
    if restarts <= 0:
        raise NoConvergence(max_iters, residual)
    rng = np.random.default_rng(_RESTART_SEED)
    seeds = rng.uniform(chain.lower, chain.upper, size=(restarts, 6))
    qs, conv, res = _dls_batch(chain, target_pose, seeds, pos_tol, rot_tol, max_iters, lam0)
    hits = np.flatnonzero(conv)
    if len(hits):
        return qs[hits[0]]
    raise NoConvergence((restarts + 1) * max_iters, float(min(residual, res.min())))


# ---------------------------------------------------------------------------
# tracking controller


@dataclass(frozen=True)
class LatencyModel:
    transport_delay: float = 0.05  # command sent -> visible to controller
    tracking_rate: float = 10.0  # 1/s, first-order lag gain

    def __post_init__(self):
        if self.transport_delay < 0:
            raise ValueError(f"transport_delay must be >= 0, got {self.transport_delay}")
        if self.tracking_rate <= 0:
            raise ValueError(f"tracking_rate must be > 0, got {self.tracking_rate}")

    @property
    def settle_time(self) -> float:
        """95 percent settling bound of the first-order lag: 3 / rate."""
        return 3.0 / self.tracking_rate


@dataclass(frozen=True)
class NeckState:
    joints: np.ndarray  # (6,) radians
    time: float = 0.0
    pending: tuple = ()  # ((arrival_time, target Pose), ...) sorted by arrival
    active_target: Pose | None = None
    # IK solution for active_target, solved once at activation (None = IK
    # failed, hold position until the next command activates)
    goal_joints: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "joints", np.asarray(self.joints, dtype=np.float64).reshape(6))
        if self.goal_joints is not None:
            object.__setattr__(
                self, "goal_joints", np.asarray(self.goal_joints, dtype=np.float64).reshape(6)
            )


def command(state: NeckState, target_pose_w: Pose, send_time: float, latency: LatencyModel) -> NeckState:
    """Queue a flange-pose command; it becomes visible after the transport delay."""
    arrival = send_time + latency.transport_delay
    pending = tuple(sorted(state.pending + ((arrival, target_pose_w),), key=lambda e: e[0]))
    return replace(state, pending=pending)


def step(state: NeckState, dt: float, chain: KinematicChain, latency: LatencyModel) -> NeckState:
    """Advance the controller by dt: activate arrived commands (latest wins),
    solve IK once per newly active target, and rate-limit joints toward the
    cached solution.

    On IK failure the neck holds position until the next command activates
    and a fault line of the form `t=<sec> neck ik_no_convergence
    residual=<m>` is logged at the failed activation.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    now = state.time + dt
    pending = state.pending
    active = state.active_target
    goal = state.goal_joints
    while pending and pending[0][0] <= state.time:
        active = pending[0][1]
        pending = pending[1:]
    q = state.joints
    if active is not None and active is not state.active_target:
        try:
            goal = ik(chain, active, q)
        except NoConvergence as e:
            log.warning("t=%.6f neck ik_no_convergence residual=%.6g", now, e.residual)
            goal = None
    if goal is not None:
        err = goal - q
        rate = np.minimum(latency.tracking_rate * np.abs(err), chain.velocity_limits)
        q = q + np.sign(err) * rate * dt
        # never overshoot the goal within a step
        q = np.where(err >= 0, np.minimum(q, goal), np.maximum(q, goal))
    return replace(state, joints=q, time=now, pending=pending, active_target=active, goal_joints=goal)


@dataclass(frozen=True)
class NeckRig:
    """Chain plus camera mount: camera_pose = fk(q) composed with mount."""

    chain: KinematicChain = field(default_factory=default_chain)
    latency: LatencyModel = field(default_factory=LatencyModel)
    # camera sits 5 cm forward of the flange; the rotation maps the camera
    # frame (+z forward, +x right, +y down) onto the flange frame (+x forward)
    mount: Pose = field(
        default_factory=lambda: Pose(
            np.array([0.05, 0.0, 0.0]), np.array([0.5, -0.5, 0.5, -0.5])
        )
    )

    def camera_pose(self, q: np.ndarray) -> Pose:
        return compose(fk(self.chain, q), self.mount)

    def flange_target_for_camera(self, camera_target_w: Pose) -> Pose:
        return compose(camera_target_w, invert(self.mount))
