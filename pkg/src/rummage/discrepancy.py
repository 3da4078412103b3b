"""Semantic discrepancy cost between a pose hypothesis and labeled points.

Each observed point contributes a hinge (free/occupied) or absolute-value
(surface) penalty on the signed distance of its object-frame image.  The
total over a cloud is accumulated strictly left to right in the cloud's
insertion order, so appending a point to a cloud adds exactly its own cost
to the total (bitwise, not just approximately).

The per-point descent directions are built from the *normalized* distance
gradient, so they are parallel to, but not equal to, the analytic cost
gradients; what is guaranteed (and tested) is that a small step against
them does not increase the cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, Shape, orthonormalize, rotation_about_axis
from .semantics import SemanticCloud, Semantics


@dataclass(frozen=True)
class DiscrepancyParams:
    """sigma_f scales free/occupied violations; epsilon (meters) tolerates
    small interior violations (default 0: exact sign constraints)."""

    sigma_f: float = 10.0
    epsilon: float = 0.0


def _class_costs(params: DiscrepancyParams, v: np.ndarray, sem: int) -> np.ndarray:
    if sem == int(Semantics.FREE):
        return params.sigma_f * np.maximum(0.0, params.epsilon - v)
    if sem == int(Semantics.OCCUPIED):
        return params.sigma_f * np.maximum(0.0, params.epsilon + v)
    return np.abs(v)


def point_cost(params: DiscrepancyParams, shape: Shape, x_obj, s: Semantics) -> float:
    """Cost of observing semantics ``s`` at object-frame position ``x_obj``."""
    v = np.asarray(shape.sdf(np.asarray(x_obj, dtype=np.float64)))
    return float(_class_costs(params, v, int(s)))


def cost_array(params: DiscrepancyParams, shape: Shape, cloud: SemanticCloud, T: Pose) -> np.ndarray:
    """Per-point costs in the cloud's storage order."""
    if len(cloud) == 0:
        return np.zeros(0)
    v = shape.sdf(T.transform(cloud.positions))
    costs = np.empty(len(cloud), dtype=np.float64)
    for sem in (Semantics.FREE, Semantics.OCCUPIED, Semantics.SURFACE):
        mask = cloud.labels == int(sem)
        if mask.any():
            costs[mask] = _class_costs(params, v[mask], int(sem))
    return costs


def total_discrepancy(params: DiscrepancyParams, shape: Shape, cloud: SemanticCloud, T: Pose) -> float:
    """Sum of point costs, accumulated sequentially in storage order."""
    costs = cost_array(params, shape, cloud, T)
    if len(costs) == 0:
        return 0.0
    return float(np.cumsum(costs)[-1])


def discrepancies(params: DiscrepancyParams, shape: Shape, cloud: SemanticCloud, poses) -> np.ndarray:
    """total_discrepancy for each pose in a sequence (or ParticleSet)."""
    ps = getattr(poses, "poses", poses)
    return np.array([total_discrepancy(params, shape, cloud, T) for T in ps])


def descent_directions(params: DiscrepancyParams, shape: Shape, x_obj: np.ndarray, labels: np.ndarray):
    """Batched per-point ascent directions of the cost at object-frame points.

    Returns (directions (n,3), costs (n,)).  Stepping a point against its
    direction reduces its cost; zero where the cost is zero.  Gradients are
    evaluated only where the cost is active.
    """
    v = shape.sdf(x_obj)
    n = len(x_obj)
    dirs = np.zeros((n, 3))
    costs = np.zeros(n)
    for sem in (Semantics.FREE, Semantics.OCCUPIED, Semantics.SURFACE):
        mask = labels == int(sem)
        if mask.any():
            costs[mask] = _class_costs(params, v[mask], int(sem))
    active = costs > 0
    if not active.any():
        return dirs, costs
    g = shape.gradient(x_obj[active])
    scale = np.where(
        labels[active] == int(Semantics.FREE),
        -costs[active],
        np.where(labels[active] == int(Semantics.OCCUPIED), costs[active], v[active]),
    )
    dirs[active] = scale[:, None] * g
    return dirs, costs


def point_cost_descent(params: DiscrepancyParams, shape: Shape, x_obj, s: Semantics) -> np.ndarray:
    d, _ = descent_directions(
        params, shape, np.asarray(x_obj, dtype=np.float64)[None, :], np.array([int(s)])
    )
    return d[0]


@dataclass(frozen=True)
class DescentSchedule:
    """Per-iteration caps on the pose update.

    ``step_t`` caps the translation moved per step (meters) and ``step_r``
    the rotation (radians); both shrink by ``decay`` each iteration.  The
    update direction itself is the error-scaled aggregate of the point
    directions, so steps shorter than the cap take the full estimate.
    """

    step_t: float = 1e-2
    step_r: float = 1e-1
    decay: float = 0.9


def _clamp_norm(vec: np.ndarray, cap: float) -> np.ndarray:
    n = float(np.linalg.norm(vec))
    if n <= cap or n < 1e-15:
        return vec
    return vec * (cap / n)


def _descent_step_with_cost(
    params: DiscrepancyParams,
    shape: Shape,
    cloud: SemanticCloud,
    T: Pose,
    step_t: float,
    step_r: float,
    planar: bool,
) -> tuple[Pose, float]:
    """One descent step; also returns the cost at the incoming pose (from
    the same distance evaluation, so refinement needs one pass per step)."""
    x_obj = T.transform(cloud.positions)
    dirs, costs = descent_directions(params, shape, x_obj, cloud.labels)
    cost_here = float(np.cumsum(costs)[-1]) if len(costs) else 0.0
    active = costs > 0
    if not active.any():
        return T, cost_here

    # aggregate over active points only: satisfied points carry no error
    # signal and would otherwise dilute the step magnitude estimate
    x_act = x_obj[active]
    d_act = dirs[active]
    g_mean = d_act.mean(axis=0)
    lever_sq = float(np.mean(np.sum(x_act**2, axis=-1)))
    torque = np.cross(x_act, d_act).mean(axis=0) / max(lever_sq, 1e-12)

    if planar:
        g_mean = g_mean.copy()
        g_mean[2] = 0.0
        torque = np.array([0.0, 0.0, torque[2]])

    dt = _clamp_norm(g_mean, step_t)
    omega = _clamp_norm(torque, step_r)

    new_t = T.translation - dt
    angle = float(np.linalg.norm(omega))
    if angle > 1e-15:
        R_delta = rotation_about_axis(omega / angle, -angle)
        new_R = orthonormalize(R_delta @ T.rotation)
        new_t = R_delta @ new_t
    else:
        new_R = T.rotation
    return Pose(new_R, new_t), cost_here


def pose_descent_step(
    params: DiscrepancyParams,
    shape: Shape,
    cloud: SemanticCloud,
    T: Pose,
    step_t: float = 1e-2,
    step_r: float = 1e-1,
    planar: bool = False,
) -> Pose:
    """One aggregated descent step of the total discrepancy over the pose.

    Translation uses the mean point direction; rotation uses the mean cross
    product of object-frame lever arms with the directions, normalized by
    the mean squared lever to act like an angle estimate.  Planar poses
    update only x, y and yaw.  Zero cost leaves the pose unchanged.
    """
    if len(cloud) == 0:
        return T
    return _descent_step_with_cost(params, shape, cloud, T, step_t, step_r, planar)[0]


def refine_pose(
    params: DiscrepancyParams,
    shape: Shape,
    cloud: SemanticCloud,
    T: Pose,
    steps: int,
    schedule: DescentSchedule = DescentSchedule(),
    planar: bool = False,
) -> Pose:
    """Run ``steps`` descent iterations with a decaying step cap, keeping the
    best iterate seen (descent is not monotone on hard instances)."""
    if steps <= 0 or len(cloud) == 0:
        return T
    best = T
    best_cost = None
    current = T
    st, sr = schedule.step_t, schedule.step_r
    for _ in range(steps):
        nxt, cost_here = _descent_step_with_cost(params, shape, cloud, current, st, sr, planar)
        if best_cost is None or cost_here < best_cost:
            best, best_cost = current, cost_here
        current = nxt
        st *= schedule.decay
        sr *= schedule.decay
    final_cost = total_discrepancy(params, shape, cloud, current)
    if final_cost < best_cost:
        best = current
    return best
