"""Rigid transforms, signed distance shapes, and interpolated scalar fields.

Conventions used throughout the package:

- A :class:`Pose` maps world coordinates into the object frame,
  ``x_obj = R @ x_world + t``.  The inverse maps object points back to
  the world.
- Signed distances are negative strictly inside a shape, positive
  strictly outside, zero on the surface, in meters.
- CSG unions take the min of child distances and intersections the max.
  Off the surface this is only a (sign-correct) lower bound on the true
  Euclidean distance for unions; every consumer in this package only
  thresholds near zero, where the bound is tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_GRAD_EPS = 1e-12


def _as_points(p) -> tuple[np.ndarray, bool]:
    """Coerce to float64, returning (array of shape (..., 3), was_single)."""
    a = np.asarray(p, dtype=np.float64)
    if a.shape == (3,):
        return a[None, :], True
    return a, False


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis."""
    ax = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(ax)
    if n < _GRAD_EPS or angle == 0.0:
        return np.eye(3)
    ax = ax / n
    kx, ky, kz = ax
    K = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto SO(3) via polar decomposition."""
    U, _, Vt = np.linalg.svd(R)
    out = U @ Vt
    if np.linalg.det(out) < 0:
        U = U.copy()
        U[:, -1] = -U[:, -1]
        out = U @ Vt
    return out


def quaternion_from_matrix(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) from a rotation matrix."""
    m = R
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    q = np.array([w, x, y, z])
    return q / np.linalg.norm(q)


def matrix_from_quaternion(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class Pose:
    """Rigid world-to-object transform: ``x_obj = rotation @ x_world + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_placement(center, yaw: float = 0.0) -> "Pose":
        """Pose of an object whose frame origin sits at ``center`` with the given yaw.

        Returns the world-to-object map of that placement.
        """
        c = np.asarray(center, dtype=np.float64)
        R = rotation_z(yaw).T
        return Pose(R, -R @ c)

    @staticmethod
    def delta(translation=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0), angle: float = 0.0) -> "Pose":
        """A raw SE(3) element ``[R | t]``, used for perturbations and pose deltas."""
        return Pose(rotation_about_axis(axis, angle), np.asarray(translation, dtype=np.float64))

    def compose(self, other: "Pose") -> "Pose":
        """``self`` after ``other``: ``(self * other)(x) = self(other(x))``."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def transform(self, points):
        """Apply the map to one point ``(3,)`` or a batch ``(..., 3)``.

        Written component-wise so that batched evaluation is bit-identical
        to single-point evaluation.
        """
        p, single = _as_points(points)
        R, t = self.rotation, self.translation
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        out = np.empty(p.shape, dtype=np.float64)
        out[..., 0] = R[0, 0] * x + R[0, 1] * y + R[0, 2] * z + t[0]
        out[..., 1] = R[1, 0] * x + R[1, 1] * y + R[1, 2] * z + t[1]
        out[..., 2] = R[2, 0] * x + R[2, 1] * y + R[2, 2] * z + t[2]
        return out[0] if single else out

    def rotate(self, vectors):
        """Apply only the rotation part (for directions)."""
        p, single = _as_points(vectors)
        R = self.rotation
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        out = np.empty(p.shape, dtype=np.float64)
        out[..., 0] = R[0, 0] * x + R[0, 1] * y + R[0, 2] * z
        out[..., 1] = R[1, 0] * x + R[1, 1] * y + R[1, 2] * z
        out[..., 2] = R[2, 0] * x + R[2, 1] * y + R[2, 2] * z
        return out[0] if single else out

    def object_center_world(self) -> np.ndarray:
        """World position of the object-frame origin."""
        return -self.rotation.T @ self.translation

    def placement_yaw(self) -> float:
        """Yaw of the object placement (rotation of the object frame in the world)."""
        return math.atan2(self.rotation[0, 1], self.rotation[0, 0])

    def rotation_angle(self) -> float:
        """Magnitude of the rotation, radians in [0, pi]."""
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return math.acos(min(1.0, max(-1.0, c)))

    def is_identity(self, trans_tol: float = 1e-6, rot_tol: float = 1e-6) -> bool:
        return float(np.linalg.norm(self.translation)) <= trans_tol and self.rotation_angle() <= rot_tol

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


def transform_point(pose: Pose, x) -> np.ndarray:
    return pose.transform(x)


def _normalize_rows(g: np.ndarray) -> np.ndarray:
    n = np.sqrt(g[..., 0] ** 2 + g[..., 1] ** 2 + g[..., 2] ** 2)
    bad = n < _GRAD_EPS
    if np.any(bad):
        g = g.copy()
        g[bad] = (1.0, 0.0, 0.0)  # deterministic subgradient at degenerate points
        n = np.where(bad, 1.0, n)
    return g / n[..., None]


# ---------------------------------------------------------------------------
# 2D profiles for extrusion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle2D:
    radius: float

    def sdf(self, x, y):
        return np.sqrt(x**2 + y**2) - self.radius

    def gradient(self, x, y):
        r = np.sqrt(x**2 + y**2)
        safe = np.maximum(r, _GRAD_EPS)
        gx, gy = x / safe, y / safe
        deg = r < _GRAD_EPS
        gx = np.where(deg, 1.0, gx)
        gy = np.where(deg, 0.0, gy)
        return gx, gy

    def bounds(self):
        r = self.radius
        return (-r, -r), (r, r)


@dataclass(frozen=True)
class Annulus2D:
    """Ring between two concentric circles: exact 2D distance."""

    outer_radius: float
    inner_radius: float

    def __post_init__(self):
        if not 0.0 < self.inner_radius < self.outer_radius:
            raise ValueError("annulus requires 0 < inner_radius < outer_radius")

    @property
    def mid_radius(self):
        return 0.5 * (self.outer_radius + self.inner_radius)

    @property
    def half_width(self):
        return 0.5 * (self.outer_radius - self.inner_radius)

    def sdf(self, x, y):
        r = np.sqrt(x**2 + y**2)
        return np.abs(r - self.mid_radius) - self.half_width

    def gradient(self, x, y):
        r = np.sqrt(x**2 + y**2)
        safe = np.maximum(r, _GRAD_EPS)
        s = np.where(r >= self.mid_radius, 1.0, -1.0)
        gx, gy = s * x / safe, s * y / safe
        deg = r < _GRAD_EPS
        gx = np.where(deg, -1.0, gx)  # at the center, distance decreases outward
        gy = np.where(deg, 0.0, gy)
        return gx, gy

    def bounds(self):
        r = self.outer_radius
        return (-r, -r), (r, r)


@dataclass(frozen=True)
class Rect2D:
    half_x: float
    half_y: float

    def sdf(self, x, y):
        qx = np.abs(x) - self.half_x
        qy = np.abs(y) - self.half_y
        outside = np.sqrt(np.maximum(qx, 0.0) ** 2 + np.maximum(qy, 0.0) ** 2)
        inside = np.minimum(np.maximum(qx, qy), 0.0)
        return outside + inside

    def gradient(self, x, y):
        qx = np.abs(x) - self.half_x
        qy = np.abs(y) - self.half_y
        sx = np.where(x >= 0, 1.0, -1.0)
        sy = np.where(y >= 0, 1.0, -1.0)
        out = (qx > 0) | (qy > 0)
        ox = np.maximum(qx, 0.0)
        oy = np.maximum(qy, 0.0)
        n = np.maximum(np.sqrt(ox**2 + oy**2), _GRAD_EPS)
        gx_out, gy_out = sx * ox / n, sy * oy / n
        # inside: move along the axis of maximal q (ties: x first)
        gx_in = np.where(qx >= qy, sx, 0.0)
        gy_in = np.where(qx >= qy, 0.0, sy)
        return np.where(out, gx_out, gx_in), np.where(out, gy_out, gy_in)

    def bounds(self):
        return (-self.half_x, -self.half_y), (self.half_x, self.half_y)


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


class Shape:
    """Base class: closed signed-distance description with a bounding box."""

    def sdf(self, points):
        raise NotImplementedError

    def gradient(self, points):
        """Unit-norm direction of increasing distance (analytic, deterministic ties)."""
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def characteristic_length(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def _pts(self, points):
        return _as_points(points)

    def _ret(self, v, single):
        return float(v[0]) if single else v

    def _retg(self, g, single):
        return g[0] if single else g


@dataclass(frozen=True)
class Sphere(Shape):
    radius: float

    def sdf(self, points):
        p, single = self._pts(points)
        v = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2 + p[..., 2] ** 2) - self.radius
        return self._ret(v, single)

    def gradient(self, points):
        p, single = self._pts(points)
        return self._retg(_normalize_rows(p.copy()), single)

    def bounding_box(self):
        r = self.radius
        return np.full(3, -r), np.full(3, r)


@dataclass(frozen=True)
class Box(Shape):
    half_extents: tuple[float, float, float]

    def sdf(self, points):
        p, single = self._pts(points)
        h = self.half_extents
        qx = np.abs(p[..., 0]) - h[0]
        qy = np.abs(p[..., 1]) - h[1]
        qz = np.abs(p[..., 2]) - h[2]
        outside = np.sqrt(
            np.maximum(qx, 0.0) ** 2 + np.maximum(qy, 0.0) ** 2 + np.maximum(qz, 0.0) ** 2
        )
        inside = np.minimum(np.maximum(np.maximum(qx, qy), qz), 0.0)
        return self._ret(outside + inside, single)

    def gradient(self, points):
        p, single = self._pts(points)
        h = self.half_extents
        q = np.stack([np.abs(p[..., i]) - h[i] for i in range(3)], axis=-1)
        sgn = np.where(p >= 0, 1.0, -1.0)
        out_mask = np.any(q > 0, axis=-1)
        qpos = np.maximum(q, 0.0)
        g_out = _normalize_rows(qpos * sgn)
        # inside: first axis of maximal q
        order = np.argmax(q, axis=-1)
        g_in = np.zeros_like(p)
        idx = np.indices(order.shape)
        g_in[(*idx, order)] = np.take_along_axis(sgn, order[..., None], axis=-1)[..., 0]
        g = np.where(out_mask[..., None], g_out, g_in)
        return self._retg(g, single)

    def bounding_box(self):
        h = np.asarray(self.half_extents, dtype=np.float64)
        return -h, h


@dataclass(frozen=True)
class Extrusion(Shape):
    """A 2D profile extruded symmetrically along z."""

    profile: object
    half_height: float

    def _wz(self, p):
        return np.abs(p[..., 2]) - self.half_height

    def sdf(self, points):
        p, single = self._pts(points)
        d2 = self.profile.sdf(p[..., 0], p[..., 1])
        wz = self._wz(p)
        outside = np.sqrt(np.maximum(d2, 0.0) ** 2 + np.maximum(wz, 0.0) ** 2)
        inside = np.minimum(np.maximum(d2, wz), 0.0)
        return self._ret(outside + inside, single)

    def gradient(self, points):
        p, single = self._pts(points)
        d2 = self.profile.sdf(p[..., 0], p[..., 1])
        gx, gy = self.profile.gradient(p[..., 0], p[..., 1])
        wz = self._wz(p)
        sz = np.where(p[..., 2] >= 0, 1.0, -1.0)
        a = np.maximum(d2, 0.0)
        b = np.maximum(wz, 0.0)
        g_out = np.stack([a * gx, a * gy, b * sz], axis=-1)
        g_out = _normalize_rows(g_out)
        in_profile = d2 >= wz  # ties: profile direction first
        g_in = np.stack(
            [np.where(in_profile, gx, 0.0), np.where(in_profile, gy, 0.0), np.where(in_profile, 0.0, sz)],
            axis=-1,
        )
        out_mask = (d2 > 0) | (wz > 0)
        g = np.where(out_mask[..., None], g_out, g_in)
        return self._retg(g, single)

    def bounding_box(self):
        (lx, ly), (hx, hy) = self.profile.bounds()
        return np.array([lx, ly, -self.half_height]), np.array([hx, hy, self.half_height])


def Cylinder(radius: float, half_height: float) -> Extrusion:
    """Axis-aligned (z) cylinder, exact distance."""
    return Extrusion(Circle2D(radius), half_height)


@dataclass(frozen=True)
class Union(Shape):
    children: tuple[Shape, ...]

    def __init__(self, *children: Shape):
        object.__setattr__(self, "children", tuple(children))

    def sdf(self, points):
        p, single = self._pts(points)
        v = self.children[0].sdf(p)
        for c in self.children[1:]:
            v = np.minimum(v, c.sdf(p))
        return self._ret(v, single)

    def gradient(self, points):
        p, single = self._pts(points)
        vals = np.stack([c.sdf(p) for c in self.children], axis=0)
        pick = np.argmin(vals, axis=0)  # first minimum wins: deterministic
        grads = np.stack([c.gradient(p) for c in self.children], axis=0)
        g = np.take_along_axis(grads, pick[None, ..., None], axis=0)[0]
        return self._retg(g, single)

    def bounding_box(self):
        los, his = zip(*(c.bounding_box() for c in self.children))
        return np.min(np.stack(los), axis=0), np.max(np.stack(his), axis=0)


@dataclass(frozen=True)
class Intersection(Shape):
    children: tuple[Shape, ...]

    def __init__(self, *children: Shape):
        object.__setattr__(self, "children", tuple(children))

    def sdf(self, points):
        p, single = self._pts(points)
        v = self.children[0].sdf(p)
        for c in self.children[1:]:
            v = np.maximum(v, c.sdf(p))
        return self._ret(v, single)

    def gradient(self, points):
        p, single = self._pts(points)
        vals = np.stack([c.sdf(p) for c in self.children], axis=0)
        pick = np.argmax(vals, axis=0)
        grads = np.stack([c.gradient(p) for c in self.children], axis=0)
        g = np.take_along_axis(grads, pick[None, ..., None], axis=0)[0]
        return self._retg(g, single)

    def bounding_box(self):
        los, his = zip(*(c.bounding_box() for c in self.children))
        return np.max(np.stack(los), axis=0), np.min(np.stack(his), axis=0)


@dataclass(frozen=True)
class Complement(Shape):
    """Sign-flipped child.  The bounding box is the child's (the complement is
    unbounded; the box only delimits the region of interest)."""

    child: Shape

    def sdf(self, points):
        p, single = self._pts(points)
        return self._ret(-self.child.sdf(p), single)

    def gradient(self, points):
        p, single = self._pts(points)
        return self._retg(-self.child.gradient(p), single)

    def bounding_box(self):
        return self.child.bounding_box()


@dataclass(frozen=True)
class Transformed(Shape):
    """Child shape placed in the parent frame: sdf(p) = child.sdf(T p)."""

    child: Shape
    pose: Pose  # parent-to-child-frame map

    def sdf(self, points):
        p, single = self._pts(points)
        return self._ret(self.child.sdf(self.pose.transform(p)), single)

    def gradient(self, points):
        p, single = self._pts(points)
        g = self.child.gradient(self.pose.transform(p))
        return self._retg(self.pose.inverse().rotate(g), single)

    def bounding_box(self):
        lo, hi = self.child.bounding_box()
        corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        world = self.pose.inverse().transform(corners)
        return world.min(axis=0), world.max(axis=0)


def translated(child: Shape, offset) -> Transformed:
    off = np.asarray(offset, dtype=np.float64)
    return Transformed(child, Pose(np.eye(3), -off))


def mug_shape(
    outer_radius: float = 0.05,
    inner_radius: float = 0.042,
    height: float = 0.08,
    handle_size=(0.02, 0.015, 0.05),
) -> Shape:
    """Annular cup with a handle box attached at +x, desk scale."""
    body = Extrusion(Annulus2D(outer_radius, inner_radius), height / 2.0)
    hs = np.asarray(handle_size, dtype=np.float64) / 2.0
    handle = translated(Box((hs[0], hs[1], hs[2])), (outer_radius + hs[0], 0.0, 0.0))
    return Union(body, handle)


def sdf_eval(shape: Shape, p) -> float:
    return shape.sdf(p)


def sdf_gradient(shape: Shape, p):
    return shape.gradient(p)


# ---------------------------------------------------------------------------
# Voxelized shapes
# ---------------------------------------------------------------------------


class VoxelizedShape(Shape):
    """Shape baked into a regular grid, queried by interpolation.

    Gradients use central finite differences with step = half the voxel
    resolution.  Outside the baked grid the distance is the clamped-grid
    value plus the distance to the grid box (an upper bound on the true
    distance by the Lipschitz property, sign-correct beyond the padding).
    """

    def __init__(self, source: Shape, resolution: float, padding: float = 0.02):
        lo, hi = source.bounding_box()
        lo = lo - padding
        hi = hi + padding
        dims = np.maximum(np.floor((hi - lo) / resolution + 1e-9).astype(int) + 1, 2)
        axes = [lo[i] + resolution * np.arange(dims[i]) for i in range(3)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
        vals = source.sdf(pts).reshape(dims)
        self.field = ScalarField(origin=lo, resolution=resolution, values=vals, outside_value=np.nan)
        self._lo = lo
        self._hi = hi
        self.resolution = resolution
        self._bbox = source.bounding_box()

    def sdf(self, points):
        p, single = self._pts(points)
        clamped = np.clip(p, self._lo, self._hi)
        base = self.field.query(clamped)
        extra = np.sqrt(np.sum((p - clamped) ** 2, axis=-1))
        v = base + extra
        return self._ret(v, single)

    def gradient(self, points):
        p, single = self._pts(points)
        h = 0.5 * self.resolution
        g = np.empty(p.shape, dtype=np.float64)
        for i in range(3):
            dp = np.zeros(3)
            dp[i] = h
            g[..., i] = (self.sdf(p + dp) - self.sdf(p - dp)) / (2 * h)
        return self._retg(_normalize_rows(g), single)

    def bounding_box(self):
        return self._bbox


# ---------------------------------------------------------------------------
# Scalar fields and workspaces
# ---------------------------------------------------------------------------


@dataclass
class ScalarField:
    """Dense axis-aligned voxel grid of node values with multilinear querying.

    A query exactly at a grid node returns the stored value; queries inside
    the grid interpolate the surrounding nodes (degenerate single-node axes
    contribute no interpolation weight); anything outside returns
    ``outside_value``.
    """

    origin: np.ndarray
    resolution: float
    values: np.ndarray
    outside_value: float = 0.0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    def node_positions(self) -> np.ndarray:
        axes = [self.origin[i] + self.resolution * np.arange(self.dims[i]) for i in range(3)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        return np.stack([X, Y, Z], axis=-1).reshape(-1, 3)

    def query(self, points):
        p, single = _as_points(points)
        if self.dims[2] == 1:
            v = self._query_planar(p)
        else:
            v = self._query_general(p)
        return float(v[0]) if single else v

    def _query_planar(self, p: np.ndarray) -> np.ndarray:
        nx, ny, _ = self.dims
        eps = 1e-9
        ux = (p[..., 0] - self.origin[0]) / self.resolution
        uy = (p[..., 1] - self.origin[1]) / self.resolution
        uz = (p[..., 2] - self.origin[2]) / self.resolution
        inside = (
            (ux >= -eps) & (ux <= nx - 1 + eps)
            & (uy >= -eps) & (uy <= ny - 1 + eps)
            & (uz >= -eps) & (uz <= eps)
        )
        ux = np.clip(ux, 0.0, nx - 1)
        uy = np.clip(uy, 0.0, ny - 1)
        ix = np.minimum(ux.astype(np.intp), max(nx - 2, 0))
        iy = np.minimum(uy.astype(np.intp), max(ny - 2, 0))
        fx = ux - ix
        fy = uy - iy
        plane = self.values[:, :, 0]
        ix1 = np.minimum(ix + 1, nx - 1)
        iy1 = np.minimum(iy + 1, ny - 1)
        v = (1.0 - fx) * ((1.0 - fy) * plane[ix, iy] + fy * plane[ix, iy1]) + fx * (
            (1.0 - fy) * plane[ix1, iy] + fy * plane[ix1, iy1]
        )
        return np.where(inside, v, self.outside_value)

    def _query_general(self, p: np.ndarray) -> np.ndarray:
        u = (p - self.origin) / self.resolution
        dims = np.asarray(self.dims)
        eps = 1e-9
        inside = np.all((u >= -eps) & (u <= dims - 1 + eps), axis=-1)
        uc = np.clip(u, 0.0, np.maximum(dims - 1, 0))
        i0 = np.minimum(np.floor(uc).astype(int), np.maximum(dims - 2, 0))
        f = uc - i0
        # degenerate axes (single node): index 0, weight on the low corner
        for ax in range(3):
            if self.dims[ax] == 1:
                i0[..., ax] = 0
                f[..., ax] = 0.0
        i1 = np.minimum(i0 + 1, dims - 1)
        v = np.zeros(p.shape[:-1], dtype=np.float64)
        fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
        for cx, wx in ((0, 1.0 - fx), (1, fx)):
            ix = i0[..., 0] if cx == 0 else i1[..., 0]
            for cy, wy in ((0, 1.0 - fy), (1, fy)):
                iy = i0[..., 1] if cy == 0 else i1[..., 1]
                for cz, wz in ((0, 1.0 - fz), (1, fz)):
                    iz = i0[..., 2] if cz == 0 else i1[..., 2]
                    w = wx * wy * wz
                    v += w * self.values[ix, iy, iz]
        return np.where(inside, v, self.outside_value)


def field_query(f: ScalarField, x):
    return f.query(x)


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned box sampled as a regular grid of query positions."""

    bounds: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    resolution: float

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("workspace resolution must be positive")

    @property
    def counts(self) -> tuple[int, int, int]:
        out = []
        for lo, hi in self.bounds:
            extent = hi - lo
            out.append(int(math.floor(extent / self.resolution + 1e-9)) + 1)
        return tuple(out)

    def axes(self) -> list[np.ndarray]:
        return [
            self.bounds[i][0] + self.resolution * np.arange(self.counts[i]) for i in range(3)
        ]

    def grid_points(self) -> np.ndarray:
        """Row-major (x outer, z inner) grid positions, both boundary planes included."""
        X, Y, Z = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([X, Y, Z], axis=-1).reshape(-1, 3)

    def make_field(self, flat_values: np.ndarray, outside_value: float = 0.0) -> ScalarField:
        origin = np.array([b[0] for b in self.bounds])
        return ScalarField(
            origin=origin,
            resolution=self.resolution,
            values=np.asarray(flat_values, dtype=np.float64).reshape(self.counts),
            outside_value=outside_value,
        )


def enumerate_workspace(w: Workspace) -> np.ndarray:
    return w.grid_points()
