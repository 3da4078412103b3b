"""Semantic point clouds, the probabilistic contact sensor model, voxel
downsampling, and merging of observations across steps."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, Shape


class Semantics(enum.IntEnum):
    FREE = 0
    OCCUPIED = 1
    SURFACE = 2


_CLASS_ORDER = (Semantics.FREE, Semantics.OCCUPIED, Semantics.SURFACE)


@dataclass(frozen=True)
class SemanticPoint:
    position: np.ndarray
    semantics: Semantics


@dataclass
class SemanticCloud:
    """Labeled world-frame points, partitioned by semantics.

    Storage preserves insertion order across the whole cloud; the per-class
    accessors are disjoint, exhaustive views of it.  Treat instances as
    immutable snapshots: every operation returns a new cloud.
    """

    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        if len(self.positions) != len(self.labels):
            raise ValueError("positions and labels length mismatch")

    @staticmethod
    def from_parts(free=None, occupied=None, surface=None) -> "SemanticCloud":
        chunks, labs = [], []
        for pts, sem in ((free, Semantics.FREE), (occupied, Semantics.OCCUPIED), (surface, Semantics.SURFACE)):
            if pts is not None and len(pts):
                a = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
                chunks.append(a)
                labs.append(np.full(len(a), int(sem), dtype=np.int8))
        if not chunks:
            return SemanticCloud()
        return SemanticCloud(np.concatenate(chunks), np.concatenate(labs))

    @staticmethod
    def from_points(points: list[SemanticPoint]) -> "SemanticCloud":
        if not points:
            return SemanticCloud()
        pos = np.stack([np.asarray(p.position, dtype=np.float64) for p in points])
        lab = np.array([int(p.semantics) for p in points], dtype=np.int8)
        return SemanticCloud(pos, lab)

    def __len__(self) -> int:
        return len(self.positions)

    def class_positions(self, sem: Semantics) -> np.ndarray:
        return self.positions[self.labels == int(sem)]

    @property
    def free(self) -> np.ndarray:
        return self.class_positions(Semantics.FREE)

    @property
    def occupied(self) -> np.ndarray:
        return self.class_positions(Semantics.OCCUPIED)

    @property
    def surface(self) -> np.ndarray:
        return self.class_positions(Semantics.SURFACE)

    def extend(self, other: "SemanticCloud") -> "SemanticCloud":
        """Union preserving insertion order: self's points first, then other's."""
        if len(other) == 0:
            return SemanticCloud(self.positions.copy(), self.labels.copy())
        if len(self) == 0:
            return SemanticCloud(other.positions.copy(), other.labels.copy())
        return SemanticCloud(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.labels, other.labels]),
        )

    def append(self, position, sem: Semantics) -> "SemanticCloud":
        return self.extend(SemanticCloud(np.asarray(position, dtype=np.float64)[None, :], np.array([int(sem)], dtype=np.int8)))


@dataclass(frozen=True)
class SensorModel:
    """Probability of observing each semantics class given a signed distance.

    ``zeta`` is a contact-bias tolerance (meters): distances within it are
    treated as on-surface.  ``alpha`` controls how fast free/occupied
    certainty grows with distance (1/meters).  The three class
    probabilities sum to one for every input by construction.
    """

    alpha: float = 100.0
    zeta: float = 0.003

    def probabilities(self, v):
        """Return (p_free, p_occupied, p_surface) for sdf value(s) ``v``."""
        v = np.asarray(v, dtype=np.float64)
        sign = np.where(v > 0, 1.0, -1.0)
        vt = sign * np.maximum(0.0, np.abs(v) - self.zeta)
        # the hinge zeroes whichever branch would overflow, so clamp exponents
        p_free = np.maximum(0.0, 1.0 - np.exp(np.minimum(-self.alpha * vt, 0.0)))
        p_occ = np.maximum(0.0, 1.0 - np.exp(np.minimum(self.alpha * vt, 0.0)))
        p_surf = np.exp(-self.alpha * np.abs(vt))
        return p_free, p_occ, p_surf


def sensor_probabilities(model: SensorModel, v: float) -> tuple[float, float, float]:
    pf, po, ps = model.probabilities(np.float64(v))
    return float(pf), float(po), float(ps)


def _downsample_positions(points: np.ndarray, r: float) -> np.ndarray:
    """Occupied-cell centers of a grid with cell side ``r`` spanning the points.

    The grid is anchored so the minimum corner of the point extent is the
    center of the first cell, which makes the operation idempotent.  Output
    follows grid scan order (sorted cell indices).
    """
    if len(points) == 0:
        return np.zeros((0, 3))
    anchor = points.min(axis=0) - 0.5 * r
    idx = np.floor((points - anchor) / r).astype(np.int64)
    cells = np.unique(idx, axis=0)  # sorted lexicographically: deterministic
    return anchor + (cells + 0.5) * r


def voxel_downsample(cloud: SemanticCloud, r: float) -> SemanticCloud:
    """Downsample each semantics class on its own grid of resolution ``r``."""
    if r <= 0:
        raise ValueError("downsample resolution must be positive")
    return SemanticCloud.from_parts(
        free=_downsample_positions(cloud.free, r),
        occupied=_downsample_positions(cloud.occupied, r),
        surface=_downsample_positions(cloud.surface, r),
    )


def downsample_positions(points: np.ndarray, r: float) -> np.ndarray:
    """Class-free position downsampling (used for trajectory sweeps)."""
    return _downsample_positions(np.asarray(points, dtype=np.float64).reshape(-1, 3), r)


def merge_observations(
    prev: SemanticCloud,
    new: SemanticCloud,
    particles,
    dT_w: Pose,
    shape: Shape,
    r_free: float = 0.010,
    r_surf: float = 0.002,
) -> SemanticCloud:
    """Fold a new observation set into the accumulated one.

    Previous non-free points ride along with the estimated object motion
    ``dT_w``; previous free points stay where they are but are kept only if
    every pose particle still places them strictly outside the object.  The
    union with the new observations is voxel downsampled per class
    (``r_free`` for free space, ``r_surf`` for surface and occupied).
    """
    moved_occ = dT_w.transform(prev.occupied) if len(prev.occupied) else prev.occupied
    moved_surf = dT_w.transform(prev.surface) if len(prev.surface) else prev.surface

    poses = getattr(particles, "poses", particles)

    def consistent_free(pts: np.ndarray) -> np.ndarray:
        if len(pts) == 0:
            return pts
        keep = np.ones(len(pts), dtype=bool)
        for pose in poses:
            keep &= shape.sdf(pose.transform(pts)) > 0.0
            if not keep.any():
                break
        return pts[keep]

    free_prev = consistent_free(prev.free)
    merged = SemanticCloud.from_parts(free=free_prev, occupied=moved_occ, surface=moved_surf).extend(new)
    # re-filter after downsampling: a cell center can fall inside a particle
    # even when the points that voted for the cell were outside
    free_ds = consistent_free(_downsample_positions(merged.free, r_free))
    occ_ds = _downsample_positions(merged.occupied, r_surf)
    surf_ds = _downsample_positions(merged.surface, r_surf)
    return SemanticCloud.from_parts(free=free_ds, occupied=occ_ds, surface=surf_ds)
