"""Rigid, rotating, unpolarized mass sources.

Sources are rectangular boxes of uniform nucleon density.  A box is
discretized in its own body frame and then carried around a pivot by a
uniform rotation.  The vapor cell sits at the lab origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, InvalidResolutionError

CW = "CW"
CCW = "CCW"

# relative tolerance when deciding whether a resolution tiles an edge exactly
_TILE_RTOL = 1e-9


def _as_vec3(value, name):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ConfigError(f"{name} must be a 3-vector, got shape {arr.shape}")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class SourceSpec:
    """Uniform-density box.

    ``edges`` are the body-frame box edge lengths (m), ``offset`` is the
    body-frame position of the box center relative to the pivot (m).
    """

    edges: tuple
    offset: tuple
    mass: float
    nucleons: float
    name: str = "source"

    def __post_init__(self):
        object.__setattr__(self, "edges", _as_vec3(self.edges, "edges"))
        object.__setattr__(self, "offset", _as_vec3(self.offset, "offset"))
        if min(self.edges) <= 0:
            raise ConfigError(f"{self.name}: edge lengths must be positive")
        if self.mass <= 0:
            raise ConfigError(f"{self.name}: mass must be positive")
        if self.nucleons <= 0:
            raise ConfigError(f"{self.name}: nucleon count must be positive")

    @property
    def volume(self) -> float:
        a, b, c = self.edges
        return a * b * c

    @property
    def nucleon_density(self) -> float:
        return self.nucleons / self.volume


@dataclass(frozen=True)
class RotationSpec:
    """Uniform rotation of a rigid body about an axis through ``pivot``.

    CW advances the angle as ``phase0 + 2*pi*nu*t`` about ``normal``
    (right-hand rule), CCW as ``phase0 - 2*pi*nu*t``.
    """

    pivot: tuple
    normal: tuple = (0.0, 1.0, 0.0)
    frequency: float = 4.997
    direction: str = CW
    phase0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pivot", _as_vec3(self.pivot, "pivot"))
        n = np.asarray(_as_vec3(self.normal, "normal"))
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ConfigError(f"rotation normal must be a unit vector, |n| = {np.linalg.norm(n)!r}")
        object.__setattr__(self, "normal", tuple(float(x) for x in n))
        if not self.frequency > 0:
            raise ConfigError("rotation frequency must be positive")
        direction = str(self.direction).upper()
        if direction not in (CW, CCW):
            raise ConfigError(f"direction must be CW or CCW, got {self.direction!r}")
        object.__setattr__(self, "direction", direction)

    @property
    def sign(self) -> int:
        return 1 if self.direction == CW else -1

    @property
    def angular_velocity(self) -> float:
        """Signed angular rate about ``normal`` (rad/s)."""
        return self.sign * 2.0 * math.pi * self.frequency

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    def reversed(self) -> "RotationSpec":
        return RotationSpec(self.pivot, self.normal, self.frequency,
                            CCW if self.direction == CW else CW, self.phase0)


@dataclass(frozen=True)
class VoxelCloud:
    """Nucleon-weighted sample points in the body frame (relative to the pivot)."""

    positions: np.ndarray
    counts: np.ndarray
    resolution: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        cnt = np.asarray(self.counts, dtype=float).reshape(-1)
        if pos.shape[0] != cnt.shape[0]:
            raise ConfigError("positions and counts differ in length")
        pos.setflags(write=False)
        cnt.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "counts", cnt)

    def __len__(self):
        return self.counts.shape[0]

    @property
    def total(self) -> float:
        return math.fsum(self.counts)

    @classmethod
    def point(cls, position, count=1.0):
        return cls(np.asarray(position, dtype=float).reshape(1, 3), np.array([count]), 0.0)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros(0), 0.0)


@dataclass(frozen=True)
class Pose:
    t: float
    theta: float
    positions: np.ndarray
    velocities: np.ndarray = field(repr=False)


def _axis_cells(edge, resolution):
    """Cell centers and widths along one edge.

    Full cells of width ``resolution`` are laid out symmetrically about the
    edge center; any remainder is split into two clipped cells at the ends.
    """
    ratio = edge / resolution
    n_full = int(math.floor(ratio + _TILE_RTOL))
    rem = edge - n_full * resolution
    if rem <= _TILE_RTOL * edge:
        widths = np.full(n_full, edge / n_full)
    else:
        half = 0.5 * rem
        widths = np.concatenate(([half], np.full(n_full, resolution), [half]))
    edges = np.concatenate(([0.0], np.cumsum(widths)))
    edges *= edge / edges[-1]
    centers = 0.5 * (edges[:-1] + edges[1:]) - 0.5 * edge
    return centers, np.diff(edges)


def build_voxel_cloud(spec: SourceSpec, resolution: float) -> VoxelCloud:
    """Midpoint-rule discretization of ``spec`` on an axis-aligned grid.

    Each voxel carries ``density * volume`` nucleons; clipped boundary
    voxels are smaller, and the counts are renormalized so that the total
    equals ``spec.nucleons`` to rounding.
    """
    if not resolution > 0:
        raise InvalidResolutionError(f"resolution must be positive, got {resolution!r}")
    if resolution > min(spec.edges) * (1 + _TILE_RTOL):
        raise InvalidResolutionError(
            f"resolution {resolution!r} m exceeds smallest edge {min(spec.edges)!r} m of {spec.name}")
    axes = [_axis_cells(e, resolution) for e in spec.edges]
    cx, cy, cz = np.meshgrid(axes[0][0], axes[1][0], axes[2][0], indexing="ij")
    wx, wy, wz = np.meshgrid(axes[0][1], axes[1][1], axes[2][1], indexing="ij")
    positions = np.stack([cx.ravel(), cy.ravel(), cz.ravel()], axis=1) + np.asarray(spec.offset)
    volumes = (wx * wy * wz).ravel()
    counts = spec.nucleon_density * volumes
    counts *= spec.nucleons / math.fsum(counts)
    return VoxelCloud(positions, counts, float(resolution))


def rotation_angle(rotation: RotationSpec, t):
    """Body rotation angle at time(s) ``t``."""
    return rotation.phase0 + rotation.angular_velocity * np.asarray(t, dtype=float)


def rotation_matrices(normal, theta):
    """Rodrigues rotation matrices about unit ``normal``; shape ``theta.shape + (3, 3)``."""
    n = np.asarray(normal, dtype=float)
    theta = np.asarray(theta, dtype=float)
    K = np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])
    c = np.cos(theta)[..., None, None]
    s = np.sin(theta)[..., None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def kinematics(cloud: VoxelCloud, rotation: RotationSpec, times):
    """Lab positions and velocities of every voxel at every time.

    Returns two arrays of shape ``(len(times), len(cloud), 3)``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    R = rotation_matrices(rotation.normal, rotation_angle(rotation, times))
    rel = np.einsum("tij,nj->tni", R, cloud.positions)
    omega = rotation.angular_velocity * np.asarray(rotation.normal)
    vel = np.cross(omega, rel)
    return rel + np.asarray(rotation.pivot), vel


def pose_at(cloud: VoxelCloud, rotation: RotationSpec, t: float) -> Pose:
    pos, vel = kinematics(cloud, rotation, [t])
    return Pose(float(t), float(rotation_angle(rotation, t)), pos[0], vel[0])
