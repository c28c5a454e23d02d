"""Particle data model: AoS particles, SoA buffers, and lattice generation.

All quantities are in reduced Lennard-Jones units. The SoA buffer is the
unit of kernel input; the AoS :class:`Particle` exists for construction,
inspection, and the scalar reference path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ScenarioError

OWNED = 0
HALO = 1
DUMMY = 2


class Ownership(IntEnum):
    OWNED = OWNED
    HALO = HALO
    DUMMY = DUMMY


def _vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    return arr.copy()


@dataclass
class Particle:
    """A single particle with its integration state."""

    id: int
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    old_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ownership: Ownership = Ownership.OWNED

    def __post_init__(self):
        self.position = _vec3(self.position)
        self.velocity = _vec3(self.velocity)
        self.force = _vec3(self.force)
        self.old_force = _vec3(self.old_force)
        self.ownership = Ownership(self.ownership)


@dataclass
class ParticleBuffer:
    """Structure-of-arrays particle storage.

    Every field is a contiguous array of identical length; entry ``k`` of
    each array belongs to the same particle.
    """

    pos_x: np.ndarray
    pos_y: np.ndarray
    pos_z: np.ndarray
    vel_x: np.ndarray
    vel_y: np.ndarray
    vel_z: np.ndarray
    force_x: np.ndarray
    force_y: np.ndarray
    force_z: np.ndarray
    old_force_x: np.ndarray
    old_force_y: np.ndarray
    old_force_z: np.ndarray
    id: np.ndarray
    ownership: np.ndarray

    _FLOAT_FIELDS = (
        "pos_x", "pos_y", "pos_z",
        "vel_x", "vel_y", "vel_z",
        "force_x", "force_y", "force_z",
        "old_force_x", "old_force_y", "old_force_z",
    )

    def __post_init__(self):
        n = len(self.pos_x)
        for name in self._FLOAT_FIELDS + ("id", "ownership"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"property array {name!r} has mismatched length")

    @classmethod
    def empty(cls, n: int) -> "ParticleBuffer":
        floats = {name: np.zeros(n) for name in cls._FLOAT_FIELDS}
        return cls(
            **floats,
            id=np.zeros(n, dtype=np.int64),
            ownership=np.full(n, OWNED, dtype=np.int8),
        )

    def __len__(self) -> int:
        return len(self.pos_x)

    @property
    def real_count(self) -> int:
        """Number of non-dummy entries."""
        return self.ownership_counts()[1]

    @property
    def has_dummies(self) -> bool:
        return self.ownership_counts()[1] < len(self)

    def ownership_counts(self) -> tuple[int, int]:
        """(owned, non-dummy) entry counts, cached.

        Kernels consume this; ownership must stay fixed once a buffer has
        been handed to them. Containers recreate their buffer views on
        rebuild, which refreshes the cache.
        """
        cached = self.__dict__.get("_counts")
        if cached is None:
            cached = (int(np.count_nonzero(self.ownership == OWNED)),
                      int(np.count_nonzero(self.ownership != DUMMY)))
            self.__dict__["_counts"] = cached
        return cached

    def self_pair_slots(self, newton3: bool) -> int:
        """Real pair slots when this buffer interacts with itself.

        Exact for any entry order: counts (p, q) with p owned, q non-dummy,
        and q > p (newton3) or q != p.
        """
        key = "_self_slots_n3" if newton3 else "_self_slots"
        cached = self.__dict__.get(key)
        if cached is None:
            owned = self.ownership == OWNED
            nondummy = self.ownership != DUMMY
            total = int(np.count_nonzero(nondummy))
            if newton3:
                after = total - np.cumsum(nondummy)
                cached = int(after[owned].sum())
            else:
                cached = int(np.count_nonzero(owned)) * max(total - 1, 0)
            self.__dict__[key] = cached
        return cached

    def positions(self) -> np.ndarray:
        """(N, 3) copy of the positions."""
        return np.stack([self.pos_x, self.pos_y, self.pos_z], axis=1)

    def forces(self) -> np.ndarray:
        return np.stack([self.force_x, self.force_y, self.force_z], axis=1)

    def view(self, start: int, stop: int) -> "ParticleBuffer":
        """Zero-copy slice sharing memory with this buffer."""
        kwargs = {name: getattr(self, name)[start:stop]
                  for name in self._FLOAT_FIELDS + ("id", "ownership")}
        return ParticleBuffer(**kwargs)

    def take(self, indices: np.ndarray) -> "ParticleBuffer":
        kwargs = {name: getattr(self, name)[indices]
                  for name in self._FLOAT_FIELDS + ("id", "ownership")}
        return ParticleBuffer(**kwargs)

    def copy(self) -> "ParticleBuffer":
        return self.take(np.arange(len(self)))


def concat_buffers(first: ParticleBuffer, second: ParticleBuffer) -> ParticleBuffer:
    kwargs = {
        name: np.concatenate([getattr(first, name), getattr(second, name)])
        for name in ParticleBuffer._FLOAT_FIELDS + ("id", "ownership")
    }
    return ParticleBuffer(**kwargs)


def soa_from_particles(particles: list[Particle]) -> ParticleBuffer:
    """Pack a particle list into an SoA buffer, preserving order."""
    n = len(particles)
    buf = ParticleBuffer.empty(n)
    for k, p in enumerate(particles):
        buf.pos_x[k], buf.pos_y[k], buf.pos_z[k] = p.position
        buf.vel_x[k], buf.vel_y[k], buf.vel_z[k] = p.velocity
        buf.force_x[k], buf.force_y[k], buf.force_z[k] = p.force
        buf.old_force_x[k], buf.old_force_y[k], buf.old_force_z[k] = p.old_force
        buf.id[k] = p.id
        buf.ownership[k] = int(p.ownership)
    return buf


def particles_from_soa(buf: ParticleBuffer) -> list[Particle]:
    """Inverse of :func:`soa_from_particles`."""
    out = []
    for k in range(len(buf)):
        out.append(Particle(
            id=int(buf.id[k]),
            position=np.array([buf.pos_x[k], buf.pos_y[k], buf.pos_z[k]]),
            velocity=np.array([buf.vel_x[k], buf.vel_y[k], buf.vel_z[k]]),
            force=np.array([buf.force_x[k], buf.force_y[k], buf.force_z[k]]),
            old_force=np.array([buf.old_force_x[k], buf.old_force_y[k],
                                buf.old_force_z[k]]),
            ownership=Ownership(int(buf.ownership[k])),
        ))
    return out


def generate_cube_lattice(
    origin,
    counts: tuple[int, int, int],
    spacing: float,
    velocity=(0.0, 0.0, 0.0),
    id_start: int = 0,
) -> list[Particle]:
    """Regular lattice of ``nx*ny*nz`` particles with a common velocity.

    Ids are assigned sequentially from ``id_start`` in x-fastest order.
    """
    counts = tuple(int(c) for c in counts)
    if any(c < 1 for c in counts):
        raise ScenarioError(f"lattice counts must all be >= 1, got {counts}")
    if spacing <= 0:
        raise ScenarioError(f"lattice spacing must be positive, got {spacing}")
    origin = _vec3(origin)
    v0 = _vec3(velocity)
    particles = []
    pid = id_start
    for kz in range(counts[2]):
        for ky in range(counts[1]):
            for kx in range(counts[0]):
                pos = origin + spacing * np.array([kx, ky, kz], dtype=np.float64)
                particles.append(Particle(id=pid, position=pos, velocity=v0))
                pid += 1
    return particles
