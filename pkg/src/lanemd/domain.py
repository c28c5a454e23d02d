"""Simulation box, interaction parameters, boundary handling, and halos."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ScenarioError, SimulationDivergedError
from .particles import HALO, OWNED, ParticleBuffer, concat_buffers


class BoundaryKind(Enum):
    REFLECTIVE = "reflective"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class SimulationBox:
    """Axis-aligned box with a per-axis boundary condition."""

    min: np.ndarray
    max: np.ndarray
    boundary: tuple[BoundaryKind, BoundaryKind, BoundaryKind]

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=np.float64))
        object.__setattr__(self, "max", np.asarray(self.max, dtype=np.float64))
        if not np.all(self.max > self.min):
            raise ScenarioError(
                f"box max {self.max} must exceed min {self.min} on every axis")

    @property
    def lengths(self) -> np.ndarray:
        return self.max - self.min

    @property
    def periodic_axes(self) -> list[int]:
        return [k for k, b in enumerate(self.boundary)
                if b is BoundaryKind.PERIODIC]


@dataclass(frozen=True)
class LJParams:
    """Lennard-Jones interaction and integration parameters (reduced units)."""

    epsilon: float = 1.0
    sigma: float = 1.0
    cutoff: float = 2.5
    skin: float = 0.5
    mass: float = 1.0
    dt: float = 0.001

    def __post_init__(self):
        for name in ("epsilon", "sigma", "cutoff", "mass", "dt"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"{name} must be strictly positive")
        if self.skin < 0:
            raise ScenarioError("skin must be non-negative")

    @property
    def interaction_length(self) -> float:
        """Cutoff plus skin: the neighbor-structure design length."""
        return self.cutoff + self.skin


def apply_boundaries(buf: ParticleBuffer, box: SimulationBox) -> None:
    """Pull escaped particles back into the box, mutating the buffer.

    Reflective axes mirror the position about the violated face and negate
    the velocity component; periodic axes wrap into ``[min, max)``. A
    particle more than one box length outside aborts the run.
    """
    pos = (buf.pos_x, buf.pos_y, buf.pos_z)
    vel = (buf.vel_x, buf.vel_y, buf.vel_z)
    for axis in range(3):
        x, v = pos[axis], vel[axis]
        lo, hi = box.min[axis], box.max[axis]
        length = hi - lo
        if np.any(x > hi + length) or np.any(x < lo - length):
            raise SimulationDivergedError(
                f"particle more than one box length outside on axis {axis}")
        if box.boundary[axis] is BoundaryKind.PERIODIC:
            np.mod(x - lo, length, out=x)
            x += lo
        else:
            over = x > hi
            x[over] = 2.0 * hi - x[over]
            v[over] = -v[over]
            under = x < lo
            x[under] = 2.0 * lo - x[under]
            v[under] = -v[under]


def build_halo(buf: ParticleBuffer, box: SimulationBox, margin: float) -> ParticleBuffer:
    """Periodic image copies of owned particles within ``margin`` of a face.

    Images are shifted by one box length per periodic axis; edge and corner
    regions produce every non-zero shift combination. Image entries keep the
    owner's id and are marked halo.
    """
    periodic = box.periodic_axes
    if not periodic:
        return ParticleBuffer.empty(0)

    pos = (buf.pos_x, buf.pos_y, buf.pos_z)
    owned = buf.ownership == OWNED
    # Per axis: +L images for particles near the min face, -L near the max face.
    shift_options: list[list[float]] = [[0.0], [0.0], [0.0]]
    near_lo: dict[int, np.ndarray] = {}
    near_hi: dict[int, np.ndarray] = {}
    for axis in periodic:
        lo, hi = box.min[axis], box.max[axis]
        near_lo[axis] = owned & (pos[axis] - lo < margin)
        near_hi[axis] = owned & (hi - pos[axis] < margin)
        shift_options[axis] = [0.0, hi - lo, lo - hi]

    pieces = []
    for shift in itertools.product(*shift_options):
        if shift == (0.0, 0.0, 0.0):
            continue
        mask = owned.copy()
        for axis in range(3):
            if shift[axis] > 0:
                mask &= near_lo[axis]
            elif shift[axis] < 0:
                mask &= near_hi[axis]
        if not np.any(mask):
            continue
        image = buf.take(np.nonzero(mask)[0])
        image.pos_x += shift[0]
        image.pos_y += shift[1]
        image.pos_z += shift[2]
        image.ownership[:] = HALO
        pieces.append(image)

    if not pieces:
        return ParticleBuffer.empty(0)
    out = pieces[0]
    for piece in pieces[1:]:
        out = concat_buffers(out, piece)
    return out
