"""Velocity-Verlet time integration in the kick-drift-kick split."""

from __future__ import annotations

import numpy as np

from .domain import LJParams
from .errors import SimulationDivergedError
from .particles import ParticleBuffer

PRE_FORCE = "pre-force"
POST_FORCE = "post-force"


def _check_finite(buf: ParticleBuffer) -> None:
    for name in ("pos_x", "pos_y", "pos_z", "vel_x", "vel_y", "vel_z"):
        if not np.all(np.isfinite(getattr(buf, name))):
            raise SimulationDivergedError(f"non-finite values in {name}")


def velocity_verlet_step(buf: ParticleBuffer, params: LJParams, phase: str) -> None:
    """Advance one half of a velocity-Verlet step, mutating the buffer.

    The pre-force phase drifts positions using the previous forces and
    stashes them as old forces; the post-force phase completes the velocity
    kick from the average of old and new forces.
    """
    dt = params.dt
    half_over_m = 0.5 / params.mass
    if phase == PRE_FORCE:
        for x, v, f, fo in (
            (buf.pos_x, buf.vel_x, buf.force_x, buf.old_force_x),
            (buf.pos_y, buf.vel_y, buf.force_y, buf.old_force_y),
            (buf.pos_z, buf.vel_z, buf.force_z, buf.old_force_z),
        ):
            x += v * dt + f * (half_over_m * dt * dt)
            fo[:] = f
            f[:] = 0.0
    elif phase == POST_FORCE:
        for v, f, fo in (
            (buf.vel_x, buf.force_x, buf.old_force_x),
            (buf.vel_y, buf.force_y, buf.old_force_y),
            (buf.vel_z, buf.force_z, buf.old_force_z),
        ):
            v += (f + fo) * (half_over_m * dt)
    else:
        raise ValueError(f"unknown integration phase {phase!r}")
    _check_finite(buf)
