"""Shared fixtures and independent reference implementations."""

from __future__ import annotations

import numpy as np
import pytest

from lanemd import LJParams, ParticleBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_buffer(positions, ids=None, ownership=None) -> ParticleBuffer:
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    buf = ParticleBuffer.empty(n)
    if n:
        buf.pos_x[:], buf.pos_y[:], buf.pos_z[:] = positions.T
    buf.id[:] = np.arange(n) if ids is None else ids
    if ownership is not None:
        buf.ownership[:] = ownership
    return buf


def jittered_lattice(rng, counts, spacing, jitter, origin=(0.0, 0.0, 0.0)):
    """Lattice positions with bounded jitter: no near-overlaps by design."""
    grid = np.mgrid[0:counts[0], 0:counts[1], 0:counts[2]]
    pos = grid.reshape(3, -1).T * spacing + np.asarray(origin) + spacing / 2
    return pos + rng.uniform(-jitter, jitter, pos.shape)


def brute_forces(positions, params: LJParams, box_lengths=None) -> np.ndarray:
    """Independent all-pairs force sum via numpy broadcasting.

    Applies the minimum-image convention when box lengths are given.
    Deliberately a different code path from any kernel in the package.
    """
    pos = np.asarray(positions, dtype=np.float64)
    n = len(pos)
    d = pos[:, None, :] - pos[None, :, :]
    if box_lengths is not None:
        lengths = np.asarray(box_lengths, dtype=np.float64)
        d -= lengths * np.round(d / lengths)
    r2 = (d ** 2).sum(axis=2)
    np.fill_diagonal(r2, np.inf)
    in_range = r2 < params.cutoff ** 2
    r2_safe = np.where(in_range, r2, 1.0)
    s6 = (params.sigma ** 2 / r2_safe) ** 3
    scale = np.where(in_range,
                     24.0 * params.epsilon * (2.0 * s6 * s6 - s6) / r2_safe, 0.0)
    return (scale[:, :, None] * d).sum(axis=1)


def lj_energy(positions, params: LJParams, box_lengths=None) -> float:
    """Truncated LJ potential energy, all pairs (minimum image optional)."""
    pos = np.asarray(positions, dtype=np.float64)
    d = pos[:, None, :] - pos[None, :, :]
    if box_lengths is not None:
        lengths = np.asarray(box_lengths, dtype=np.float64)
        d -= lengths * np.round(d / lengths)
    r2 = (d ** 2).sum(axis=2)
    np.fill_diagonal(r2, np.inf)
    in_range = r2 < params.cutoff ** 2
    r2_safe = np.where(in_range, r2, 1.0)
    s6 = (params.sigma ** 2 / r2_safe) ** 3
    u = np.where(in_range, 4.0 * params.epsilon * (s6 * s6 - s6), 0.0)
    return float(u.sum() / 2.0)


def forces_close(got, ref, rtol=1e-12) -> bool:
    """Per-particle comparison, relative to each particle's own force scale."""
    got = np.asarray(got)
    ref = np.asarray(ref)
    err = np.abs(got - ref).max(axis=-1)
    tol = rtol * np.maximum(np.abs(ref).max(axis=-1), 1.0)
    return bool((err <= tol).all())
