"""Batched schedule execution for the simulation driver.

Walking tens of thousands of small work units through per-unit Python
calls is interpreter-bound, so the driver packs a schedule once into flat
offset arrays over the container's two backing buffers (owned-side and
halo-side) and sweeps all units in a single compiled call. Semantics are
identical to calling :func:`lanemd.kernels.compute_pair_vectorized` per
unit in schedule order, including the accumulation order of forces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigurationError, ParticleOverlapError
from .kernels import KernelStats, PatternKind
from .particles import ParticleBuffer
from .traversals import Schedule


@dataclass
class PackedSchedule:
    """Flat view of a schedule against its container's backing buffers."""

    i_offset: np.ndarray
    i_length: np.ndarray
    j_offset: np.ndarray
    j_length: np.ndarray
    j_in_halo: np.ndarray
    newton3: np.ndarray
    same_buffer: np.ndarray
    useful_total: int


def pack_schedule(sched: Schedule) -> PackedSchedule:
    """Flatten work units into offset arrays; counts useful lanes once.

    Requires every unit buffer to be a container view (annotated with its
    position inside the owned or halo backing buffer).
    """
    n = len(sched.units)
    i_offset = np.empty(n, dtype=np.int64)
    i_length = np.empty(n, dtype=np.int64)
    j_offset = np.empty(n, dtype=np.int64)
    j_length = np.empty(n, dtype=np.int64)
    j_in_halo = np.empty(n, dtype=np.bool_)
    newton3 = np.empty(n, dtype=np.bool_)
    same = np.empty(n, dtype=np.bool_)
    useful = 0
    for k, unit in enumerate(sched.units):
        i_which, i_off, i_len = unit.i_buffer.backing_slot
        j_which, j_off, j_len = unit.j_buffer.backing_slot
        if i_which != 0:
            raise ConfigurationError("i-buffer must come from the owned backing")
        i_offset[k], i_length[k] = i_off, i_len
        j_offset[k], j_length[k] = j_off, j_len
        j_in_halo[k] = bool(j_which)
        newton3[k] = unit.newton3
        same[k] = unit.same_buffer
        if unit.same_buffer:
            useful += unit.i_buffer.self_pair_slots(unit.newton3)
        else:
            useful += (unit.i_buffer.ownership_counts()[0]
                       * unit.j_buffer.ownership_counts()[1])
    return PackedSchedule(i_offset, i_length, j_offset, j_length,
                          j_in_halo, newton3, same, useful)


@njit(cache=True)
def _sweep_span(xi, yi, zi, owni, fix, fiy, fiz,
                xj, yj, zj, ownj, fjx, fjy, fjz,
                i0, ni, j0, nj, newton3, same_buffer,
                eps24, sigma2, rc2):
    pairs = 0
    for p in range(i0, i0 + ni):
        if owni[p] != 0:
            continue
        px = xi[p]
        py = yi[p]
        pz = zi[p]
        ax = 0.0
        ay = 0.0
        az = 0.0
        start = p + 1 if (same_buffer and newton3) else j0
        for q in range(start, j0 + nj):
            if same_buffer and q == p:
                continue
            if ownj[q] == 2:
                continue
            dx = px - xj[q]
            dy = py - yj[q]
            dz = pz - zj[q]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 >= rc2:
                continue
            if r2 == 0.0:
                return -1
            s2 = sigma2 / r2
            s6 = s2 * s2 * s2
            f = eps24 * (2.0 * s6 * s6 - s6) / r2
            ax += f * dx
            ay += f * dy
            az += f * dz
            if newton3:
                fjx[q] -= f * dx
                fjy[q] -= f * dy
                fjz[q] -= f * dz
            pairs += 1
        fix[p] += ax
        fiy[p] += ay
        fiz[p] += az
    return pairs


@njit(cache=True)
def _batch_sweep(ax_, ay_, az_, aown, afx, afy, afz,
                 bx_, by_, bz_, bown, bfx, bfy, bfz,
                 i_offset, i_length, j_offset, j_length,
                 j_in_halo, newton3, same_buffer,
                 eps24, sigma2, rc2):
    total = 0
    for u in range(i_offset.size):
        if j_in_halo[u]:
            pairs = _sweep_span(ax_, ay_, az_, aown, afx, afy, afz,
                                bx_, by_, bz_, bown, bfx, bfy, bfz,
                                i_offset[u], i_length[u],
                                j_offset[u], j_length[u],
                                newton3[u], same_buffer[u],
                                eps24, sigma2, rc2)
        else:
            pairs = _sweep_span(ax_, ay_, az_, aown, afx, afy, afz,
                                ax_, ay_, az_, aown, afx, afy, afz,
                                i_offset[u], i_length[u],
                                j_offset[u], j_length[u],
                                newton3[u], same_buffer[u],
                                eps24, sigma2, rc2)
        if pairs < 0:
            return -1
        total += pairs
    return total


def execute_packed(packed: PackedSchedule, owned_backing: ParticleBuffer,
                   halo_backing: ParticleBuffer, params,
                   pattern: PatternKind, vector_width: int) -> KernelStats:
    """Run every packed unit; returns the aggregated kernel statistics."""
    a, b = pattern.shape(vector_width)
    pairs = _batch_sweep(
        owned_backing.pos_x, owned_backing.pos_y, owned_backing.pos_z,
        owned_backing.ownership, owned_backing.force_x, owned_backing.force_y,
        owned_backing.force_z,
        halo_backing.pos_x, halo_backing.pos_y, halo_backing.pos_z,
        halo_backing.ownership, halo_backing.force_x, halo_backing.force_y,
        halo_backing.force_z,
        packed.i_offset, packed.i_length, packed.j_offset, packed.j_length,
        packed.j_in_halo, packed.newton3, packed.same_buffer,
        24.0 * params.epsilon, params.sigma * params.sigma,
        params.cutoff * params.cutoff,
    )
    if pairs < 0:
        raise ParticleOverlapError("zero distance between interacting particles")
    invocations = int((-(-packed.i_length // a) * -(-packed.j_length // b)).sum())
    return KernelStats(
        kernel_invocations=invocations,
        lane_slots=invocations * vector_width,
        useful_interactions=packed.useful_total,
        pair_interactions=int(pairs),
    )
