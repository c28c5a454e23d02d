"""Lennard-Jones pair kernels: scalar oracle and lane-patterned paths.

The vectorized kernel processes two particle buffers as a chunked double
loop: ``a`` distinct i-particles and ``b`` distinct j-particles fill one
width-V register per invocation, ``a * b == V``. Four register-fill
patterns are supported, differing in how lanes map to (i, j) pairs and in
how accumulated forces are stored back:

=============  =====  ============================  =========================
pattern        (a,b)  i-side store                  j-side store (third law)
=============  =====  ============================  =========================
one_by_v       (1,V)  reduce-sum to one slot        vector store to V slots
v_by_one       (V,1)  vector store to V slots       reduce-sum to one slot
two_by_half    (2,V/2) per-half reduce to two slots half-accumulate to V/2
half_by_two    (V/2,2) half-accumulate to V/2 slots per-half reduce to two
=============  =====  ============================  =========================

Cutoff, self-pair, dummy, and tail exclusions are folded into one lane mask
multiplied into the force before accumulation. Two implementations share
these semantics: a compiled per-pair sweep used by the simulation driver,
and a lane-level interpreter (``lane_sim=True``) that materializes every
register of every kernel invocation; both report identical statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .domain import LJParams
from .errors import ConfigurationError, ParticleOverlapError
from .lanes import LaneGroup
from .particles import DUMMY, OWNED, ParticleBuffer


class PatternKind(Enum):
    """Register-fill order: how many distinct i- and j-particles per fill."""

    ONE_BY_V = "one_by_v"
    V_BY_ONE = "v_by_one"
    TWO_BY_HALF = "two_by_half"
    HALF_BY_TWO = "half_by_two"

    def shape(self, vector_width: int) -> tuple[int, int]:
        """(a, b) with a * b == vector_width."""
        half = vector_width // 2
        return {
            PatternKind.ONE_BY_V: (1, vector_width),
            PatternKind.V_BY_ONE: (vector_width, 1),
            PatternKind.TWO_BY_HALF: (2, half),
            PatternKind.HALF_BY_TWO: (half, 2),
        }[self]


PATTERN_ORDER = (
    PatternKind.ONE_BY_V,
    PatternKind.V_BY_ONE,
    PatternKind.TWO_BY_HALF,
    PatternKind.HALF_BY_TWO,
)


@dataclass
class KernelStats:
    """Lane-slot accounting across kernel invocations.

    ``blank_lanes`` is derived: slots not holding a real particle pair
    (tail padding, dummies, self-excluded lanes). ``pair_interactions``
    counts pairs whose force was actually accumulated (inside the cutoff).
    """

    kernel_invocations: int = 0
    lane_slots: int = 0
    useful_interactions: int = 0
    pair_interactions: int = 0

    @property
    def blank_lanes(self) -> int:
        return self.lane_slots - self.useful_interactions

    def merge(self, other: "KernelStats") -> None:
        self.kernel_invocations += other.kernel_invocations
        self.lane_slots += other.lane_slots
        self.useful_interactions += other.useful_interactions
        self.pair_interactions += other.pair_interactions


def validate_vector_width(vector_width: int) -> None:
    if vector_width < 4 or (vector_width & (vector_width - 1)) != 0:
        raise ConfigurationError(
            f"vector width must be a power of two >= 4, got {vector_width}")


def blanks_expected(pattern: PatternKind, n_i: int, n_j: int,
                    vector_width: int) -> int:
    """Blank lane count for the chunked double loop over clean buffers.

    Assumes distinct buffers without dummies or self-exclusion; with those
    present the instrumented count is >= this value.
    """
    if n_i < 0 or n_j < 0:
        raise ConfigurationError("buffer sizes must be non-negative")
    validate_vector_width(vector_width)
    a, b = pattern.shape(vector_width)
    return math.ceil(n_i / a) * math.ceil(n_j / b) * a * b - n_i * n_j


def lj_pair_force(displacement, params: LJParams) -> np.ndarray:
    """Force on particle i given ``displacement = r_i - r_j``.

    Standard 12-6 form ``24 eps (2 (sigma/r)^12 - (sigma/r)^6) d / r^2``,
    zero at and beyond the cutoff.
    """
    d = np.asarray(displacement, dtype=np.float64)
    r2 = float(d @ d)
    if r2 == 0.0:
        raise ParticleOverlapError("zero distance between interacting particles")
    if r2 >= params.cutoff * params.cutoff:
        return np.zeros(3)
    s2 = params.sigma * params.sigma / r2
    s6 = s2 * s2 * s2
    return (24.0 * params.epsilon) * (2.0 * s6 * s6 - s6) / r2 * d


def compute_pair_scalar(
    i_buf: ParticleBuffer,
    j_buf: ParticleBuffer,
    params: LJParams,
    newton3: bool,
    same_buffer: bool,
) -> KernelStats:
    """Reference path: plain nested loops, no lane model.

    Accumulates forces into the buffers for every owned i and in-range j,
    skipping dummies and self pairs; with ``same_buffer`` and ``newton3``
    only the strict upper triangle is walked. Reported lane slots equal the
    examined pair slots (a scalar loop has no blank lanes).
    """
    if same_buffer and i_buf is not j_buf:
        raise ConfigurationError("same_buffer requires the identical buffer object")
    rc2 = params.cutoff * params.cutoff
    sigma2 = params.sigma * params.sigma
    eps24 = 24.0 * params.epsilon

    xi = i_buf.pos_x.tolist()
    yi = i_buf.pos_y.tolist()
    zi = i_buf.pos_z.tolist()
    owni = i_buf.ownership.tolist()
    xj = j_buf.pos_x.tolist()
    yj = j_buf.pos_y.tolist()
    zj = j_buf.pos_z.tolist()
    ownj = j_buf.ownership.tolist()

    stats = KernelStats()
    for p in range(len(xi)):
        if owni[p] != OWNED:
            continue
        ax = ay = az = 0.0
        start = p + 1 if (same_buffer and newton3) else 0
        for q in range(start, len(xj)):
            if same_buffer and q == p:
                continue
            if ownj[q] == DUMMY:
                continue
            stats.useful_interactions += 1
            dx = xi[p] - xj[q]
            dy = yi[p] - yj[q]
            dz = zi[p] - zj[q]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 >= rc2:
                continue
            if r2 == 0.0:
                raise ParticleOverlapError(
                    f"particles {p} and {q} at zero distance")
            s2 = sigma2 / r2
            s6 = s2 * s2 * s2
            f = eps24 * (2.0 * s6 * s6 - s6) / r2
            ax += f * dx
            ay += f * dy
            az += f * dz
            if newton3:
                j_buf.force_x[q] -= f * dx
                j_buf.force_y[q] -= f * dy
                j_buf.force_z[q] -= f * dz
            stats.pair_interactions += 1
        i_buf.force_x[p] += ax
        i_buf.force_y[p] += ay
        i_buf.force_z[p] += az
    stats.lane_slots = stats.useful_interactions
    return stats


@njit(cache=True)
def _pair_sweep(xi, yi, zi, owni, xj, yj, zj, ownj,
                fix, fiy, fiz, fjx, fjy, fjz,
                eps24, sigma2, rc2, newton3, same_buffer):
    pairs = 0
    for p in range(xi.shape[0]):
        if owni[p] != 0:
            continue
        px = xi[p]
        py = yi[p]
        pz = zi[p]
        ax = 0.0
        ay = 0.0
        az = 0.0
        start = p + 1 if (same_buffer and newton3) else 0
        for q in range(start, xj.shape[0]):
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


def _useful_lane_count(i_buf: ParticleBuffer, j_buf: ParticleBuffer,
                       newton3: bool, same_buffer: bool) -> int:
    """Lanes carrying a real pair: owned i, non-dummy j, not self-excluded."""
    if same_buffer:
        return i_buf.self_pair_slots(newton3)
    return i_buf.ownership_counts()[0] * j_buf.ownership_counts()[1]


def _lane_templates(pattern: PatternKind, vector_width: int):
    a, b = pattern.shape(vector_width)
    half = vector_width // 2
    if pattern is PatternKind.ONE_BY_V:
        i_off = np.zeros(vector_width, dtype=np.int64)
        j_off = np.arange(vector_width, dtype=np.int64)
    elif pattern is PatternKind.V_BY_ONE:
        i_off = np.arange(vector_width, dtype=np.int64)
        j_off = np.zeros(vector_width, dtype=np.int64)
    elif pattern is PatternKind.TWO_BY_HALF:
        i_off = np.repeat(np.arange(2, dtype=np.int64), half)
        j_off = np.tile(np.arange(half, dtype=np.int64), 2)
    else:
        i_off = np.tile(np.arange(half, dtype=np.int64), 2)
        j_off = np.repeat(np.arange(2, dtype=np.int64), half)
    return a, b, i_off, j_off


def _bucket_by_offset(group: LaneGroup, offsets: np.ndarray, out_width: int) -> np.ndarray:
    """Collapse a register so entry k holds the sum of lanes with offset k.

    Realizes the per-pattern store paths: full reduce-sum (one distinct
    particle), identity vector store (all lanes distinct), half-accumulate
    (halves hold the same particles), and per-half reductions.
    """
    v = group.width
    if out_width == v:
        return group.vals
    if out_width == 1:
        return group.reduce_sum()[..., None]
    if out_width == v // 2 and offsets[0] == offsets[v // 2]:
        return group.accumulate_halves().vals
    # per-half reductions: lower half -> slot 0, upper half -> slot 1
    return np.stack(
        [group.lower_half().reduce_sum(), group.upper_half().reduce_sum()],
        axis=-1,
    )


def _lane_interpreter(
    i_buf: ParticleBuffer,
    j_buf: ParticleBuffer,
    params: LJParams,
    newton3: bool,
    same_buffer: bool,
    pattern: PatternKind,
    vector_width: int,
) -> KernelStats:
    """Walk the chunked double loop materializing every register fill.

    The inner loop over j-chunks is evaluated as a stack of registers (one
    register per invocation); the i-force accumulator is reduced and stored
    per the pattern once the stack is summed, and third-law contributions
    are scattered per invocation through the transposed store path.
    """
    a, b, i_off, j_off = _lane_templates(pattern, vector_width)
    n_i, n_j = len(i_buf), len(j_buf)
    n_ci = -(-n_i // a)
    n_cj = -(-n_j // b)
    stats = KernelStats()
    if n_ci == 0 or n_cj == 0:
        return stats

    rc2 = params.cutoff * params.cutoff
    sigma2 = params.sigma * params.sigma
    eps24 = 24.0 * params.epsilon

    j_idx = np.arange(n_cj, dtype=np.int64)[:, None] * b + j_off[None, :]
    j_in = j_idx < n_j
    j_clip = np.minimum(j_idx, n_j - 1)
    j_real = j_in & (j_buf.ownership[j_clip] != DUMMY)
    jx = LaneGroup.from_array(j_buf.pos_x[j_clip])
    jy = LaneGroup.from_array(j_buf.pos_y[j_clip])
    jz = LaneGroup.from_array(j_buf.pos_z[j_clip])

    for ci in range(n_ci):
        i_idx = ci * a + i_off
        i_in = i_idx < n_i
        i_clip = np.minimum(i_idx, n_i - 1)
        i_active = i_in & (i_buf.ownership[i_clip] == OWNED)
        ix = LaneGroup.from_array(i_buf.pos_x[i_clip][None, :])
        iy = LaneGroup.from_array(i_buf.pos_y[i_clip][None, :])
        iz = LaneGroup.from_array(i_buf.pos_z[i_clip][None, :])

        lane_ok = i_active[None, :] & j_real
        if same_buffer:
            if newton3:
                lane_ok = lane_ok & (j_idx > i_idx[None, :])
            else:
                lane_ok = lane_ok & (j_idx != i_idx[None, :])

        dx = ix - jx
        dy = iy - jy
        dz = iz - jz
        r2 = dx * dx + dy * dy + dz * dz
        if np.any(lane_ok & r2.equals(0.0)):
            raise ParticleOverlapError("zero distance in an unmasked lane")
        in_range = lane_ok & r2.less_than(rc2)
        r2_safe = r2.blend(in_range, 1.0)
        s2 = sigma2 / r2_safe
        s6 = s2 * s2 * s2
        fscale = ((s6 * 2.0 * s6 - s6) * eps24 / r2_safe).masked(in_range)
        fx = dx * fscale
        fy = dy * fscale
        fz = dz * fscale

        stats.kernel_invocations += n_cj
        stats.lane_slots += n_cj * vector_width
        stats.useful_interactions += int(np.count_nonzero(lane_ok))
        stats.pair_interactions += int(np.count_nonzero(in_range))

        if newton3:
            # j-side access mirrors the i-side store of the transposed pattern
            for comp, target in ((fx, j_buf.force_x), (fy, j_buf.force_y),
                                 (fz, j_buf.force_z)):
                chunk = _bucket_by_offset(comp, j_off, b).reshape(-1)
                target[:n_j] -= chunk[:n_j]

        i_stop = min(ci * a + a, n_i)
        for comp, target in ((fx, i_buf.force_x), (fy, i_buf.force_y),
                             (fz, i_buf.force_z)):
            acc = LaneGroup.from_array(comp.vals.sum(axis=0))
            stored = _bucket_by_offset(acc, i_off, a)
            target[ci * a:i_stop] += stored[:i_stop - ci * a]
    return stats


def compute_pair_vectorized(
    i_buf: ParticleBuffer,
    j_buf: ParticleBuffer,
    params: LJParams,
    newton3: bool,
    same_buffer: bool,
    pattern: PatternKind,
    vector_width: int,
    lane_sim: bool = False,
) -> KernelStats:
    """Accumulate pair forces under a register-fill pattern; return stats.

    The default path runs a compiled sweep with identical pair semantics
    and derives the lane accounting from the chunk geometry; with
    ``lane_sim=True`` every register fill, mask, and store is executed
    explicitly. Forces agree with :func:`compute_pair_scalar` to float
    accumulation order.
    """
    validate_vector_width(vector_width)
    if not isinstance(pattern, PatternKind):
        raise ConfigurationError(f"unknown pattern {pattern!r}")
    if same_buffer and i_buf is not j_buf:
        raise ConfigurationError("same_buffer requires the identical buffer object")

    if lane_sim:
        return _lane_interpreter(i_buf, j_buf, params, newton3, same_buffer,
                                 pattern, vector_width)

    a, b = pattern.shape(vector_width)
    pairs = _pair_sweep(
        i_buf.pos_x, i_buf.pos_y, i_buf.pos_z, i_buf.ownership,
        j_buf.pos_x, j_buf.pos_y, j_buf.pos_z, j_buf.ownership,
        i_buf.force_x, i_buf.force_y, i_buf.force_z,
        j_buf.force_x, j_buf.force_y, j_buf.force_z,
        24.0 * params.epsilon, params.sigma * params.sigma,
        params.cutoff * params.cutoff, newton3, same_buffer,
    )
    if pairs < 0:
        raise ParticleOverlapError("zero distance between interacting particles")
    n_ci = -(-len(i_buf) // a)
    n_cj = -(-len(j_buf) // b)
    stats = KernelStats(
        kernel_invocations=n_ci * n_cj,
        lane_slots=n_ci * n_cj * vector_width,
        useful_interactions=_useful_lane_count(i_buf, j_buf, newton3, same_buffer),
        pair_interactions=int(pairs),
    )
    return stats
