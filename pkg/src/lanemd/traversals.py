"""Work schedules: which buffer pairs interact, in which color class.

A schedule is an ordered list of work units. Units sharing a color may run
concurrently provided they belong to different base steps; units of one
base step run sequentially on one worker. Colors execute in sequence. The
sequential driver simply walks the list in order.

Cell-pair conventions:

* ``lc_c01`` anchors every owned cell against its full 27-neighborhood and
  writes only the anchor side, so one color suffices (Newton3 must be off).
* ``lc_c18`` pairs each cell with its 13 forward neighbors (strictly
  greater linearized index); the lower-index cell is the i-buffer.
  3 x 3 x 2 = 18 colors.
* ``lc_c08`` assigns each neighbor pair to the 2x2x2 block that contains
  both cells; the pair member with the smaller in-block offset is the
  i-buffer. 8 colors.
* ``vcl`` emits one unit per neighbor-list entry plus an intra-cluster
  unit; bases are colored greedily so equal-color write sets stay disjoint.

Pairs between an owned and a halo buffer always put the owned side on the
i-buffer and never write the j side: the mirrored interaction is covered by
the cell pair on the opposite boundary, which keeps periodic forces exact
without folding halo forces back.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .containers import LinkedCellsContainer, VerletClusterContainer
from .errors import ConfigurationError
from .particles import ParticleBuffer


class TraversalKind(Enum):
    LC_C01 = "lc_c01"
    LC_C08 = "lc_c08"
    LC_C18 = "lc_c18"
    VCL = "vcl"


TRAVERSAL_ORDER = (TraversalKind.LC_C01, TraversalKind.LC_C08,
                   TraversalKind.LC_C18, TraversalKind.VCL)


@dataclass(slots=True)
class WorkUnit:
    """One kernel task: i-buffer against j-buffer. Treat as immutable.

    ``newton3`` is the effective dual-write flag for this unit; schedules
    clear it on owned-halo pairs even when the configuration enables the
    optimization. ``base_index`` groups units of one base step; the
    concurrency contract applies across bases, not within one.
    """

    i_buffer: ParticleBuffer
    j_buffer: ParticleBuffer
    same_buffer: bool
    color: int
    base_index: int
    newton3: bool
    i_index: int
    j_index: int


@dataclass(frozen=True)
class Schedule:
    kind: TraversalKind
    newton3: bool
    units: tuple[WorkUnit, ...]
    n_colors: int


# 13 directions with strictly positive x-fastest linearized offset
_FORWARD_DIRS = tuple(
    d for d in itertools.product((-1, 0, 1), repeat=3)
    if (d[2], d[1], d[0]) > (0, 0, 0)
)
_ALL_DIRS = tuple(itertools.product((-1, 0, 1), repeat=3))


def _coords_of(lin: np.ndarray, total_dims: np.ndarray):
    tx, ty, _ = total_dims
    x = lin % tx
    rest = lin // tx
    return x, rest % ty, rest // ty


def _block_offset_rank(d: tuple[int, int, int]) -> tuple[int, int]:
    """In-block ranks of the two members of a pair along ``d``.

    Ranked x-major so the i-side choice observably differs from lc_c18's
    lower-linearized-index rule on mixed-sign directions; the anchor cell
    (rank 0) stays the i-side for pure-forward pairs.
    """
    o1 = tuple(max(-c, 0) for c in d)
    o2 = tuple(max(c, 0) for c in d)
    rank1 = 4 * o1[0] + 2 * o1[1] + o1[2]
    rank2 = 4 * o2[0] + 2 * o2[1] + o2[2]
    return rank1, rank2


def schedule(container, kind: TraversalKind, newton3: bool) -> Schedule:
    """Build the ordered, colored work-unit list for one force phase."""
    if kind is TraversalKind.VCL:
        if not isinstance(container, VerletClusterContainer):
            raise ConfigurationError("vcl traversal requires the cluster container")
        return _schedule_vcl(container, newton3)
    if not isinstance(container, LinkedCellsContainer):
        raise ConfigurationError(f"{kind.value} traversal requires linked cells")
    if kind is TraversalKind.LC_C01:
        if newton3:
            raise ConfigurationError("lc_c01 cannot exploit Newton's third law")
        return _schedule_c01(container)
    if kind is TraversalKind.LC_C18:
        return _schedule_c18(container, newton3)
    return _schedule_c08(container, newton3)


def _occupied_pairs(cont: LinkedCellsContainer):
    """Yield per-direction arrays describing occupied adjacent cell pairs.

    Covers each unordered pair of occupied, adjacent cells exactly once
    (anchored at the lower linearized cell), skipping halo-halo pairs:
    those interactions are already represented by an owned-halo pair on
    the opposite boundary.
    """
    occ = np.concatenate([cont.owned_occupied, cont.halo_occupied])
    if occ.size == 0:
        return
    total = cont.total_dims
    x, y, z = _coords_of(occ, total)
    anchor_halo = cont.occupancy[occ] == 2
    for d in _FORWARD_DIRS:
        nx, ny, nz = x + d[0], y + d[1], z + d[2]
        valid = ((nx >= 0) & (nx < total[0]) & (ny >= 0) & (ny < total[1])
                 & (nz >= 0) & (nz < total[2]))
        nlin = nx + total[0] * (ny + total[1] * nz)
        nlin = np.where(valid, nlin, 0)
        state = cont.occupancy[nlin]
        mask = valid & (state != 0) & ~(anchor_halo & (state == 2))
        if np.any(mask):
            yield (occ[mask], nlin[mask], anchor_halo[mask],
                   state[mask] == 2, d)


def _emit_pair(units, cont, a: int, b: int, a_halo: bool, b_halo: bool,
               newton3: bool, color: int, base: int) -> None:
    """Emit unit(s) for the unordered occupied pair (a, b)."""
    buf_a = cont.buffer_at(a)
    buf_b = cont.buffer_at(b)
    if a_halo or b_halo:
        if a_halo:
            a, b, buf_a, buf_b = b, a, buf_b, buf_a
        units.append(WorkUnit(buf_a, buf_b, False, color, base, False, a, b))
    elif newton3:
        units.append(WorkUnit(buf_a, buf_b, False, color, base, True, a, b))
    else:
        units.append(WorkUnit(buf_a, buf_b, False, color, base, False, a, b))
        units.append(WorkUnit(buf_b, buf_a, False, color, base, False, b, a))


def _finish(kind, newton3, units, n_colors) -> Schedule:
    units.sort(key=lambda u: u.color)
    return Schedule(kind, newton3, tuple(units), n_colors)


def _schedule_c01(cont: LinkedCellsContainer) -> Schedule:
    units: list[WorkUnit] = []
    total = cont.total_dims
    occ = cont.owned_occupied
    if occ.size:
        x, y, z = _coords_of(occ, total)
        for d in _ALL_DIRS:
            nx, ny, nz = x + d[0], y + d[1], z + d[2]
            nlin = nx + total[0] * (ny + total[1] * nz)
            mask = cont.occupancy[nlin] != 0
            for a, b in zip(occ[mask].tolist(), nlin[mask].tolist()):
                buf_a = cont.buffer_at(a)
                buf_b = cont.buffer_at(b)
                units.append(WorkUnit(buf_a, buf_b, a == b, 0, a, False, a, b))
    return _finish(TraversalKind.LC_C01, False, units, 1)


def _schedule_c18(cont: LinkedCellsContainer, newton3: bool) -> Schedule:
    units: list[WorkUnit] = []
    total = cont.total_dims

    def color_of(x, y, z):
        return (x % 3) + 3 * (y % 3) + 9 * (z % 2)

    occ = cont.owned_occupied
    if occ.size:
        x, y, z = _coords_of(occ, total)
        colors = color_of(x, y, z)
        for c, col in zip(occ.tolist(), colors.tolist()):
            buf = cont.buffer_at(c)
            units.append(WorkUnit(buf, buf, True, col, c, newton3, c, c))
    for anchors, neighbors, a_halo, b_halo, _d in _occupied_pairs(cont):
        ax, ay, az = _coords_of(anchors, total)
        colors = color_of(ax, ay, az)
        for a, b, ah, bh, col in zip(anchors.tolist(), neighbors.tolist(),
                                     a_halo.tolist(), b_halo.tolist(),
                                     colors.tolist()):
            _emit_pair(units, cont, a, b, ah, bh, newton3, col, a)
    return _finish(TraversalKind.LC_C18, newton3, units, 18)


def _schedule_c08(cont: LinkedCellsContainer, newton3: bool) -> Schedule:
    units: list[WorkUnit] = []
    total = cont.total_dims

    occ = cont.owned_occupied
    if occ.size:
        x, y, z = _coords_of(occ, total)
        colors = (x % 2) + 2 * (y % 2) + 4 * (z % 2)
        for c, col in zip(occ.tolist(), colors.tolist()):
            buf = cont.buffer_at(c)
            units.append(WorkUnit(buf, buf, True, col, c, newton3, c, c))
    for anchors, neighbors, a_halo, b_halo, d in _occupied_pairs(cont):
        ax, ay, az = _coords_of(anchors, total)
        # block anchor sits at the componentwise minimum of the pair
        bx = ax + min(d[0], 0)
        by = ay + min(d[1], 0)
        bz = az + min(d[2], 0)
        base = bx + total[0] * (by + total[1] * bz)
        colors = (bx % 2) + 2 * (by % 2) + 4 * (bz % 2)
        rank_a, rank_b = _block_offset_rank(d)
        swap = rank_b < rank_a
        for a, b, ah, bh, col, anchor in zip(anchors.tolist(), neighbors.tolist(),
                                             a_halo.tolist(), b_halo.tolist(),
                                             colors.tolist(), base.tolist()):
            if swap:
                a, b, ah, bh = b, a, bh, ah
            _emit_pair(units, cont, a, b, ah, bh, newton3, col, anchor)
    return _finish(TraversalKind.LC_C08, newton3, units, 8)


def _schedule_vcl(cont: VerletClusterContainer, newton3: bool) -> Schedule:
    lists = cont.neighbor_lists.get(newton3)
    if lists is None:
        raise ConfigurationError("cluster container has not been rebuilt")
    n_owned = len(cont.clusters)
    if newton3:
        colors, n_colors = _greedy_base_colors(n_owned, lists)
    else:
        colors, n_colors = [0] * n_owned, 1

    units: list[WorkUnit] = []
    for k, cluster in enumerate(cont.clusters):
        buf = cluster.buffer
        col = colors[k]
        units.append(WorkUnit(buf, buf, True, col, k, newton3, k, k))
        for z in lists[k]:
            other = cont.clusters[z].buffer
            units.append(WorkUnit(buf, other, False, col, k, newton3, k, z))
        for h in cont.halo_links[k] if cont.halo_links else []:
            halo = cont.halo_clusters[h]
            units.append(WorkUnit(buf, halo.buffer, False, col, k, False,
                                  k, halo.cluster_id))
    return _finish(TraversalKind.VCL, newton3, units, n_colors)


def _greedy_base_colors(n: int, lists: list[list[int]]) -> tuple[list[int], int]:
    """Color base clusters so equal-color write sets are disjoint."""
    writes = [set([k] + lists[k]) for k in range(n)]
    writers: dict[int, list[int]] = {}
    for k, ws in enumerate(writes):
        for z in ws:
            writers.setdefault(z, []).append(k)
    colors = [-1] * n
    for k in range(n):
        used = set()
        for z in writes[k]:
            for other in writers[z]:
                if other != k and colors[other] >= 0:
                    used.add(colors[other])
        color = 0
        while color in used:
            color += 1
        colors[k] = color
    return colors, (max(colors) + 1 if colors else 1)


def verify_coloring(sched: Schedule) -> bool:
    """Check the write-disjointness contract of a schedule.

    Within one color, buffers written by different base steps must not
    overlap; a unit writes its i-buffer, and its j-buffer too when its
    effective newton3 flag is set.
    """
    claims: dict[tuple[int, int], int] = {}
    for unit in sched.units:
        written = (unit.i_buffer, unit.j_buffer) if unit.newton3 else (unit.i_buffer,)
        for buf in written:
            key = (unit.color, id(buf))
            owner = claims.setdefault(key, unit.base_index)
            if owner != unit.base_index:
                return False
    return True
