"""Neighbor identification containers: linked cells and cluster lists.

Both containers own a sorted backing copy of the particle state so that
every cell or cluster is a contiguous zero-copy slice. Owned particles are
re-binned only when :func:`needs_rebuild` fires; halo images are re-binned
every iteration because they are regenerated from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import LJParams, SimulationBox
from .errors import ConfigurationError, DegenerateDomainError
from .particles import DUMMY, OWNED, ParticleBuffer

REBUILD_PERIOD_DEFAULT = 20


def needs_rebuild(
    positions: np.ndarray,
    reference_positions: np.ndarray | None,
    skin: float,
    steps_since_rebuild: int,
    period: int = REBUILD_PERIOD_DEFAULT,
) -> bool:
    """True when any particle moved at least skin/2 or the period elapsed."""
    if steps_since_rebuild >= period:
        return True
    if reference_positions is None or reference_positions.shape != positions.shape:
        return True
    disp2 = ((positions - reference_positions) ** 2).sum(axis=1)
    if disp2.size == 0:
        return False
    return bool(disp2.max() >= (0.5 * skin) ** 2)


def max_particles_per_cell(buf: ParticleBuffer, box: SimulationBox,
                           cell_size: float) -> int:
    """Peak owned-particle occupancy on a reference grid of ``cell_size``."""
    dims = np.maximum((box.lengths / cell_size).astype(np.int64), 1)
    owned = buf.ownership == OWNED
    if not np.any(owned):
        return 0
    idx = np.empty((int(np.count_nonzero(owned)), 3), dtype=np.int64)
    for axis, pos in enumerate((buf.pos_x, buf.pos_y, buf.pos_z)):
        scaled = (pos[owned] - box.min[axis]) / (box.lengths[axis] / dims[axis])
        idx[:, axis] = np.clip(scaled.astype(np.int64), 0, dims[axis] - 1)
    lin = idx[:, 0] + dims[0] * (idx[:, 1] + dims[1] * idx[:, 2])
    return int(np.bincount(lin).max())


def _gather(dst: ParticleBuffer, src: ParticleBuffer, perm: np.ndarray) -> None:
    for name in ParticleBuffer._FLOAT_FIELDS + ("id", "ownership"):
        getattr(dst, name)[:len(perm)] = getattr(src, name)[perm]


class LinkedCellsContainer:
    """Uniform cell grid with a one-cell halo ring.

    Owned cells span ``[1, dims]`` per axis in the ring-padded index space;
    ring cells hold halo images only. Cell side length is at least
    cutoff + skin, so one neighbor layer suffices.
    """

    kind = "lc"

    def __init__(self, box: SimulationBox, params: LJParams,
                 rebuild_period: int = REBUILD_PERIOD_DEFAULT):
        self.box = box
        self.params = params
        self.rebuild_period = rebuild_period
        length = params.interaction_length
        dims = np.floor(box.lengths / length).astype(np.int64)
        if np.any(dims < 1):
            raise DegenerateDomainError(
                f"box {box.lengths} smaller than cutoff+skin {length} on some axis")
        self.dims = dims                      # owned cells per axis
        self.cell_length = box.lengths / dims
        self.total_dims = dims + 2            # including the halo ring
        self._n_total = int(np.prod(self.total_dims))

        self._perm: np.ndarray | None = None
        self._owned_backing: ParticleBuffer | None = None
        self._halo_backing: ParticleBuffer = ParticleBuffer.empty(0)
        self._owned_cells: dict[int, ParticleBuffer] = {}
        self._owned_occupied = np.zeros(0, dtype=np.int64)
        self._halo_cells: dict[int, ParticleBuffer] = {}
        self._halo_occupied = np.zeros(0, dtype=np.int64)
        # 0 empty, 1 owned-occupied, 2 halo-occupied
        self.occupancy = np.zeros(self._n_total, dtype=np.uint8)
        self.reference_positions: np.ndarray | None = None
        self.steps_since_rebuild = 0
        # bumped whenever the set of buffers or their slicing changes
        self.structure_version = 0

    def linear_index(self, coords: np.ndarray) -> np.ndarray:
        tx, ty, _ = self.total_dims
        return coords[..., 0] + tx * (coords[..., 1] + ty * coords[..., 2])

    def cell_coords(self, buf: ParticleBuffer, clip_ring: bool) -> np.ndarray:
        """Ring-padded cell coordinates for every entry of the buffer.

        Owned particles clip into the owned region [1, dims]; halo images
        may occupy the ring, [0, dims + 1].
        """
        coords = np.empty((len(buf), 3), dtype=np.int64)
        for axis, pos in enumerate((buf.pos_x, buf.pos_y, buf.pos_z)):
            scaled = np.floor((pos - self.box.min[axis]) / self.cell_length[axis])
            lo, hi = (0, self.dims[axis] + 1) if clip_ring else (1, self.dims[axis])
            coords[:, axis] = np.clip(scaled.astype(np.int64) + 1, lo, hi)
        return coords

    def needs_rebuild(self, owned: ParticleBuffer) -> bool:
        return needs_rebuild(
            owned.positions(), self.reference_positions, self.params.skin,
            self.steps_since_rebuild, self.rebuild_period)

    def rebuild(self, owned: ParticleBuffer) -> None:
        coords = self.cell_coords(owned, clip_ring=False)
        lin = self.linear_index(coords)
        self._perm = np.argsort(lin, kind="stable")
        sorted_lin = lin[self._perm]
        self._owned_backing = owned.take(self._perm)
        self._owned_occupied, starts = np.unique(sorted_lin, return_index=True)
        bounds = np.append(starts, len(sorted_lin))
        self._owned_cells = {}
        for k, cell in enumerate(self._owned_occupied):
            view = self._owned_backing.view(int(bounds[k]), int(bounds[k + 1]))
            view.backing_slot = (0, int(bounds[k]), len(view))
            self._owned_cells[int(cell)] = view
        self.occupancy[:] = 0
        self.occupancy[self._owned_occupied] = 1
        self.reference_positions = owned.positions()
        self.steps_since_rebuild = 0
        self.structure_version += 1

    def refresh(self, owned: ParticleBuffer, halo: ParticleBuffer) -> None:
        """Reload positions and zero forces; re-bin the halo images."""
        backing = self._owned_backing
        _gather(backing, owned, self._perm)
        backing.force_x[:] = 0.0
        backing.force_y[:] = 0.0
        backing.force_z[:] = 0.0

        if len(halo) or len(self._halo_backing):
            self.structure_version += 1
        self.occupancy[self.occupancy == 2] = 0
        self._halo_cells = {}
        self._halo_occupied = np.zeros(0, dtype=np.int64)
        self._halo_backing = ParticleBuffer.empty(0)
        if len(halo):
            coords = self.cell_coords(halo, clip_ring=True)
            lin = self.linear_index(coords)
            order = np.argsort(lin, kind="stable")
            halo_backing = halo.take(order)
            halo_backing.force_x[:] = 0.0
            halo_backing.force_y[:] = 0.0
            halo_backing.force_z[:] = 0.0
            self._halo_backing = halo_backing
            self._halo_occupied, starts = np.unique(lin[order], return_index=True)
            bounds = np.append(starts, len(lin))
            for k, cell in enumerate(self._halo_occupied):
                view = halo_backing.view(int(bounds[k]), int(bounds[k + 1]))
                view.backing_slot = (1, int(bounds[k]), len(view))
                self._halo_cells[int(cell)] = view
            # owned cells shadow halo marks; ring cells never hold owned
            halo_only = self._halo_occupied[self.occupancy[self._halo_occupied] == 0]
            self.occupancy[halo_only] = 2

    def kernel_backings(self) -> tuple[ParticleBuffer, ParticleBuffer]:
        """(owned-side, halo-side) backing buffers for batched execution."""
        return self._owned_backing, self._halo_backing

    def buffer_at(self, linear: int) -> ParticleBuffer:
        buf = self._owned_cells.get(linear)
        if buf is None:
            buf = self._halo_cells.get(linear)
        if buf is None:
            raise KeyError(f"cell {linear} is empty")
        return buf

    def collect_forces(self, owned: ParticleBuffer) -> None:
        backing = self._owned_backing
        owned.force_x[self._perm] = backing.force_x
        owned.force_y[self._perm] = backing.force_y
        owned.force_z[self._perm] = backing.force_z

    @property
    def owned_occupied(self) -> np.ndarray:
        return self._owned_occupied

    @property
    def halo_occupied(self) -> np.ndarray:
        return self._halo_occupied


@dataclass
class Cluster:
    """Fixed-size particle group, dummy-padded to exactly ``size`` entries."""

    cluster_id: int
    buffer: ParticleBuffer
    aabb_min: np.ndarray
    aabb_max: np.ndarray
    n_real: int

    @property
    def size(self) -> int:
        return len(self.buffer)


def build_clusters(buf: ParticleBuffer, size: int,
                   column_length: float | None = None) -> list[Cluster]:
    """Group particles into clusters of exactly ``size`` entries.

    Particles are binned into an x-y column grid, each column sorted by z
    and chunked; the final chunk of a column is padded with dummies placed
    at the cluster's bounding-box corner.
    """
    if size < 2:
        raise ConfigurationError(f"cluster size must be >= 2, got {size}")
    n = len(buf)
    if n == 0:
        return []
    if column_length is None:
        span = max(float(buf.pos_x.max() - buf.pos_x.min()),
                   float(buf.pos_y.max() - buf.pos_y.min()), 1e-12)
        # slight overhang keeps the max-coordinate particle in the last column
        column_length = span * (1.0 + 1e-9) / max(1, int(math.sqrt(n / size)))
    col_x = np.floor((buf.pos_x - buf.pos_x.min()) / column_length).astype(np.int64)
    col_y = np.floor((buf.pos_y - buf.pos_y.min()) / column_length).astype(np.int64)
    col = col_x + col_y * (col_x.max() + 1)
    order = np.lexsort((buf.pos_z, col))
    sorted_col = col[order]

    clusters: list[Cluster] = []
    boundaries = np.nonzero(np.diff(sorted_col))[0] + 1
    column_bounds = np.concatenate([[0], boundaries, [n]])
    cid = 0
    for b in range(len(column_bounds) - 1):
        lo, hi = int(column_bounds[b]), int(column_bounds[b + 1])
        for s in range(lo, hi, size):
            members = order[s:min(s + size, hi)]
            clusters.append(_make_cluster(cid, buf, members, size))
            cid += 1
    return clusters


def _make_cluster(cid: int, src: ParticleBuffer, members: np.ndarray,
                  size: int) -> Cluster:
    n_real = len(members)
    cbuf = ParticleBuffer.empty(size)
    for name in ParticleBuffer._FLOAT_FIELDS + ("id", "ownership"):
        getattr(cbuf, name)[:n_real] = getattr(src, name)[members]
    pos = cbuf.positions()[:n_real]
    aabb_min = pos.min(axis=0)
    aabb_max = pos.max(axis=0)
    if n_real < size:
        cbuf.pos_x[n_real:] = aabb_min[0]
        cbuf.pos_y[n_real:] = aabb_min[1]
        cbuf.pos_z[n_real:] = aabb_min[2]
        cbuf.id[n_real:] = -1
        cbuf.ownership[n_real:] = DUMMY
    return Cluster(cid, cbuf, aabb_min, aabb_max, n_real)


def _box_distance_sq(min_a, max_a, min_b, max_b) -> np.ndarray:
    gap = np.maximum(0.0, np.maximum(min_a - max_b, min_b - max_a))
    return (gap * gap).sum(axis=-1)


def build_cluster_neighbor_lists(
    clusters: list[Cluster], interaction_length: float, newton3: bool,
) -> list[list[int]]:
    """Neighbor cluster ids per cluster, by bounding-box distance.

    With ``newton3`` each unordered pair appears in exactly one list (the
    lower id keeps it); otherwise in both. Self is never listed.
    """
    n = len(clusters)
    if n == 0:
        return []
    mins = np.stack([c.aabb_min for c in clusters])
    maxs = np.stack([c.aabb_max for c in clusters])
    d2 = _box_distance_sq(mins[:, None, :], maxs[:, None, :],
                          mins[None, :, :], maxs[None, :, :])
    limit = interaction_length * interaction_length
    lists: list[list[int]] = []
    for k in range(n):
        close = np.nonzero(d2[k] <= limit)[0]
        if newton3:
            lists.append([int(z) for z in close if z > k])
        else:
            lists.append([int(z) for z in close if z != k])
    return lists


class VerletClusterContainer:
    """Cluster-list container: owned clusters plus per-iteration halo clusters."""

    kind = "vcl"

    def __init__(self, box: SimulationBox, params: LJParams, cluster_size: int,
                 rebuild_period: int = REBUILD_PERIOD_DEFAULT):
        if cluster_size < 2:
            raise ConfigurationError(
                f"cluster size must be >= 2, got {cluster_size}")
        self.box = box
        self.params = params
        self.cluster_size = cluster_size
        self.rebuild_period = rebuild_period
        self.column_length = params.interaction_length

        self.clusters: list[Cluster] = []
        self.halo_clusters: list[Cluster] = []
        self.neighbor_lists: dict[bool, list[list[int]]] = {}
        self.halo_links: list[list[int]] = []
        self._perm: np.ndarray | None = None
        self._slots: np.ndarray | None = None     # padded slot per sorted particle
        self._real_counts: np.ndarray | None = None
        self._halo_backing: ParticleBuffer = ParticleBuffer.empty(0)
        self.reference_positions: np.ndarray | None = None
        self.steps_since_rebuild = 0
        self.structure_version = 0

    def needs_rebuild(self, owned: ParticleBuffer) -> bool:
        return needs_rebuild(
            owned.positions(), self.reference_positions, self.params.skin,
            self.steps_since_rebuild, self.rebuild_period)

    def _column_key(self, buf: ParticleBuffer) -> np.ndarray:
        cx = np.floor((buf.pos_x - self.box.min[0]) / self.column_length)
        cy = np.floor((buf.pos_y - self.box.min[1]) / self.column_length)
        cx = cx.astype(np.int64) + 1
        cy = cy.astype(np.int64) + 1
        width = int(self.box.lengths[0] / self.column_length) + 4
        return cx + width * cy

    def _chunk_columns(self, buf: ParticleBuffer):
        """Sort into z-ordered column chunks of the cluster size.

        Returns (order, padded slot per sorted entry, real count per cluster).
        """
        m = self.cluster_size
        col = self._column_key(buf)
        order = np.lexsort((buf.pos_z, col))
        sorted_col = col[order]
        n = len(buf)
        slots = np.empty(n, dtype=np.int64)
        real_counts: list[int] = []
        pad_base = 0
        lo = 0
        while lo < n:
            hi = lo
            while hi < n and sorted_col[hi] == sorted_col[lo]:
                hi += 1
            for s in range(lo, hi, m):
                chunk = min(s + m, hi) - s
                slots[s:s + chunk] = pad_base + np.arange(chunk)
                real_counts.append(chunk)
                pad_base += m
            lo = hi
        return order, slots, np.array(real_counts, dtype=np.int64)

    def _padded_backing(self, buf: ParticleBuffer, order, slots,
                        real_counts) -> ParticleBuffer:
        backing = ParticleBuffer.empty(len(real_counts) * self.cluster_size)
        backing.id[:] = -1
        backing.ownership[:] = DUMMY
        for name in ParticleBuffer._FLOAT_FIELDS + ("id", "ownership"):
            getattr(backing, name)[slots] = getattr(buf, name)[order]
        return backing

    def _cluster_views(self, backing: ParticleBuffer, real_counts,
                       which_backing: int, id_offset: int,
                       aabb_min: np.ndarray, aabb_max: np.ndarray) -> list[Cluster]:
        m = self.cluster_size
        clusters = []
        for k in range(len(real_counts)):
            view = backing.view(k * m, (k + 1) * m)
            view.backing_slot = (which_backing, k * m, m)
            clusters.append(Cluster(
                cluster_id=id_offset + k, buffer=view,
                aabb_min=aabb_min[k], aabb_max=aabb_max[k],
                n_real=int(real_counts[k]),
            ))
        return clusters

    @staticmethod
    def _compute_aabbs(backing: ParticleBuffer, n_clusters: int, m: int,
                       aabb_min: np.ndarray, aabb_max: np.ndarray) -> None:
        """Update bounding boxes in place and park dummies at the corner."""
        if n_clusters == 0:
            return
        real = (backing.ownership != DUMMY).reshape(n_clusters, m)
        for axis, pos in enumerate((backing.pos_x, backing.pos_y, backing.pos_z)):
            grid = pos.reshape(n_clusters, m)
            lo = np.where(real, grid, np.inf).min(axis=1)
            hi = np.where(real, grid, -np.inf).max(axis=1)
            grid[~real] = np.broadcast_to(lo[:, None], grid.shape)[~real]
            aabb_min[:, axis] = lo
            aabb_max[:, axis] = hi

    def rebuild(self, owned: ParticleBuffer) -> None:
        order, slots, real_counts = self._chunk_columns(owned)
        self._perm = order
        self._slots = slots
        self._real_counts = real_counts
        n_clusters = len(real_counts)
        self._backing = self._padded_backing(owned, order, slots, real_counts)
        self._aabb_min = np.zeros((n_clusters, 3))
        self._aabb_max = np.zeros((n_clusters, 3))
        self.clusters = self._cluster_views(
            self._backing, real_counts, 0, 0, self._aabb_min, self._aabb_max)
        self._compute_aabbs(self._backing, n_clusters, self.cluster_size,
                            self._aabb_min, self._aabb_max)
        self.neighbor_lists = {
            True: build_cluster_neighbor_lists(
                self.clusters, self.params.interaction_length, True),
            False: build_cluster_neighbor_lists(
                self.clusters, self.params.interaction_length, False),
        }
        self.reference_positions = owned.positions()
        self.steps_since_rebuild = 0
        self.structure_version += 1

    def refresh(self, owned: ParticleBuffer, halo: ParticleBuffer) -> None:
        backing = self._backing
        for name in ("pos_x", "pos_y", "pos_z", "vel_x", "vel_y", "vel_z",
                     "old_force_x", "old_force_y", "old_force_z"):
            getattr(backing, name)[self._slots] = getattr(owned, name)[self._perm]
        backing.force_x[:] = 0.0
        backing.force_y[:] = 0.0
        backing.force_z[:] = 0.0
        self._compute_aabbs(backing, len(self.clusters), self.cluster_size,
                            self._aabb_min, self._aabb_max)

        if len(halo) or len(self._halo_backing):
            self.structure_version += 1
        self.halo_clusters = []
        self.halo_links = [[] for _ in self.clusters]
        self._halo_backing = ParticleBuffer.empty(0)
        if len(halo):
            order, slots, real_counts = self._chunk_columns(halo)
            self._halo_backing = self._padded_backing(halo, order, slots,
                                                      real_counts)
            self._halo_backing.force_x[:] = 0.0
            self._halo_backing.force_y[:] = 0.0
            self._halo_backing.force_z[:] = 0.0
            n_halo = len(real_counts)
            halo_min = np.zeros((n_halo, 3))
            halo_max = np.zeros((n_halo, 3))
            self._compute_aabbs(self._halo_backing, n_halo, self.cluster_size,
                                halo_min, halo_max)
            self.halo_clusters = self._cluster_views(
                self._halo_backing, real_counts, 1, len(self.clusters),
                halo_min, halo_max)
            if self.clusters:
                d2 = _box_distance_sq(
                    self._aabb_min[:, None, :], self._aabb_max[:, None, :],
                    halo_min[None, :, :], halo_max[None, :, :])
                limit = self.params.interaction_length ** 2
                for k in range(len(self.clusters)):
                    self.halo_links[k] = [int(h) for h in
                                          np.nonzero(d2[k] <= limit)[0]]

    def kernel_backings(self) -> tuple[ParticleBuffer, ParticleBuffer]:
        """(owned-side, halo-side) backing buffers for batched execution."""
        return self._backing, self._halo_backing

    def collect_forces(self, owned: ParticleBuffer) -> None:
        backing = self._backing
        owned.force_x[self._perm] = backing.force_x[self._slots]
        owned.force_y[self._perm] = backing.force_y[self._slots]
        owned.force_z[self._perm] = backing.force_z[self._slots]
