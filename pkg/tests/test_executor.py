import numpy as np
import pytest

from lanemd import (BoundaryKind, LinkedCellsContainer, LJParams,
                    ParticleOverlapError, PatternKind, SimulationBox,
                    VerletClusterContainer, build_halo, compute_pair_scalar,
                    compute_pair_vectorized, schedule)
from lanemd.driver import force_phase
from lanemd.executor import execute_packed, pack_schedule
from lanemd.traversals import TraversalKind
from lanemd.tuning import Configuration, ContainerKind

from conftest import brute_forces, forces_close, make_buffer

PARAMS = LJParams(cutoff=2.2, skin=0.4)


def _state(rng, n=90, span=9.0):
    return make_buffer(rng.uniform(0, span, (n, 3)))


def _prepared_container(buf, box, kind, cluster_size=8):
    if kind is ContainerKind.LINKED_CELLS:
        cont = LinkedCellsContainer(box, PARAMS)
    else:
        cont = VerletClusterContainer(box, PARAMS, cluster_size)
    cont.rebuild(buf)
    halo = build_halo(buf, box, PARAMS.interaction_length) \
        if box.periodic_axes else make_buffer(np.zeros((0, 3)))
    cont.refresh(buf, halo)
    return cont


@pytest.mark.parametrize("boundary", [BoundaryKind.REFLECTIVE,
                                      BoundaryKind.PERIODIC])
@pytest.mark.parametrize("kind,traversal", [
    (ContainerKind.LINKED_CELLS, TraversalKind.LC_C08),
    (ContainerKind.LINKED_CELLS, TraversalKind.LC_C18),
    (ContainerKind.VERLET_CLUSTER_LISTS, TraversalKind.VCL),
])
def test_batched_equals_per_unit_exactly(rng, boundary, kind, traversal):
    """The packed sweep must replay per-unit kernel calls bit for bit."""
    box = SimulationBox(np.zeros(3), np.full(3, 9.0), (boundary,) * 3)
    base = _state(rng)
    for newton3 in (False, True):
        cont = _prepared_container(base.copy(), box, kind)
        sched = schedule(cont, traversal, newton3)
        packed = pack_schedule(sched)
        backing, halo_backing = cont.kernel_backings()
        stats_batch = execute_packed(packed, backing, halo_backing, PARAMS,
                                     PatternKind.TWO_BY_HALF, 8)
        batch_forces = np.stack([backing.force_x.copy(),
                                 backing.force_y.copy(),
                                 backing.force_z.copy()])

        backing.force_x[:] = 0.0
        backing.force_y[:] = 0.0
        backing.force_z[:] = 0.0
        halo_backing.force_x[:] = 0.0
        halo_backing.force_y[:] = 0.0
        halo_backing.force_z[:] = 0.0
        from lanemd.kernels import KernelStats
        stats_unit = KernelStats()
        for unit in sched.units:
            stats_unit.merge(compute_pair_vectorized(
                unit.i_buffer, unit.j_buffer, PARAMS, unit.newton3,
                unit.same_buffer, PatternKind.TWO_BY_HALF, 8))
        unit_forces = np.stack([backing.force_x, backing.force_y,
                                backing.force_z])
        assert stats_batch == stats_unit
        assert np.array_equal(batch_forces, unit_forces)


def test_force_phase_matches_oracle_reflective(rng):
    box = SimulationBox(np.zeros(3), np.full(3, 9.0),
                        (BoundaryKind.REFLECTIVE,) * 3)
    base = _state(rng)
    ref = brute_forces(base.positions(), PARAMS)
    for container, traversal in [
        (ContainerKind.LINKED_CELLS, TraversalKind.LC_C01),
        (ContainerKind.LINKED_CELLS, TraversalKind.LC_C08),
        (ContainerKind.VERLET_CLUSTER_LISTS, TraversalKind.VCL),
    ]:
        for newton3 in (False, True):
            if traversal is TraversalKind.LC_C01 and newton3:
                continue
            buf = base.copy()
            config = Configuration(container, traversal, newton3,
                                   PatternKind.V_BY_ONE)
            force_phase(buf, box, PARAMS, config, 8)
            assert forces_close(buf.forces(), ref), (container, traversal,
                                                     newton3)


def test_force_phase_matches_minimum_image_oracle(rng):
    box = SimulationBox(np.zeros(3), np.full(3, 9.0),
                        (BoundaryKind.PERIODIC,) * 3)
    base = _state(rng)
    ref = brute_forces(base.positions(), PARAMS, box_lengths=box.lengths)
    for container, traversal in [
        (ContainerKind.LINKED_CELLS, TraversalKind.LC_C18),
        (ContainerKind.VERLET_CLUSTER_LISTS, TraversalKind.VCL),
    ]:
        for newton3 in (False, True):
            buf = base.copy()
            config = Configuration(container, traversal, newton3,
                                   PatternKind.ONE_BY_V)
            force_phase(buf, box, PARAMS, config, 8)
            assert forces_close(buf.forces(), ref), (container, traversal,
                                                     newton3)


def test_schedule_execution_order_independent(rng):
    """Any color order yields the same forces as the built order."""
    box = SimulationBox(np.zeros(3), np.full(3, 9.0),
                        (BoundaryKind.REFLECTIVE,) * 3)
    base = _state(rng)
    cont = _prepared_container(base.copy(), box, ContainerKind.LINKED_CELLS)
    sched = schedule(cont, TraversalKind.LC_C08, True)
    backing, halo_backing = cont.kernel_backings()

    def run(units):
        backing.force_x[:] = 0.0
        backing.force_y[:] = 0.0
        backing.force_z[:] = 0.0
        for unit in units:
            compute_pair_vectorized(unit.i_buffer, unit.j_buffer, PARAMS,
                                    unit.newton3, unit.same_buffer,
                                    PatternKind.ONE_BY_V, 8)
        return np.stack([backing.force_x.copy(), backing.force_y.copy(),
                         backing.force_z.copy()], axis=1)

    forward = run(sched.units)
    reversed_colors = run(sorted(sched.units, key=lambda u: -u.color))
    assert forces_close(reversed_colors, forward)


def test_scalar_oracle_untouched_by_pipeline(rng):
    """Dual-route check: the oracle is a separate, loop-based code path."""
    base = _state(rng, n=40)
    ref = base.copy()
    compute_pair_scalar(ref, ref, PARAMS, True, True)
    assert forces_close(ref.forces(), brute_forces(base.positions(), PARAMS))


def test_batched_overlap_detection(rng):
    box = SimulationBox(np.zeros(3), np.full(3, 9.0),
                        (BoundaryKind.REFLECTIVE,) * 3)
    pos = rng.uniform(0, 9, (20, 3))
    pos[7] = pos[3]
    buf = make_buffer(pos)
    config = Configuration(ContainerKind.LINKED_CELLS, TraversalKind.LC_C08,
                           True, PatternKind.ONE_BY_V)
    with pytest.raises(ParticleOverlapError):
        force_phase(buf, box, PARAMS, config, 8)
