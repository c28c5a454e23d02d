import dataclasses
import itertools

import numpy as np
import pytest

from lanemd import (BoundaryKind, ConfigurationError, LinkedCellsContainer,
                    LJParams, SimulationBox, TraversalKind,
                    VerletClusterContainer, build_halo, schedule,
                    verify_coloring)

from conftest import make_buffer

PARAMS = LJParams(cutoff=2.0, skin=0.5)  # cell side 2.5


def full_grid_container(n):
    """n x n x n grid with exactly one particle per owned cell."""
    box = SimulationBox(np.zeros(3), np.full(3, 2.5 * n),
                        (BoundaryKind.REFLECTIVE,) * 3)
    cont = LinkedCellsContainer(box, PARAMS)
    centers = (np.stack(np.meshgrid(*[np.arange(n)] * 3, indexing="ij"), -1)
               .reshape(-1, 3) * 2.5 + 1.25)
    buf = make_buffer(centers)
    cont.rebuild(buf)
    cont.refresh(buf, make_buffer(np.zeros((0, 3))))
    return cont


def adjacency(cont):
    """All unordered pairs of adjacent owned cells, via brute force."""
    coords = {}
    for lin in cont.owned_occupied.tolist():
        tx, ty, _ = cont.total_dims
        coords[lin] = (lin % tx, (lin // tx) % ty, lin // (tx * ty))
    pairs = set()
    for a, b in itertools.combinations(coords, 2):
        if all(abs(coords[a][k] - coords[b][k]) <= 1 for k in range(3)):
            pairs.add(frozenset((a, b)))
    return pairs


def test_single_cell_grid_only_self_unit():
    cont = full_grid_container(1)
    sched = schedule(cont, TraversalKind.LC_C01, False)
    assert len(sched.units) == 1
    assert sched.units[0].same_buffer


def test_c01_interior_cell_has_27_ordered_units():
    cont = full_grid_container(3)
    sched = schedule(cont, TraversalKind.LC_C01, False)
    tx, ty, _ = cont.total_dims
    center = 2 + tx * (2 + ty * 2)  # owned coords (2,2,2) of the 3^3 grid
    units = [u for u in sched.units if u.i_index == center]
    assert len(units) == 27
    assert all(not u.newton3 for u in sched.units)
    assert sched.n_colors == 1


def test_c01_rejects_newton3():
    with pytest.raises(ConfigurationError):
        schedule(full_grid_container(2), TraversalKind.LC_C01, True)


def test_c01_ordered_coverage():
    cont = full_grid_container(3)
    sched = schedule(cont, TraversalKind.LC_C01, False)
    got = [(u.i_index, u.j_index) for u in sched.units]
    assert len(got) == len(set(got))
    adj = adjacency(cont)
    want = {(a, b) for pair in adj for a, b in
            itertools.permutations(tuple(pair), 2)}
    want |= {(c, c) for c in cont.owned_occupied.tolist()}
    assert set(got) == want


@pytest.mark.parametrize("kind", [TraversalKind.LC_C08, TraversalKind.LC_C18])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_pair_coverage_newton3(kind, n):
    cont = full_grid_container(n)
    sched = schedule(cont, kind, True)
    pair_units = [u for u in sched.units if not u.same_buffer]
    got = [frozenset((u.i_index, u.j_index)) for u in pair_units]
    assert len(got) == len(set(got)), "a cell pair is scheduled twice"
    assert set(got) == adjacency(cont)
    self_units = [u for u in sched.units if u.same_buffer]
    assert len(self_units) == n ** 3


@pytest.mark.parametrize("kind", [TraversalKind.LC_C08, TraversalKind.LC_C18])
def test_ordered_coverage_without_newton3(kind):
    cont = full_grid_container(3)
    sched = schedule(cont, kind, False)
    got = [(u.i_index, u.j_index) for u in sched.units]
    assert len(got) == len(set(got))
    want = {(a, b) for pair in adjacency(cont) for a, b in
            itertools.permutations(tuple(pair), 2)}
    want |= {(c, c) for c in cont.owned_occupied.tolist()}
    assert set(got) == want
    assert all(not u.newton3 for u in sched.units)


def test_c08_and_c18_choose_different_i_sides():
    cont = full_grid_container(4)
    c08 = {frozenset((u.i_index, u.j_index)): u.i_index
           for u in schedule(cont, TraversalKind.LC_C08, True).units
           if not u.same_buffer}
    c18 = {frozenset((u.i_index, u.j_index)): u.i_index
           for u in schedule(cont, TraversalKind.LC_C18, True).units
           if not u.same_buffer}
    assert set(c08) == set(c18)
    assert any(c08[pair] != c18[pair] for pair in c08), \
        "traversals should swap i/j assignment for some pairs"
    # c18 takes the lower linearized index as the i-side
    assert all(c18[pair] == min(pair) for pair in c18)


@pytest.mark.parametrize("kind,colors", [(TraversalKind.LC_C08, 8),
                                         (TraversalKind.LC_C18, 18)])
def test_coloring_counts_and_validity(kind, colors):
    cont = full_grid_container(5)
    for newton3 in (False, True):
        sched = schedule(cont, kind, newton3)
        assert sched.n_colors == colors
        assert verify_coloring(sched)


def test_merged_colors_fail_verification():
    cont = full_grid_container(3)
    sched = schedule(cont, TraversalKind.LC_C08, True)
    merged = dataclasses.replace(sched, units=tuple(
        dataclasses.replace(u, color=0) for u in sched.units))
    assert not verify_coloring(merged)


def test_wrong_container_for_kind(rng):
    cont = full_grid_container(2)
    with pytest.raises(ConfigurationError):
        schedule(cont, TraversalKind.VCL, True)
    box = SimulationBox(np.zeros(3), np.full(3, 10.0),
                        (BoundaryKind.REFLECTIVE,) * 3)
    vcl = VerletClusterContainer(box, PARAMS, 4)
    vcl.rebuild(make_buffer(rng.uniform(0, 10, (20, 3))))
    vcl.refresh(make_buffer(rng.uniform(0, 10, (20, 3))),
                make_buffer(np.zeros((0, 3))))
    with pytest.raises(ConfigurationError):
        schedule(vcl, TraversalKind.LC_C08, True)


def test_vcl_schedule_structure(rng):
    box = SimulationBox(np.zeros(3), np.full(3, 8.0),
                        (BoundaryKind.REFLECTIVE,) * 3)
    cont = VerletClusterContainer(box, PARAMS, 4)
    buf = make_buffer(rng.uniform(0, 8, (60, 3)))
    cont.rebuild(buf)
    cont.refresh(buf, make_buffer(np.zeros((0, 3))))
    for newton3 in (False, True):
        sched = schedule(cont, TraversalKind.VCL, newton3)
        assert verify_coloring(sched)
        self_units = [u for u in sched.units if u.same_buffer]
        assert len(self_units) == len(cont.clusters)
        pair_units = [(u.i_index, u.j_index) for u in sched.units
                      if not u.same_buffer]
        assert len(pair_units) == len(set(pair_units))
        if newton3:
            unordered = [frozenset(p) for p in pair_units]
            assert len(unordered) == len(set(unordered))
        else:
            assert sched.n_colors == 1
            for a, b in pair_units:
                assert (b, a) in pair_units


def test_vcl_halo_units_write_owned_only(rng):
    box = SimulationBox(np.zeros(3), np.full(3, 8.0),
                        (BoundaryKind.PERIODIC,) * 3)
    cont = VerletClusterContainer(box, PARAMS, 4)
    buf = make_buffer(rng.uniform(0, 8, (60, 3)))
    cont.rebuild(buf)
    halo = build_halo(buf, box, PARAMS.interaction_length)
    cont.refresh(buf, halo)
    assert cont.halo_clusters
    sched = schedule(cont, TraversalKind.VCL, True)
    owned_count = len(cont.clusters)
    halo_units = [u for u in sched.units if u.j_index >= owned_count]
    assert halo_units
    assert all(not u.newton3 for u in halo_units)
    assert all(u.i_index < owned_count for u in halo_units)
    assert verify_coloring(sched)


def test_lc_halo_pairs_put_owned_on_i_side(rng):
    box = SimulationBox(np.zeros(3), np.full(3, 10.0),
                        (BoundaryKind.PERIODIC,) * 3)
    cont = LinkedCellsContainer(box, PARAMS)
    buf = make_buffer(rng.uniform(0, 10, (80, 3)))
    cont.rebuild(buf)
    halo = build_halo(buf, box, PARAMS.interaction_length)
    cont.refresh(buf, halo)
    assert len(cont.halo_occupied)
    for kind in (TraversalKind.LC_C08, TraversalKind.LC_C18):
        sched = schedule(cont, kind, True)
        mixed = [u for u in sched.units
                 if cont.occupancy[u.j_index] == 2]
        assert mixed, "periodic state should produce owned-halo units"
        for u in mixed:
            assert cont.occupancy[u.i_index] == 1
            assert not u.newton3
        # no halo-halo pairs ever
        for u in sched.units:
            assert cont.occupancy[u.i_index] == 1
        assert verify_coloring(sched)
