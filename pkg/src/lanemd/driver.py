"""Simulation driver: wires integration, containers, tuner, and kernels.

Per iteration: pre-force integration, container rebuild when the skin
budget or rebuild period demands it, halo regeneration, tuner decision,
metric-bracketed schedule execution, force collection, post-force
integration, boundary handling, and one telemetry record.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .containers import (LinkedCellsContainer, VerletClusterContainer,
                         max_particles_per_cell)
from .domain import apply_boundaries, build_halo
from .errors import ConfigurationError, ScenarioError, SimulationDivergedError
from .executor import execute_packed, pack_schedule
from .integrator import POST_FORCE, PRE_FORCE, velocity_verlet_step
from .kernels import validate_vector_width
from .particles import ParticleBuffer, generate_cube_lattice, soa_from_particles
from .scenario import ScenarioSpec
from .traversals import schedule
from .tuning import (PRODUCTION, Configuration, ContainerKind, Tuner,
                     TuningPolicy, enumerate_search_space, make_metric_provider)

CSV_COLUMNS = (
    "iteration", "phase", "container", "traversal", "newton3", "pattern",
    "metric_value", "lane_slots", "useful_interactions", "blank_lanes",
    "pair_interactions", "particle_count",
)


@dataclass
class IterationRecord:
    iteration: int
    phase: str
    configuration: Configuration
    metric_value: float
    lane_slots: int
    useful_interactions: int
    blank_lanes: int
    pair_interactions: int
    particle_count: int

    def row(self) -> list[str]:
        c = self.configuration
        return [
            str(self.iteration), self.phase, c.container.value,
            c.traversal.value, "true" if c.newton3 else "false",
            c.pattern.value, repr(self.metric_value), str(self.lane_slots),
            str(self.useful_interactions), str(self.blank_lanes),
            str(self.pair_interactions), str(self.particle_count),
        ]


@dataclass
class RunSummary:
    per_config_metric: dict[str, float]
    phase_selections: list[str]
    failed_configs: list[str]
    wall_time_s: float
    particle_count: int
    initial_max_per_cell: int
    final_max_per_cell: int
    final_max_speed: float

    @property
    def total_metric(self) -> float:
        return sum(self.per_config_metric.values())


def build_initial_state(spec: ScenarioSpec) -> ParticleBuffer:
    """Materialize all particle sources into one owned buffer."""
    rng = np.random.default_rng(spec.seed)
    particles = []
    for src in spec.sources:
        particles.extend(generate_cube_lattice(
            src.origin, src.counts, src.spacing, src.velocity,
            id_start=len(particles)))
    buf = soa_from_particles(particles)
    offset = 0
    for src in spec.sources:
        n = src.counts[0] * src.counts[1] * src.counts[2]
        if src.jitter > 0:
            buf.vel_x[offset:offset + n] += rng.uniform(-src.jitter, src.jitter, n)
            buf.vel_y[offset:offset + n] += rng.uniform(-src.jitter, src.jitter, n)
            buf.vel_z[offset:offset + n] += rng.uniform(-src.jitter, src.jitter, n)
        offset += n
    return buf


def _make_container(kind: ContainerKind, spec: ScenarioSpec):
    if kind is ContainerKind.LINKED_CELLS:
        return LinkedCellsContainer(spec.box, spec.params, spec.rebuild_period)
    return VerletClusterContainer(spec.box, spec.params, spec.cluster_size,
                                  spec.rebuild_period)


def resolve_search_space(spec: ScenarioSpec) -> list[Configuration]:
    return enumerate_search_space(spec.containers, spec.traversals,
                                  spec.newton3_options, spec.patterns)


def force_phase(owned: ParticleBuffer, box, params, config: Configuration,
                vector_width: int, cluster_size: int | None = None):
    """One standalone force computation through the container pipeline.

    Builds the configured container around the owned particles, runs the
    batched schedule, and accumulates forces into the buffer. Returns the
    kernel statistics.
    """
    if config.container is ContainerKind.LINKED_CELLS:
        cont = LinkedCellsContainer(box, params)
    else:
        cont = VerletClusterContainer(box, params,
                                      cluster_size or vector_width)
    cont.rebuild(owned)
    halo = build_halo(owned, box, params.interaction_length) \
        if box.periodic_axes else ParticleBuffer.empty(0)
    cont.refresh(owned, halo)
    packed = pack_schedule(schedule(cont, config.traversal, config.newton3))
    backing, halo_backing = cont.kernel_backings()
    stats = execute_packed(packed, backing, halo_backing, params,
                           config.pattern, vector_width)
    cont.collect_forces(owned)
    return stats


def run_simulation(
    spec: ScenarioSpec,
    fixed_config: Configuration | None = None,
) -> tuple[list[IterationRecord], RunSummary]:
    """Run the scenario; returns per-iteration records and the summary.

    On divergence the partial records and summary are attached to the
    raised :class:`SimulationDivergedError` as ``records`` / ``summary``.
    """
    validate_vector_width(spec.vector_width)
    owned = build_initial_state(spec)
    periodic = bool(spec.box.periodic_axes)
    margin = spec.params.interaction_length

    tuner: Tuner | None = None
    if fixed_config is None:
        configs = resolve_search_space(spec)
        if not configs:
            raise ConfigurationError("search space has no valid configuration")
        interval = spec.tuning_interval
        if interval is None:
            interval = max(1000, spec.samples_per_config * len(configs))
        policy = TuningPolicy(spec.samples_per_config, interval,
                              spec.reduction, spec.metric)
        tuner = Tuner(configs, policy)
    elif not fixed_config.is_valid():
        raise ConfigurationError(f"invalid configuration {fixed_config.label!r}")

    lane_total = [0]
    provider = make_metric_provider(spec.metric, lambda: lane_total[0])

    containers: dict[ContainerKind, object] = {}
    packed_cache: dict = {}
    records: list[IterationRecord] = []
    per_config: dict[str, float] = {}
    start = time.perf_counter()
    initial_max = max_particles_per_cell(owned, spec.box, margin)

    try:
        for it in range(spec.iterations):
            velocity_verlet_step(owned, spec.params, PRE_FORCE)

            if tuner is not None:
                config, phase = tuner.next_configuration(it)
            else:
                config, phase = fixed_config, PRODUCTION

            cont = containers.get(config.container)
            if cont is None:
                cont = _make_container(config.container, spec)
                containers[config.container] = cont
            rebuilt = False
            if cont.reference_positions is None:
                cont.rebuild(owned)
            elif cont.needs_rebuild(owned):
                cont.rebuild(owned)
                rebuilt = True
            halo = build_halo(owned, spec.box, margin) if periodic \
                else ParticleBuffer.empty(0)
            cont.refresh(owned, halo)
            cont.steps_since_rebuild += 1

            # packed schedules stay valid until the buffer layout changes
            key = (config.container, config.traversal, config.newton3)
            packed, version = packed_cache.get(key, (None, -1))
            if version != cont.structure_version:
                packed = pack_schedule(
                    schedule(cont, config.traversal, config.newton3))
                packed_cache[key] = (packed, cont.structure_version)
            backing, halo_backing = cont.kernel_backings()

            provider.begin_region()
            stats = execute_packed(packed, backing, halo_backing, spec.params,
                                   config.pattern, spec.vector_width)
            lane_total[0] += stats.lane_slots
            sample = provider.end_region()
            cont.collect_forces(owned)

            if tuner is not None:
                tuner.record_sample(sample, displaced=rebuilt)

            velocity_verlet_step(owned, spec.params, POST_FORCE)
            apply_boundaries(owned, spec.box)

            records.append(IterationRecord(
                iteration=it, phase=phase, configuration=config,
                metric_value=sample, lane_slots=stats.lane_slots,
                useful_interactions=stats.useful_interactions,
                blank_lanes=stats.blank_lanes,
                pair_interactions=stats.pair_interactions,
                particle_count=len(owned),
            ))
            per_config[config.label] = per_config.get(config.label, 0.0) + sample
    except SimulationDivergedError as exc:
        exc.records = records
        exc.summary = _summarize(spec, owned, records, per_config, tuner,
                                 start, initial_max)
        raise

    summary = _summarize(spec, owned, records, per_config, tuner, start,
                         initial_max)
    return records, summary


def _summarize(spec, owned, records, per_config, tuner, start, initial_max):
    speed = np.sqrt(owned.vel_x ** 2 + owned.vel_y ** 2 + owned.vel_z ** 2)
    failed: list[str] = []
    selections: list[str] = []
    if tuner is not None:
        selections = [c.label for c in tuner.phase_selection]
        seen = set()
        for phase in tuner.phase_evidence:
            for evidence in phase:
                label = evidence.configuration.label
                if np.isinf(evidence.reduced_value) and label not in seen:
                    failed.append(label)
                    seen.add(label)
    return RunSummary(
        per_config_metric=dict(sorted(per_config.items())),
        phase_selections=selections,
        failed_configs=failed,
        wall_time_s=time.perf_counter() - start,
        particle_count=len(owned),
        initial_max_per_cell=initial_max,
        final_max_per_cell=max_particles_per_cell(
            owned, spec.box, spec.params.interaction_length),
        final_max_speed=float(speed.max()) if len(owned) else 0.0,
    )


def emit_csv(records: list[IterationRecord], path) -> None:
    """Write records as CSV with the declared column order."""
    if not records:
        raise ScenarioError("no records to write")
    lines = [",".join(CSV_COLUMNS)]
    for record in records:
        lines.append(",".join(record.row()))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_records_csv(path) -> list[IterationRecord]:
    """Inverse of :func:`emit_csv`."""
    from .kernels import PatternKind
    from .traversals import TraversalKind

    with open(path, encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    header = tuple(lines[0].split(","))
    if header != CSV_COLUMNS:
        raise ScenarioError(f"unexpected CSV header {header}")
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        config = Configuration(
            ContainerKind(parts[2]), TraversalKind(parts[3]),
            parts[4] == "true", PatternKind(parts[5]))
        records.append(IterationRecord(
            iteration=int(parts[0]), phase=parts[1], configuration=config,
            metric_value=float(parts[6]), lane_slots=int(parts[7]),
            useful_interactions=int(parts[8]), blank_lanes=int(parts[9]),
            pair_interactions=int(parts[10]), particle_count=int(parts[11]),
        ))
    return records


def emit_summary(summary: RunSummary, path) -> None:
    lines = [
        f"particle_count: {summary.particle_count}",
        f"wall_time_s: {summary.wall_time_s:.3f}",
        f"total_force_phase_metric: {repr(summary.total_metric)}",
        f"initial_max_per_cell: {summary.initial_max_per_cell}",
        f"final_max_per_cell: {summary.final_max_per_cell}",
        f"final_max_speed: {repr(summary.final_max_speed)}",
        f"phase_selections: {' '.join(summary.phase_selections) or '-'}",
        f"failed_configs: {' '.join(summary.failed_configs) or '-'}",
        "per_config_metric:",
    ]
    for label, total in summary.per_config_metric.items():
        lines.append(f"  {label}: {repr(total)}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
