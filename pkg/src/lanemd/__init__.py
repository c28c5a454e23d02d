"""Short-range Lennard-Jones MD with lane-patterned kernels and auto-tuning."""

from .containers import (Cluster, LinkedCellsContainer, VerletClusterContainer,
                         build_cluster_neighbor_lists, build_clusters,
                         max_particles_per_cell, needs_rebuild)
from .domain import (BoundaryKind, LJParams, SimulationBox, apply_boundaries,
                     build_halo)
from .driver import (IterationRecord, RunSummary, build_initial_state,
                     emit_csv, emit_summary, read_records_csv,
                     resolve_search_space, run_simulation)
from .errors import (ConfigurationError, DegenerateDomainError, LaneMDError,
                     ParticleOverlapError, ScenarioError,
                     SimulationDivergedError)
from .integrator import POST_FORCE, PRE_FORCE, velocity_verlet_step
from .kernels import (KernelStats, PatternKind, blanks_expected,
                      compute_pair_scalar, compute_pair_vectorized,
                      lj_pair_force)
from .lanes import LaneGroup
from .particles import (Ownership, Particle, ParticleBuffer, concat_buffers,
                        generate_cube_lattice, particles_from_soa,
                        soa_from_particles)
from .scenario import CubeSource, ScenarioSpec, parse_scenario
from .traversals import (Schedule, TraversalKind, WorkUnit, schedule,
                         verify_coloring)
from .tuning import (Configuration, ContainerKind, Evidence, LaneOpsMetric,
                     ReplayMetric, TimeMetric, Tuner, TuningPolicy,
                     compute_speedup, enumerate_search_space,
                     make_metric_provider, reduce_samples, select_optimum)

__version__ = "0.1.0"
