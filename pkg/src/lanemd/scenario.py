"""Scenario files: flat ``key: value`` text with repeated ``object:`` blocks.

Example::

    box: 200 200 200
    boundary: reflective reflective reflective
    cutoff: 5
    iterations: 1000

    object:
      origin: 92 92 95
      counts: 37 16 10
      spacing: 1.0
      velocity: 0 0 0

Unknown keys are rejected. Defaults: skin = 0.2 * cutoff, cluster size =
vector width, 3 tuning samples, mean reduction, laneops metric, reflective
boundaries, epsilon = sigma = mass = 1, dt = 0.001.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import BoundaryKind, LJParams, SimulationBox
from .errors import ScenarioError
from .kernels import PATTERN_ORDER, PatternKind
from .traversals import TRAVERSAL_ORDER, TraversalKind
from .tuning import CONTAINER_ORDER, REDUCTIONS, ContainerKind


@dataclass
class CubeSource:
    """One lattice block of particles."""

    origin: np.ndarray
    counts: tuple[int, int, int]
    spacing: float = 1.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    jitter: float = 0.0


@dataclass
class ScenarioSpec:
    box: SimulationBox
    params: LJParams
    sources: list[CubeSource]
    iterations: int
    seed: int = 0
    vector_width: int = 8
    cluster_size: int = 8
    rebuild_period: int = 20
    samples_per_config: int = 3
    tuning_interval: int | None = None
    reduction: str = "mean"
    metric: str = "laneops"
    containers: list[ContainerKind] = field(default_factory=lambda: list(CONTAINER_ORDER))
    traversals: list[TraversalKind] = field(default_factory=lambda: list(TRAVERSAL_ORDER))
    newton3_options: list[bool] = field(default_factory=lambda: [False, True])
    patterns: list[PatternKind] = field(default_factory=lambda: list(PATTERN_ORDER))
    csv_path: str | None = None
    summary_path: str | None = None


_TOP_KEYS = {
    "box", "box_min", "boundary", "cutoff", "skin", "epsilon", "sigma",
    "mass", "dt", "iterations", "seed", "vector_width", "cluster_size",
    "rebuild_period", "containers", "traversals", "newton3", "patterns",
    "samples", "tuning_interval", "reduction", "metric", "csv", "summary",
}
_OBJECT_KEYS = {"origin", "counts", "spacing", "velocity", "jitter"}


def _floats(value: str, key: str, n: int) -> list[float]:
    parts = value.split()
    if len(parts) != n:
        raise ScenarioError(f"{key}: expected {n} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ScenarioError(f"{key}: {exc}") from exc


def _float(value: str, key: str) -> float:
    return _floats(value, key, 1)[0]


def _int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ScenarioError(f"{key}: {exc}") from exc


def _parse_lines(path: Path):
    """Split the file into a top-level mapping and raw object blocks."""
    top: dict[str, str] = {}
    objects: list[dict[str, str]] = []
    current: dict[str, str] | None = None
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indented = line[0] in " \t"
        key, sep, value = line.strip().partition(":")
        if not sep:
            raise ScenarioError(f"{path}:{line_no}: expected 'key: value'")
        key = key.strip()
        value = value.strip()
        if not indented:
            if key == "object":
                current = {}
                objects.append(current)
                continue
            current = None
            if key not in _TOP_KEYS:
                raise ScenarioError(f"{path}:{line_no}: unknown key {key!r}")
            if key in top:
                raise ScenarioError(f"{path}:{line_no}: duplicate key {key!r}")
            top[key] = value
        else:
            if current is None:
                raise ScenarioError(
                    f"{path}:{line_no}: indented line outside an object block")
            if key not in _OBJECT_KEYS:
                raise ScenarioError(
                    f"{path}:{line_no}: unknown object key {key!r}")
            if key in current:
                raise ScenarioError(f"{path}:{line_no}: duplicate key {key!r}")
            current[key] = value
    return top, objects


def _parse_source(raw: dict[str, str], index: int) -> CubeSource:
    if "origin" not in raw:
        raise ScenarioError(f"object {index}: origin required")
    if "counts" not in raw:
        raise ScenarioError(f"object {index}: counts required")
    origin = np.array(_floats(raw["origin"], "origin", 3))
    counts = tuple(int(c) for c in _floats(raw["counts"], "counts", 3))
    if any(c < 1 for c in counts):
        raise ScenarioError(f"object {index}: counts must all be >= 1")
    spacing = _float(raw.get("spacing", "1.0"), "spacing")
    if spacing <= 0:
        raise ScenarioError(f"object {index}: spacing must be positive")
    velocity = np.array(_floats(raw.get("velocity", "0 0 0"), "velocity", 3))
    jitter = _float(raw.get("jitter", "0"), "jitter")
    if jitter < 0:
        raise ScenarioError(f"object {index}: jitter must be non-negative")
    return CubeSource(origin, counts, spacing, velocity, jitter)


def parse_scenario(path: str | Path) -> ScenarioSpec:
    """Parse and validate a scenario file."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    top, raw_objects = _parse_lines(path)

    for key in ("box", "cutoff", "iterations"):
        if key not in top:
            raise ScenarioError(f"{key} required")
    if not raw_objects:
        raise ScenarioError("at least one object block required")

    box_lengths = np.array(_floats(top["box"], "box", 3))
    box_min = np.array(_floats(top.get("box_min", "0 0 0"), "box_min", 3))
    boundary_tokens = top.get("boundary", "reflective reflective reflective").split()
    if len(boundary_tokens) != 3:
        raise ScenarioError("boundary: expected three per-axis values")
    try:
        boundary = tuple(BoundaryKind(t) for t in boundary_tokens)
    except ValueError as exc:
        raise ScenarioError(f"boundary: {exc}") from exc
    box = SimulationBox(box_min, box_min + box_lengths, boundary)

    cutoff = _float(top["cutoff"], "cutoff")
    skin = _float(top["skin"], "skin") if "skin" in top else 0.2 * cutoff
    params = LJParams(
        epsilon=_float(top.get("epsilon", "1"), "epsilon"),
        sigma=_float(top.get("sigma", "1"), "sigma"),
        cutoff=cutoff,
        skin=skin,
        mass=_float(top.get("mass", "1"), "mass"),
        dt=_float(top.get("dt", "0.001"), "dt"),
    )
    if np.any(box.lengths < params.interaction_length):
        raise ScenarioError(
            f"box {box.lengths} smaller than cutoff+skin {params.interaction_length}")

    iterations = _int(top["iterations"], "iterations")
    if iterations < 1:
        raise ScenarioError("iterations must be >= 1")

    vector_width = _int(top.get("vector_width", "8"), "vector_width")
    spec = ScenarioSpec(
        box=box,
        params=params,
        sources=[_parse_source(raw, k) for k, raw in enumerate(raw_objects)],
        iterations=iterations,
        seed=_int(top.get("seed", "0"), "seed"),
        vector_width=vector_width,
        cluster_size=_int(top["cluster_size"], "cluster_size")
        if "cluster_size" in top else vector_width,
        rebuild_period=_int(top.get("rebuild_period", "20"), "rebuild_period"),
        samples_per_config=_int(top.get("samples", "3"), "samples"),
        tuning_interval=_int(top["tuning_interval"], "tuning_interval")
        if "tuning_interval" in top else None,
        reduction=top.get("reduction", "mean"),
        metric=top.get("metric", "laneops"),
        csv_path=top.get("csv"),
        summary_path=top.get("summary"),
    )
    if spec.reduction not in REDUCTIONS:
        raise ScenarioError(f"unknown reduction {spec.reduction!r}")

    if "containers" in top:
        spec.containers = _parse_options(top["containers"], ContainerKind, "containers")
    if "traversals" in top:
        spec.traversals = _parse_options(top["traversals"], TraversalKind, "traversals")
    if "patterns" in top:
        spec.patterns = _parse_options(top["patterns"], PatternKind, "patterns")
    if "newton3" in top:
        options = []
        for token in top["newton3"].split():
            if token in ("on", "true"):
                options.append(True)
            elif token in ("off", "false"):
                options.append(False)
            else:
                raise ScenarioError(f"newton3: unknown option {token!r}")
        spec.newton3_options = options

    _validate_sources(spec)
    return spec


def _parse_options(value: str, enum_cls, key: str):
    options = []
    for token in value.split():
        try:
            options.append(enum_cls(token))
        except ValueError as exc:
            raise ScenarioError(f"{key}: {exc}") from exc
    if not options:
        raise ScenarioError(f"{key}: at least one option required")
    return options


def _validate_sources(spec: ScenarioSpec) -> None:
    for k, src in enumerate(spec.sources):
        extent = src.origin + (np.array(src.counts) - 1) * src.spacing
        if np.any(src.origin < spec.box.min) or np.any(extent > spec.box.max):
            raise ScenarioError(
                f"object {k}: lattice [{src.origin} .. {extent}] exceeds the box")
