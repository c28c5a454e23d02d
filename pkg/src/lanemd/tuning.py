"""Full-search auto-tuning over the configuration cross-product.

Each tuning phase cycles every valid configuration in enumeration order,
collecting ``samples_per_config`` metric samples per configuration; the
samples are reduced to a single evidence value and the argmin configuration
runs for the rest of the tuning interval. Samples displaced by a
neighbor-structure rebuild are retaken so evidence stays comparable.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from .errors import ConfigurationError, ScenarioError
from .kernels import PATTERN_ORDER, PatternKind
from .traversals import TRAVERSAL_ORDER, TraversalKind


class ContainerKind(Enum):
    LINKED_CELLS = "lc"
    VERLET_CLUSTER_LISTS = "vcl"


CONTAINER_ORDER = (ContainerKind.LINKED_CELLS, ContainerKind.VERLET_CLUSTER_LISTS)

REDUCTIONS = ("mean", "min", "median")


@dataclass(frozen=True)
class Configuration:
    """One point of the tuning search space."""

    container: ContainerKind
    traversal: TraversalKind
    newton3: bool
    pattern: PatternKind

    def is_valid(self) -> bool:
        cluster_traversal = self.traversal is TraversalKind.VCL
        cluster_container = self.container is ContainerKind.VERLET_CLUSTER_LISTS
        if cluster_traversal != cluster_container:
            return False
        if self.traversal is TraversalKind.LC_C01 and self.newton3:
            return False
        return True

    @property
    def label(self) -> str:
        return ",".join([
            self.container.value, self.traversal.value,
            "true" if self.newton3 else "false", self.pattern.value,
        ])

    @classmethod
    def parse(cls, text: str) -> "Configuration":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ConfigurationError(
                "expected container,traversal,newton3,pattern")
        try:
            container = ContainerKind(parts[0])
            traversal = TraversalKind(parts[1])
            newton3 = _parse_bool(parts[2])
            pattern = PatternKind(parts[3])
        except ValueError as exc:
            raise ConfigurationError(f"bad configuration {text!r}: {exc}") from exc
        config = cls(container, traversal, newton3, pattern)
        if not config.is_valid():
            raise ConfigurationError(f"invalid configuration {text!r}")
        return config


def _parse_bool(token: str) -> bool:
    if token in ("true", "on", "yes", "1"):
        return True
    if token in ("false", "off", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {token!r}")


def enumerate_search_space(
    containers: list[ContainerKind],
    traversals: list[TraversalKind],
    newton3_options: list[bool],
    patterns: list[PatternKind],
) -> list[Configuration]:
    """Valid configurations of the cross-product, in canonical order."""
    for name, options in (("containers", containers), ("traversals", traversals),
                          ("newton3", newton3_options), ("patterns", patterns)):
        if not options:
            raise ConfigurationError(f"empty option list for {name}")
    ordered_containers = [c for c in CONTAINER_ORDER if c in containers]
    ordered_traversals = [t for t in TRAVERSAL_ORDER if t in traversals]
    ordered_newton3 = [n for n in (False, True) if n in newton3_options]
    ordered_patterns = [p for p in PATTERN_ORDER if p in patterns]
    space = []
    for container in ordered_containers:
        for traversal in ordered_traversals:
            for newton3 in ordered_newton3:
                for pattern in ordered_patterns:
                    config = Configuration(container, traversal, newton3, pattern)
                    if config.is_valid():
                        space.append(config)
    return space


def reduce_samples(samples: list[float], reduction: str) -> float:
    if not samples:
        raise ConfigurationError("cannot reduce an empty sample list")
    if reduction == "mean":
        return sum(samples) / len(samples)
    if reduction == "min":
        return min(samples)
    if reduction == "median":
        return statistics.median(samples)
    raise ConfigurationError(f"unknown reduction {reduction!r}")


@dataclass(frozen=True)
class TuningPolicy:
    samples_per_config: int = 3
    tuning_interval: int = 1000
    reduction: str = "mean"
    metric: str = "laneops"

    def __post_init__(self):
        if self.samples_per_config < 1:
            raise ConfigurationError("samples_per_config must be >= 1")
        if self.reduction not in REDUCTIONS:
            raise ConfigurationError(f"unknown reduction {self.reduction!r}")


@dataclass
class Evidence:
    """Recorded samples for one configuration within one tuning phase."""

    configuration: Configuration
    samples: list[float]
    reduced_value: float

    @classmethod
    def from_samples(cls, config: Configuration, samples: list[float],
                     reduction: str) -> "Evidence":
        return cls(config, list(samples), reduce_samples(samples, reduction))


def select_optimum(evidences: list[Evidence]) -> Configuration:
    """Configuration with the smallest reduced value; first wins ties.

    Failed configurations (infinite evidence) are skipped.
    """
    if not evidences:
        raise ConfigurationError("no evidence to select from")
    best = None
    for evidence in evidences:
        if math.isinf(evidence.reduced_value):
            continue
        if best is None or evidence.reduced_value < best.reduced_value:
            best = evidence
    if best is None:
        raise ConfigurationError("every configuration failed during tuning")
    return best.configuration


def compute_speedup(reference_value: float, pattern_value: float) -> float:
    """Metric of the reference fill order divided by the pattern's metric."""
    if pattern_value <= 0:
        raise ConfigurationError("pattern metric value must be positive")
    return reference_value / pattern_value


TUNING = "tuning"
PRODUCTION = "production"


class Tuner:
    """Full-search state machine advanced once per iteration.

    Usage per iteration: ``next_configuration`` picks what to run, then
    ``record_sample`` feeds back the metric sample for that force phase.
    """

    def __init__(self, configurations: list[Configuration], policy: TuningPolicy):
        if not configurations:
            raise ConfigurationError("search space is empty")
        if policy.tuning_interval < policy.samples_per_config * len(configurations):
            raise ConfigurationError(
                "tuning interval shorter than one full sampling pass "
                f"({policy.samples_per_config} x {len(configurations)})")
        self.configurations = list(configurations)
        self.policy = policy
        self.selected: Configuration | None = None
        self.phase_evidence: list[list[Evidence]] = []
        self.phase_selection: list[Configuration] = []
        self._phase_start: int | None = None
        self._samples: list[list[float]] = [[] for _ in self.configurations]
        self._failed: list[bool] = [False] * len(self.configurations)
        self._current: int | None = None

    def _sampling_index(self) -> int | None:
        s = self.policy.samples_per_config
        for k, samples in enumerate(self._samples):
            if self._failed[k]:
                continue
            if len(samples) < s:
                return k
        return None

    def next_configuration(self, iteration: int) -> tuple[Configuration, str]:
        if self._phase_start is None:
            self._phase_start = iteration
        if self.selected is not None:
            if iteration - self._phase_start >= self.policy.tuning_interval:
                self._begin_phase(iteration)
            else:
                self._current = None
                return self.selected, PRODUCTION
        idx = self._sampling_index()
        if idx is None:
            # every configuration failed; keep running the first one
            self._current = None
            return self.configurations[0], PRODUCTION
        self._current = idx
        return self.configurations[idx], TUNING

    def _begin_phase(self, iteration: int) -> None:
        self._phase_start = iteration
        self.selected = None
        self._samples = [[] for _ in self.configurations]
        self._failed = [False] * len(self.configurations)

    def record_sample(self, value: float, displaced: bool = False) -> None:
        """Feed back the metric sample of the iteration just executed.

        ``displaced`` marks a sample invalidated by a neighbor-structure
        rebuild; it is dropped and the configuration sampled again.
        """
        if self._current is None:
            return
        if displaced:
            return
        self._samples[self._current].append(value)
        if self._sampling_index() is None:
            self._finalize_phase()

    def record_failure(self) -> None:
        """Mark the configuration just executed as failed (infinite evidence)."""
        if self._current is None:
            return
        self._failed[self._current] = True
        self._samples[self._current] = [math.inf]
        if self._sampling_index() is None:
            self._finalize_phase()

    def _finalize_phase(self) -> None:
        evidences = []
        for k, config in enumerate(self.configurations):
            if self._failed[k]:
                evidences.append(Evidence(config, [math.inf], math.inf))
            else:
                evidences.append(Evidence.from_samples(
                    config, self._samples[k], self.policy.reduction))
        self.phase_evidence.append(evidences)
        self.selected = select_optimum(evidences)
        self.phase_selection.append(self.selected)


class TimeMetric:
    """Monotonic wall-clock time of the bracketed region, in nanoseconds."""

    def __init__(self):
        self._start = 0

    def begin_region(self) -> None:
        self._start = time.perf_counter_ns()

    def end_region(self) -> float:
        return float(time.perf_counter_ns() - self._start)


class LaneOpsMetric:
    """Deterministic proxy: lane slots processed inside the region.

    Reads a monotonic lane-slot counter at region begin and end, mirroring
    how an energy counter would be sampled around the force phase.
    """

    def __init__(self, counter: Callable[[], int]):
        self._counter = counter
        self._start = 0

    def begin_region(self) -> None:
        self._start = self._counter()

    def end_region(self) -> float:
        return float(self._counter() - self._start)


class ReplayMetric:
    """Replays externally recorded per-phase readings from a text file."""

    def __init__(self, path: str | Path):
        values = []
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                text = line.strip()
                if not text:
                    continue
                try:
                    value = float(text)
                except ValueError as exc:
                    raise ScenarioError(
                        f"{path}:{line_no}: not a number: {text!r}") from exc
                if value < 0:
                    raise ScenarioError(
                        f"{path}:{line_no}: metric readings must be non-negative")
                values.append(value)
        self._values = values
        self._cursor = 0

    def begin_region(self) -> None:
        pass

    def end_region(self) -> float:
        if self._cursor >= len(self._values):
            raise ScenarioError("metric replay file exhausted")
        value = self._values[self._cursor]
        self._cursor += 1
        return value


def make_metric_provider(spec: str, lane_counter: Callable[[], int]):
    if spec == "time":
        return TimeMetric()
    if spec == "laneops":
        return LaneOpsMetric(lane_counter)
    if spec.startswith("replay:"):
        return ReplayMetric(spec.split(":", 1)[1])
    raise ScenarioError(f"unknown metric {spec!r}")
