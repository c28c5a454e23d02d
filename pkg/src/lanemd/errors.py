"""Exception types shared across the engine."""


class LaneMDError(Exception):
    """Base class for all engine errors."""


class ScenarioError(LaneMDError):
    """Invalid or unparseable scenario input."""


class ConfigurationError(LaneMDError):
    """Invalid kernel/traversal/tuner configuration or parameter."""


class DegenerateDomainError(LaneMDError):
    """Simulation box too small for the requested interaction length."""


class SimulationDivergedError(LaneMDError):
    """Particle state became non-finite or left the domain entirely."""


class ParticleOverlapError(LaneMDError):
    """Two interacting particles sit at zero distance."""
