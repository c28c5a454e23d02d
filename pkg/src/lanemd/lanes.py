"""Portable lane abstraction standing in for width-V SIMD registers.

A :class:`LaneGroup` is a stack of registers, each ``width`` lanes wide.
All arithmetic is elementwise per lane; reductions run over the lane axis,
either across the full register or one half of it. Kernels are written
against this type so the register-fill patterns stay explicit while the
backing store remains a plain numpy array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(slots=True)
class LaneGroup:
    """Registers of ``width`` lanes; ``vals`` has the lane axis last.

    Treat instances as immutable; arithmetic returns new groups. Width is
    validated at the named constructors, not per operation, since every
    lane-wise operation preserves the register shape.
    """

    vals: np.ndarray
    width: int

    @classmethod
    def broadcast(cls, value: float, width: int, registers: int = 1) -> "LaneGroup":
        return cls(np.full((registers, width), value), width)

    @classmethod
    def from_array(cls, vals: np.ndarray) -> "LaneGroup":
        if vals.ndim == 0:
            raise ValueError("a lane group needs at least one lane axis")
        return cls(vals, vals.shape[-1])

    def _wrap(self, vals: np.ndarray) -> "LaneGroup":
        return LaneGroup(vals, self.width)

    def __add__(self, other):
        return self._wrap(self.vals + _raw(other))

    def __sub__(self, other):
        return self._wrap(self.vals - _raw(other))

    def __mul__(self, other):
        return self._wrap(self.vals * _raw(other))

    def __truediv__(self, other):
        return self._wrap(self.vals / _raw(other))

    def __rtruediv__(self, other):
        return self._wrap(_raw(other) / self.vals)

    def less_than(self, other) -> np.ndarray:
        """Elementwise compare producing a lane mask."""
        return self.vals < _raw(other)

    def equals(self, other) -> np.ndarray:
        return self.vals == _raw(other)

    def blend(self, mask: np.ndarray, other) -> "LaneGroup":
        """Lanes from self where mask holds, from ``other`` elsewhere."""
        return self._wrap(np.where(mask, self.vals, _raw(other)))

    def masked(self, mask: np.ndarray) -> "LaneGroup":
        """Zero every lane where the mask is false."""
        return self._wrap(np.where(mask, self.vals, 0.0))

    def reduce_sum(self) -> np.ndarray:
        """Per-register sum over all lanes."""
        return self.vals.sum(axis=-1)

    def lower_half(self) -> "LaneGroup":
        half = self.width // 2
        return LaneGroup(self.vals[..., :half], half)

    def upper_half(self) -> "LaneGroup":
        half = self.width // 2
        return LaneGroup(self.vals[..., half:], half)

    def accumulate_halves(self) -> "LaneGroup":
        """Elementwise sum of the lower and upper register halves."""
        half = self.width // 2
        return LaneGroup(self.vals[..., :half] + self.vals[..., half:], half)


def _raw(value):
    return value.vals if isinstance(value, LaneGroup) else value
