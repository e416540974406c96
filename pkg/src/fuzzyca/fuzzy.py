"""Triangular fuzzy numbers.

Only what the simulator needs: construction, membership and scaling for
unit conversion (veh/h <-> veh/step). No fuzzy arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import NonPositiveFactor, OrderViolation


@dataclass(frozen=True)
class TriangularFuzzy:
    """Ordered triple ``(z1, z2, z3)`` with peak membership at ``z2``."""

    z1: float
    z2: float
    z3: float

    def __post_init__(self):
        vals = (self.z1, self.z2, self.z3)
        if not all(math.isfinite(v) for v in vals):
            raise OrderViolation(f"non-finite component in {vals}")
        if not (self.z1 <= self.z2 <= self.z3):
            raise OrderViolation(f"expected z1 <= z2 <= z3, got {vals}")

    def __iter__(self):
        return iter((self.z1, self.z2, self.z3))

    def __getitem__(self, m: int) -> float:
        return (self.z1, self.z2, self.z3)[m]

    @property
    def is_crisp(self) -> bool:
        return self.z1 == self.z3

    def to_list(self) -> list[float]:
        return [self.z1, self.z2, self.z3]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "TriangularFuzzy":
        if len(values) != 3:
            raise OrderViolation(f"a triangular fuzzy number has 3 components, got {len(values)}")
        return make_tfn(*values)


def make_tfn(z1: float, z2: float, z3: float) -> TriangularFuzzy:
    return TriangularFuzzy(z1, z2, z3)


def sorted_tfn(values: Iterable[float]) -> TriangularFuzzy:
    """Build a fuzzy number from three components in any order."""
    return TriangularFuzzy.from_list(sorted(values))


def membership(z: TriangularFuzzy, x: float) -> float:
    """Piecewise-linear membership grade of ``x`` in ``z``.

    A crisp number has grade 1 at its value and 0 elsewhere; a one-sided
    degenerate triangle (e.g. ``z1 == z2 < z3``) has a vertical left edge.
    """
    if x < z.z1 or x > z.z3:
        return 0.0
    if x == z.z2:
        return 1.0
    if x < z.z2:
        return (x - z.z1) / (z.z2 - z.z1)
    return (z.z3 - x) / (z.z3 - z.z2)


def scale_tfn(z: TriangularFuzzy, factor: float) -> TriangularFuzzy:
    if not factor > 0:
        raise NonPositiveFactor(f"scale factor must be > 0, got {factor}")
    return TriangularFuzzy(z.z1 * factor, z.z2 * factor, z.z3 * factor)
