"""Degrees-of-freedom balance for multi-frame structure recovery.

A rigid body of ``p`` points and ``s`` straight lines traced over ``k``
frames carries ``-1 + 3p + 4s + c(k-1)`` degrees of freedom, where the
per-frame motion cost ``c`` is 6 under perspective projection and 5 under
orthogonal projection (depth translation never reaches an orthogonal
image), and the leading -1 removes the unrecoverable global scale.  Each
frame supplies ``2p + 2s`` measurements.  Recovery is possible only when
the measurements outweigh the unknowns; this module computes that balance
exactly, in integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidInstance
from .geometry import ORTHOGONAL, PERSPECTIVE

INFEASIBLE = "infeasible"
CRITICAL = "critical"
OVERDETERMINED = "overdetermined"

_MOTION_DOF = {PERSPECTIVE: 6, ORTHOGONAL: 5}


@dataclass(frozen=True)
class ProblemInstance:
    points: int
    lines: int
    frames: int
    projection: str

    def validate(self) -> None:
        if self.projection not in _MOTION_DOF:
            raise InvalidInstance(f"unknown projection {self.projection!r}")
        if self.points < 0 or self.lines < 0:
            raise InvalidInstance("feature counts must be non-negative")
        if self.points + self.lines < 1:
            raise InvalidInstance("instance needs at least one feature")
        if self.frames < 1:
            raise InvalidInstance("instance needs at least one frame")


@dataclass(frozen=True)
class FeasibilityReport:
    instance: ProblemInstance
    dof: int
    info: int

    @property
    def margin(self) -> int:
        return self.info - self.dof

    @property
    def verdict(self) -> str:
        if self.margin < 0:
            return INFEASIBLE
        return CRITICAL if self.margin == 0 else OVERDETERMINED


def dof_balance(inst: ProblemInstance) -> FeasibilityReport:
    """Count unknowns against measurements for one problem instance."""
    inst.validate()
    c = _MOTION_DOF[inst.projection]
    dof = -1 + 3 * inst.points + 4 * inst.lines + c * (inst.frames - 1)
    info = inst.frames * (2 * inst.points + 2 * inst.lines)
    return FeasibilityReport(inst, dof, info)


def feasibility_table(instances: Iterable[ProblemInstance]) -> list[FeasibilityReport]:
    """Balance every instance, reporting in input order."""
    reports = []
    for idx, inst in enumerate(instances):
        try:
            reports.append(dof_balance(inst))
        except InvalidInstance as exc:
            raise InvalidInstance(f"instance {idx}: {exc}") from exc
    return reports


# The built-in reference table: the classic worked instances this tool is
# checked against (four/five points and line mixes over two or three
# frames, both projection models).
REFERENCE_INSTANCES: Sequence[ProblemInstance] = (
    ProblemInstance(points=4, lines=0, frames=2, projection=PERSPECTIVE),
    ProblemInstance(points=4, lines=0, frames=3, projection=PERSPECTIVE),
    ProblemInstance(points=5, lines=0, frames=2, projection=PERSPECTIVE),
    ProblemInstance(points=3, lines=1, frames=3, projection=PERSPECTIVE),
    ProblemInstance(points=0, lines=6, frames=3, projection=PERSPECTIVE),
    ProblemInstance(points=3, lines=0, frames=3, projection=ORTHOGONAL),
    ProblemInstance(points=4, lines=0, frames=2, projection=ORTHOGONAL),
)


def reference_table() -> list[FeasibilityReport]:
    return feasibility_table(REFERENCE_INSTANCES)
