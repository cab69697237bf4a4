"""Central tolerance record.

Every numerical threshold used across the package lives here so the
defaults are auditable in one place.  Values that the solvers interpret
relative to a length scale are marked as such in the field comments.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    orthonormality: float = 1e-12      # rotation-matrix orthonormality / det
    geometric: float = 1e-9            # generic geometric equality
    unit_ray: float = 1e-12            # perspective rays must be unit norm
    radicand_slack: float = 1e-12      # relative slack below zero clamped to 0
    variant_filter: float = 1e-7       # unsquared relation filter, x length scale
    depth_consistency: float = 1e-7    # pairwise depth-offset closure, x scale
    alignment: float = 1e-7            # per-frame structure alignment, x scale
    condition_limit: float = 1e10      # linear-system condition number cutoff
    root_dedupe: float = 1e-6          # relative root deduplication radius
    newton_converge: float = 1e-12     # damped Newton stopping residual
    newton_validate: float = 1e-9      # acceptance residual for returned roots
    min_image_area: float = 1e-10      # degenerate-image rejection threshold
    min_baseline: float = 1e-6         # two-frame perspective focal separation
    meet_cond_reject: float = 1e8      # meeting-system roots above this are junk
    meet_cond_flag: float = 1e7        # ... above this are flagged degenerate


DEFAULT = Tolerances()
