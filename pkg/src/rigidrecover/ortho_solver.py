"""Structure and motion recovery from orthogonal projections.

The observables are per-frame image distances between traced points.  A
true segment of squared length ``L2`` whose image has squared length
``l2`` spans a depth offset of ``sqrt(L2 - l2)``, so around any triangle
the three depth offsets cancel with exactly one of three sign patterns.
Squaring that relation twice removes the radicals and leaves, per
triangle and frame, a polynomial equation in the squared true lengths:

    sym4(x) + sym4(p) = row(p) . x

where ``x`` are the unknown squared lengths of the triangle's sides,
``p`` the corresponding squared image lengths, ``sym4`` the symmetric
quartic form and ``row`` its linear companion (see
:func:`squared_triangle_row`).  The whole expression collapses to
``sym4(x - p)``, which is what the solvers evaluate.

Five solvable configurations are provided: the two quadratic systems
(3 points / 3 frames and 4 points / 2 frames, damped-Newton multistart)
and the three linearized ones obtained by subtracting the first frame's
equation (3 points / 4 frames, 4 points / 3 frames, 5 points / 2 frames).
Roots are filtered through the unsquared sign relations, turned into
per-frame structures by depth-sign enumeration, and into inter-frame
motions by Procrustes alignment.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._newton import damped_newton
from .errors import (
    DegenerateImages,
    IllConditioned,
    InconsistentLengths,
    MirrorMismatch,
    NegativeRadicand,
    NoSolution,
    NonPositiveLengths,
)
from .geometry import (
    ORTHOGONAL,
    FrameObservation,
    PoseParams,
    RigidBodyModel,
    SegmentLengthSet,
    _orthogonal_fit,
    pair_key,
)
from .tolerances import DEFAULT as TOL

# The three admissible sign patterns: exactly one radical is negative,
# matching the three possible relative depth orderings of a triangle.
SIGN_VARIANTS: tuple[tuple[int, int, int], ...] = (
    (1, 1, -1),
    (1, -1, 1),
    (-1, 1, 1),
)

_MIRROR = np.diag([1.0, 1.0, -1.0])

# Quadratic form of the symmetric quartic: sym4(u) = u.T @ _SYM4 @ u.
_SYM4 = np.array([[1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])

_MULTISTART_KAPPAS = (1.0, 1.25, 1.5, 2.0, 4.0)
_MULTISTART_RANDOM = 20
_MULTISTART_SEED = 1905


@dataclass(frozen=True)
class TriangleRelation:
    """One sign variant of the depth-offset relation around a triangle."""

    labels: tuple[str, str, str]
    signs: tuple[int, int, int]

    def __post_init__(self):
        if tuple(self.signs) not in SIGN_VARIANTS:
            raise ValueError("exactly one radical must carry the minus sign")


@dataclass(frozen=True)
class SquaredSystem:
    """Equation system over squared segment lengths.

    ``kind == "linear"`` rows satisfy ``matrix @ x = rhs`` at a solution.
    ``kind == "quadratic"`` rows additionally carry the shared quartic
    term: the residual of row ``i`` is ``sym4(x[tri_i]) + matrix[i] @ x -
    rhs[i]`` with ``tri_i`` the row's triangle column indices.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    unknowns: tuple[tuple[str, str], ...]
    kind: str
    triangles: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.matrix.shape != (len(self.triangles), len(self.unknowns)):
            raise ValueError("matrix shape must match rows and unknowns")
        if self.rhs.shape != (len(self.triangles),):
            raise ValueError("right-hand side must have one entry per row")
        if not (np.isfinite(self.matrix).all() and np.isfinite(self.rhs).all()):
            raise ValueError("system entries must be finite")

    def residual(self, x: np.ndarray) -> np.ndarray:
        res = self.matrix @ x - self.rhs
        if self.kind == "quadratic":
            for i, tri in enumerate(self.triangles):
                u = x[list(tri)]
                res[i] += float(u @ _SYM4 @ u)
        return res

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        jac = self.matrix.copy()
        if self.kind == "quadratic":
            for i, tri in enumerate(self.triangles):
                jac[i, list(tri)] += 2.0 * (_SYM4 @ x[list(tri)])
        return jac


def _sym4(u) -> float:
    a, b, c = u[0], u[1], u[2]
    return a * a + b * b + c * c - 2 * a * b - 2 * a * c - 2 * b * c


def triangle_residual(true_sq: Sequence[float], proj_sq: Sequence[float],
                      variant: TriangleRelation | Sequence[int]) -> float:
    """Signed value of one unsquared depth relation.

    Radicands in ``[-slack, 0]`` are clamped to zero (a segment parallel
    to the image plane); anything below raises :class:`NegativeRadicand`.
    """
    signs = variant.signs if isinstance(variant, TriangleRelation) else tuple(variant)
    if tuple(signs) not in SIGN_VARIANTS:
        raise ValueError("exactly one radical must carry the minus sign")
    true_sq = np.asarray(true_sq, dtype=float)
    proj_sq = np.asarray(proj_sq, dtype=float)
    slack = TOL.radicand_slack * max(1.0, float(true_sq.max()), float(proj_sq.max()))
    rad = true_sq - proj_sq
    if rad.min() < -slack:
        raise NegativeRadicand(
            f"true squared length below projection by {-rad.min():.3e}"
        )
    rad = np.clip(rad, 0.0, None)
    return float(np.sum(np.asarray(signs, dtype=float) * np.sqrt(rad)))


def squared_triangle_row(proj_sq: Sequence[float]) -> tuple[np.ndarray, float]:
    """Linear coefficients and constant of one twofold-squared relation.

    For image squared lengths ``(p1, p2, p3)`` the equation reads
    ``sym4(x) + const = coeffs . x`` in the unknown squared lengths
    ``x``; the quartic ``sym4(x)`` itself is shared by every frame and is
    handled by the caller, not by this row.
    """
    p = np.asarray(proj_sq, dtype=float)
    coeffs = 2.0 * np.array(
        [p[0] - p[1] - p[2], -p[0] + p[1] - p[2], -p[0] - p[1] + p[2]]
    )
    return coeffs, float(_sym4(p))


def _best_variant_residual(true_sq, proj_sq) -> float:
    """Smallest |residual| over the three sign variants."""
    best = np.inf
    for signs in SIGN_VARIANTS:
        r = abs(triangle_residual(true_sq, proj_sq, signs))
        best = min(best, r)
    return best


# -- observation handling -----------------------------------------------------


def _canonical_labels(obs: Sequence[FrameObservation]) -> tuple[str, ...]:
    labels = tuple(sorted(obs[0].labels))
    for o in obs:
        if tuple(sorted(o.labels)) != labels:
            raise ValueError("all frames must observe the same label set")
        if o.kind != ORTHOGONAL:
            raise ValueError("orthogonal solvers need orthogonal observations")
    return labels


def _check_images(obs: Sequence[FrameObservation], scale: float) -> None:
    for o in obs:
        pts = o.coords
        for i, j, k in itertools.combinations(range(len(o.labels)), 3):
            u = pts[j] - pts[i]
            v = pts[k] - pts[i]
            area = 0.5 * abs(u[0] * v[1] - u[1] * v[0])
            if area < TOL.min_image_area * scale * scale:
                raise DegenerateImages(
                    f"frame {o.frame_index}: image points nearly collinear"
                )


def _pairs_of(labels: Sequence[str]) -> tuple[tuple[str, str], ...]:
    return tuple(
        pair_key(p, q) for p, q in itertools.combinations(sorted(labels), 2)
    )


def _triangle_columns(tri_labels: Sequence[str],
                      pairs: Sequence[tuple[str, str]]) -> tuple[int, int, int]:
    x, y, z = sorted(tri_labels)
    index = {pair: i for i, pair in enumerate(pairs)}
    return (index[pair_key(x, y)], index[pair_key(x, z)], index[pair_key(y, z)])


def _proj_matrix(obs: Sequence[FrameObservation],
                 pairs: Sequence[tuple[str, str]]) -> np.ndarray:
    """Squared image lengths, one row per frame, columns in pair order."""
    rows = []
    for o in obs:
        proj = o.projected_sq_lengths()
        rows.append([proj[pair] for pair in pairs])
    return np.array(rows, dtype=float)


# -- system construction -------------------------------------------------------


def _quadratic_system(proj: np.ndarray, pairs, triangles) -> SquaredSystem:
    n = len(pairs)
    rows, rhs, tri_cols = [], [], []
    for tri in triangles:
        cols = list(tri)
        for i in range(proj.shape[0]):
            coeffs, const = squared_triangle_row(proj[i, cols])
            row = np.zeros(n)
            row[cols] = -coeffs
            rows.append(row)
            rhs.append(-const)
            tri_cols.append(tuple(cols))
    return SquaredSystem(
        np.array(rows), np.array(rhs), tuple(pairs), "quadratic", tuple(tri_cols)
    )


def _linear_system(proj: np.ndarray, pairs, triangles) -> SquaredSystem:
    n = len(pairs)
    rows, rhs, tri_cols = [], [], []
    for tri in triangles:
        cols = list(tri)
        base_coeffs, base_const = squared_triangle_row(proj[0, cols])
        for i in range(1, proj.shape[0]):
            coeffs, const = squared_triangle_row(proj[i, cols])
            row = np.zeros(n)
            row[cols] = coeffs - base_coeffs
            rows.append(row)
            rhs.append(const - base_const)
            tri_cols.append(tuple(cols))
    return SquaredSystem(
        np.array(rows), np.array(rhs), tuple(pairs), "linear", tuple(tri_cols)
    )


# -- root finding --------------------------------------------------------------


def _multistart_roots(system: SquaredSystem, proj: np.ndarray) -> list[np.ndarray]:
    base = proj.max(axis=0)  # squared image length can never exceed the truth
    starts = [kappa * base for kappa in _MULTISTART_KAPPAS]
    rng = np.random.default_rng(_MULTISTART_SEED)
    for _ in range(_MULTISTART_RANDOM):
        kappa = np.exp(rng.uniform(0.0, np.log(32.0), size=base.size))
        starts.append(kappa * base)
    roots = []
    for x0 in starts:
        x, res, ok = damped_newton(
            system.residual, system.jacobian, x0,
            max_iter=60, converge_tol=TOL.newton_converge,
        )
        if not ok and res > TOL.newton_validate:
            continue
        roots.append(x)
    return _dedupe_roots(roots)


def _dedupe_roots(roots: list[np.ndarray]) -> list[np.ndarray]:
    roots = sorted(roots, key=lambda r: tuple(r))
    kept: list[np.ndarray] = []
    for r in roots:
        scale = max(1.0, float(np.abs(r).max()))
        if any(np.abs(r - k).max() <= TOL.root_dedupe * scale for k in kept):
            continue
        kept.append(r)
    return kept


# -- reconstruction ------------------------------------------------------------


def lengths_to_structure(obs: FrameObservation,
                         lengths: SegmentLengthSet) -> list[RigidBodyModel]:
    """Lift one orthogonal image to 3-D by assigning depths.

    The depth of the first observed label is anchored at zero and the
    remaining depth offsets ``sqrt(L2 - l2)`` are enumerated over all sign
    assignments; assignments that close every pairwise constraint are kept.
    The mirror twin (all depths negated) is always part of the output, so
    the result holds one structure (self-mirrored, planar case) or two.
    """
    if obs.kind != ORTHOGONAL:
        raise ValueError("structure lifting needs an orthogonal observation")
    labels = obs.labels
    n = len(labels)
    if n > 6:
        raise ValueError("depth-sign enumeration supports at most 6 points")
    proj = obs.projected_sq_lengths()
    scale_sq = max(lengths.values.values())
    scale = float(np.sqrt(scale_sq))
    slack = TOL.radicand_slack * max(1.0, scale_sq)

    def offset(p: str, q: str) -> float:
        rad = lengths[(p, q)] - proj[pair_key(p, q)]
        if rad < -slack:
            raise InconsistentLengths(
                f"length of {pair_key(p, q)} is shorter than its projection"
            )
        return float(np.sqrt(max(rad, 0.0)))

    anchor = labels[0]
    rest = labels[1:]
    d_anchor = np.array([offset(anchor, p) for p in rest])
    d_pair = {
        (i, j): offset(rest[i], rest[j])
        for i in range(len(rest))
        for j in range(i + 1, len(rest))
    }
    tol = TOL.depth_consistency * max(1.0, scale)
    solutions = []
    seen = set()
    for signs in itertools.product((1.0, -1.0), repeat=len(rest)):
        z = np.asarray(signs) * d_anchor
        ok = all(
            abs(abs(z[i] - z[j]) - d) <= tol for (i, j), d in d_pair.items()
        )
        if not ok:
            continue
        key = tuple(np.round(z / max(scale, 1e-300), 9))
        if key in seen:
            continue
        seen.add(key)
        solutions.append(z)
    if not solutions:
        raise InconsistentLengths("no depth-sign assignment closes all pairs")
    # canonical order: twin whose first nonzero depth is positive comes first
    solutions.sort(key=lambda z: tuple(-z))
    structures = []
    for z in solutions:
        pts = np.zeros((n, 3))
        pts[:, :2] = obs.coords
        pts[1:, 2] = z
        structures.append(RigidBodyModel(labels, pts))
    return structures


def _structure_scale(structure: RigidBodyModel) -> float:
    pts = structure.points - structure.points.mean(axis=0)
    return max(float(np.sqrt(np.mean(np.sum(pts**2, axis=1)))), 1e-12)


def extract_motion(structures: Sequence[RigidBodyModel]) -> list[PoseParams]:
    """Rigid motions mapping the frame-1 structure onto every later frame.

    The depth component of each translation is fixed to zero: motion along
    the projection axis never reaches an orthogonal image.  Raises
    :class:`MirrorMismatch` when a frame only aligns through a reflection,
    in which case the caller should swap in that frame's mirror twin.
    """
    if len(structures) < 2:
        raise ValueError("need at least two frames of structures")
    first = structures[0]
    order = first.labels
    tol = TOL.alignment * _structure_scale(first)
    poses = []
    for st in structures[1:]:
        if set(st.labels) != set(order):
            raise ValueError("structures must share one label set")
        tgt = np.array([st.point(l) for l in order])
        rot, trans, res = _orthogonal_fit(first.points, tgt, force_proper=True)
        if res > tol:
            _, _, res_improper = _orthogonal_fit(
                first.points, tgt, force_proper=False
            )
            if res_improper <= tol:
                raise MirrorMismatch(
                    "frame aligns only through a reflection; swap a mirror twin"
                )
            raise ValueError(
                f"structures are not congruent (alignment residual {res:.3e})"
            )
        poses.append(PoseParams(rot, np.array([trans[0], trans[1], 0.0])))
    return poses


@dataclass(frozen=True)
class RecoveryResult:
    """One admissible reconstruction from orthogonal observations."""

    lengths: SegmentLengthSet
    structures: tuple[RigidBodyModel, ...]
    motions: tuple[PoseParams, ...]
    mirror_flag: bool
    residual: float

    def mirrored(self) -> "RecoveryResult":
        """The mirror twin: depths negated in every frame."""
        structures = tuple(
            RigidBodyModel(st.labels, st.points @ _MIRROR) for st in self.structures
        )
        motions = tuple(
            PoseParams(_MIRROR @ p.rotation @ _MIRROR, _MIRROR @ p.translation)
            for p in self.motions
        )
        return RecoveryResult(
            self.lengths, structures, motions, self.mirror_flag, self.residual
        )


def _filter_and_reconstruct(
    roots: Sequence[np.ndarray],
    obs: Sequence[FrameObservation],
    pairs: Sequence[tuple[str, str]],
    proj: np.ndarray,
    triangles: Sequence[tuple[int, int, int]],
) -> list[RecoveryResult]:
    """Apply the unsquared-variant filter and build full reconstructions."""
    results = []
    for x in roots:
        if x.min() <= 0.0:
            continue
        scale = float(np.sqrt(x.max()))
        tol = TOL.variant_filter * max(scale, 1.0)
        worst = 0.0
        ok = True
        for i in range(proj.shape[0]):
            for tri in triangles:
                cols = list(tri)
                try:
                    best = _best_variant_residual(x[cols], proj[i, cols])
                except NegativeRadicand:
                    ok = False
                    break
                if best > tol:
                    ok = False
                    break
                worst = max(worst, best)
            if not ok:
                break
        if not ok:
            continue
        lengths = SegmentLengthSet(dict(zip(pairs, x)))
        try:
            result = _assemble_result(obs, lengths, worst)
        except (InconsistentLengths, MirrorMismatch, ValueError):
            continue
        results.append(result)
    return results


def _assemble_result(obs: Sequence[FrameObservation], lengths: SegmentLengthSet,
                     residual: float) -> RecoveryResult:
    candidates = [lengths_to_structure(o, lengths) for o in obs]
    chosen = [candidates[0][0]]
    tol = TOL.alignment * _structure_scale(chosen[0])
    for cands in candidates[1:]:
        picked = None
        for st in cands:
            _, _, res = _orthogonal_fit(chosen[0].points, st.points, force_proper=True)
            if res <= tol:
                picked = st
                break
        if picked is None:
            raise InconsistentLengths("no mirror pairing aligns across frames")
        chosen.append(picked)
    motions = extract_motion(chosen)
    mirror_flag = any(
        np.abs(st.points[:, 2]).max() > TOL.geometric * _structure_scale(st)
        for st in chosen
    )
    return RecoveryResult(
        lengths, tuple(chosen), tuple(motions), mirror_flag, residual
    )


# -- solver entry points -------------------------------------------------------


def _normalize(obs: Sequence[FrameObservation]) -> tuple[list[FrameObservation], float]:
    """Rescale image coordinates to unit RMS segment length.

    Keeps every internal tolerance meaningful regardless of the data's
    physical units; recovered lengths are scaled back before returning.
    """
    pairs = _pairs_of(_canonical_labels(obs))
    proj = _proj_matrix(obs, pairs)
    sigma = float(np.sqrt(proj.mean()))
    if sigma <= 0.0:
        raise DegenerateImages("all image points coincide")
    scaled = [
        FrameObservation(ORTHOGONAL, o.labels, o.coords / sigma, o.frame_index)
        for o in obs
    ]
    return scaled, sigma


def _rescale_result(result: RecoveryResult, sigma: float) -> RecoveryResult:
    lengths = SegmentLengthSet(
        {pair: v * sigma * sigma for pair, v in result.lengths.values.items()}
    )
    structures = tuple(
        RigidBodyModel(st.labels, st.points * sigma) for st in result.structures
    )
    motions = tuple(
        PoseParams(p.rotation, p.translation * sigma) for p in result.motions
    )
    return RecoveryResult(
        lengths, structures, motions, result.mirror_flag, result.residual * sigma
    )


def _solve_common(
    obs: Sequence[FrameObservation],
    n_points: int,
    n_frames: int,
    solved_triangles: Callable[[Sequence[str]], list[tuple[str, ...]]],
    linear: bool,
) -> list[RecoveryResult]:
    if len(obs) != n_frames:
        raise ValueError(f"expected {n_frames} frames, got {len(obs)}")
    labels = _canonical_labels(obs)
    if len(labels) != n_points:
        raise ValueError(f"expected {n_points} points, got {len(labels)}")
    scaled, sigma = _normalize(obs)
    _check_images(scaled, 1.0)
    pairs = _pairs_of(labels)
    proj = _proj_matrix(scaled, pairs)
    tri_cols = [_triangle_columns(t, pairs) for t in solved_triangles(labels)]
    all_tri_cols = [
        _triangle_columns(t, pairs) for t in itertools.combinations(labels, 3)
    ]
    if linear:
        system = _linear_system(proj, pairs, tri_cols)
        sing = np.linalg.svd(system.matrix, compute_uv=False)
        if sing[-1] <= 0.0 or sing[0] / sing[-1] >= TOL.condition_limit:
            raise IllConditioned(
                "linearized system is rank deficient (special-form motion)"
            )
        x = np.linalg.solve(system.matrix, system.rhs)
        if x.min() <= 0.0:
            raise NonPositiveLengths(
                f"solved squared lengths contain min {x.min():.3e}"
            )
        roots = [x]
    else:
        system = _quadratic_system(proj, pairs, tri_cols)
        roots = _multistart_roots(system, proj)
    results = _filter_and_reconstruct(roots, scaled, pairs, proj, all_tri_cols)
    if not results:
        raise NoSolution(
            f"{len(roots)} root(s) found, none passed the sign-relation filter"
        )
    results.sort(key=lambda r: tuple(r.lengths.values[p] for p in pairs))
    return [_rescale_result(r, sigma) for r in results]


def _all_triples(labels: Sequence[str]) -> list[tuple[str, ...]]:
    return list(itertools.combinations(sorted(labels), 3))


def _triples_with_last(labels: Sequence[str]) -> list[tuple[str, ...]]:
    """The three triangles through the last label; the remaining one is
    linearly dependent on them and is checked, not solved."""
    sl = sorted(labels)
    return [t for t in itertools.combinations(sl, 3) if sl[-1] in t]


def solve_p3f3(obs: Sequence[FrameObservation]) -> list[RecoveryResult]:
    """Three points over three frames: quadratic system in 3 unknowns."""
    return _solve_common(obs, 3, 3, _all_triples, linear=False)


def solve_p4f2(obs: Sequence[FrameObservation]) -> list[RecoveryResult]:
    """Four points over two frames: quadratic system in 6 unknowns.

    Two orthogonal frames admit a one-parameter family of rigid
    interpretations, so the returned results are isolated samples of that
    family: each is an exact, internally consistent reconstruction of the
    images, but no single one can be singled out as "the" body.
    """
    return _solve_common(obs, 4, 2, _triples_with_last, linear=False)


def solve_p3f4_linear(obs: Sequence[FrameObservation]) -> list[RecoveryResult]:
    """Three points over four frames: 3x3 linear system in the squares."""
    return _solve_common(obs, 3, 4, _all_triples, linear=True)


def solve_p4f3_linear(obs: Sequence[FrameObservation]) -> list[RecoveryResult]:
    """Four points over three frames: 6x6 linear system in the squares."""
    return _solve_common(obs, 4, 3, _triples_with_last, linear=True)


def solve_p5f2_linear(obs: Sequence[FrameObservation]) -> list[RecoveryResult]:
    """Five points over two frames: 10x10 linear system in the squares.

    The ten subtracted triangle rows have rank 8 on generic data (the
    two-frame interpretation family again), so this raises
    :class:`IllConditioned` for every non-contrived scene.
    """
    return _solve_common(obs, 5, 2, _all_triples, linear=True)


SOLVERS: dict[str, Callable[[Sequence[FrameObservation]], list[RecoveryResult]]] = {
    "p3f3": solve_p3f3,
    "p4f2": solve_p4f2,
    "p3f4": solve_p3f4_linear,
    "p4f3": solve_p4f3_linear,
    "p5f2": solve_p5f2_linear,
}

SOLVER_SHAPES: dict[str, tuple[int, int]] = {
    "p3f3": (3, 3),
    "p4f2": (4, 2),
    "p3f4": (3, 4),
    "p4f3": (4, 3),
    "p5f2": (5, 2),
}
