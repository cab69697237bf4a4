"""Two-frame perspective recovery by meeting-line construction.

Gauge fixing: the first anchor point sits at the origin, the second at
(1, 0, 0) (the anchor edge length is the unrecoverable global scale), and
the first focal point lies in the z = 0 half-plane with y > 0.  The first
focal point is then a single angle ``theta1`` on the inscribed-angle
circle through the anchors; the second focal point is an angle ``theta2``
on its own circle plus a rotation ``phi2`` of that circle about the
anchor axis.  Every remaining observed ray becomes a world line once the
camera orientation is pinned by the two anchor rays, and each constrained
point contributes three meeting equations between its two world lines
with two free line parameters.  Five points give 9 equations in 9
unknowns; freezing ``theta1`` with four points gives 6 equations in 6
unknowns, whose solutions swept over a ``theta1`` grid form a
one-parameter family of distinct bodies reproducing the same two images.

Camera orientations have two completions (a proper rotation and its
reflection through the plane of the two anchor rays); both are
enumerated.  Solutions are canonicalized so camera 1 is proper; a
solution whose second camera required the reflected completion is
returned with ``frame2_mirrored=True`` and the proper completion in its
pose (it reproduces the observed rays up to a fixed in-camera reflection,
which preserves every inter-ray angle).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._newton import damped_newton
from .errors import AngleMismatch, NoConvergence, OutOfArc
from .geometry import (
    PERSPECTIVE,
    FrameObservation,
    PoseParams,
    RigidBodyModel,
    shape_distance,
    view_angle,
)
from .tolerances import DEFAULT as TOL

ANCHOR_A = np.array([0.0, 0.0, 0.0])
ANCHOR_B = np.array([1.0, 0.0, 0.0])

_ARC_MARGIN = 1e-9
_SCREEN_SAMPLES = 2048
_NEWTON_STARTS = 40
_MULTISTART_SEED = 4203


@dataclass(frozen=True)
class AnchoredScene:
    """The fixed gauge: anchor points and the plane carrying focal point 1."""

    point_a: np.ndarray = field(default_factory=lambda: ANCHOR_A.copy())
    point_b: np.ndarray = field(default_factory=lambda: ANCHOR_B.copy())
    plane_normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class PoseVars:
    """Focal-point placement angles; ``theta`` angles at the second anchor."""

    theta1: float
    theta2: float
    phi2: float

    def __post_init__(self):
        for name, theta in (("theta1", self.theta1), ("theta2", self.theta2)):
            if not 0.0 < theta < np.pi:
                raise OutOfArc(f"{name} must lie strictly inside (0, pi)")
        object.__setattr__(self, "phi2", float(self.phi2) % (2 * np.pi))


@dataclass(frozen=True)
class LineParams:
    """Ray parameters of the constrained points, one per frame and label."""

    t_first: Mapping[str, float]
    t_second: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "t_first", dict(self.t_first))
        object.__setattr__(self, "t_second", dict(self.t_second))
        for t in (*self.t_first.values(), *self.t_second.values()):
            if t <= 0.0:
                raise ValueError("line parameters must be positive")


# -- scalar geometry ops -------------------------------------------------------


def _check_angle(angle: float, name: str) -> None:
    if not 0.0 < angle < np.pi:
        raise OutOfArc(f"{name} must lie strictly inside (0, pi)")


def place_f1(theta1: float, observed_angle: float) -> np.ndarray:
    """Focal point 1 on the inscribed-angle circle, in the z=0 plane.

    ``observed_angle`` is the angle the anchor pair subtends at the focal
    point; ``theta1`` the angle at the second anchor.  The triangle angle
    sum requires ``theta1 + observed_angle < pi``.
    """
    _check_angle(observed_angle, "observed angle")
    _check_angle(theta1, "theta1")
    if theta1 + observed_angle >= np.pi - _ARC_MARGIN:
        raise OutOfArc(
            f"theta1={theta1:.6f} incompatible with observed angle "
            f"{observed_angle:.6f} (sum must stay below pi)"
        )
    bf = np.sin(observed_angle + theta1) / np.sin(observed_angle)
    return np.array([1.0 - bf * np.cos(theta1), bf * np.sin(theta1), 0.0])


def place_f2(theta2: float, phi2: float, observed_angle: float) -> np.ndarray:
    """Focal point 2: the in-plane solution rotated by phi2 about the x axis."""
    base = place_f1(theta2, observed_angle)
    x, y = base[0], base[1]
    return np.array([x, y * np.cos(phi2), y * np.sin(phi2)])


def _triad(v_first: np.ndarray, v_second: np.ndarray) -> np.ndarray:
    """Right-handed orthonormal triad spanned by two unit vectors."""
    e1 = v_first
    e2 = v_second - (v_second @ e1) * e1
    n = np.linalg.norm(e2)
    if n < 1e-12:
        raise AngleMismatch("anchor rays are parallel; triad undefined")
    e2 = e2 / n
    return np.column_stack([e1, e2, np.cross(e1, e2)])


def camera_orientation(focal: np.ndarray, ray_a_cam: np.ndarray,
                       ray_b_cam: np.ndarray, handedness: int = 1) -> np.ndarray:
    """Orientation mapping the camera anchor rays onto their world rays.

    With ``handedness=1`` the result is the unique proper rotation; with
    ``handedness=-1`` the reflected completion (determinant -1), the
    second discrete branch consistent with the same two anchor rays.
    """
    focal = np.asarray(focal, dtype=float)
    va = ANCHOR_A - focal
    vb = ANCHOR_B - focal
    va = va / np.linalg.norm(va)
    vb = vb / np.linalg.norm(vb)
    cam_angle = np.arccos(np.clip(ray_a_cam @ ray_b_cam, -1, 1))
    world_angle = np.arccos(np.clip(va @ vb, -1, 1))
    if abs(cam_angle - world_angle) > 1e3 * TOL.geometric:
        raise AngleMismatch(
            f"camera rays subtend {cam_angle:.9f} but world rays {world_angle:.9f}"
        )
    if handedness not in (1, -1):
        raise ValueError("handedness must be +1 or -1")
    f = _triad(np.asarray(ray_a_cam, float), np.asarray(ray_b_cam, float))
    w = _triad(va, vb)
    if handedness == -1:
        w = w @ np.diag([1.0, 1.0, -1.0])
    return w @ f.T


# -- batched, complex-step-differentiable core ----------------------------------


def _bnorm(v):
    return np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


class _MeetSystem:
    """Meeting-line equations for a fixed pair of observations.

    Variables are packed as ``[theta1, theta2, phi2, t'..., t''...]``;
    when ``fixed_theta1`` is given, theta1 is removed from the packing.
    The residual accepts a batch of variable vectors (shape ``(n, B)``)
    and complex input, so Jacobians come from a single batched complex
    step.
    """

    def __init__(self, obs1: FrameObservation, obs2: FrameObservation,
                 constrained: Sequence[str], handed: tuple[int, int] = (1, 1),
                 fixed_theta1: float | None = None):
        labels = sorted(obs1.labels)
        self.anchor_a, self.anchor_b = labels[0], labels[1]
        self.constrained = tuple(constrained)
        self.handed = handed
        self.fixed_theta1 = fixed_theta1
        self.gamma1 = view_angle(obs1, self.anchor_a, self.anchor_b)
        self.gamma2 = view_angle(obs2, self.anchor_a, self.anchor_b)
        f1_triad = _triad(obs1.vector(self.anchor_a), obs1.vector(self.anchor_b))
        f2_triad = _triad(obs2.vector(self.anchor_a), obs2.vector(self.anchor_b))
        # triad coordinates of every constrained camera ray: fixed real data
        self.c1 = {x: f1_triad.T @ obs1.vector(x) for x in self.constrained}
        self.c2 = {x: f2_triad.T @ obs2.vector(x) for x in self.constrained}
        self.n_vars = (0 if fixed_theta1 is not None else 1) + 2 + 2 * len(
            self.constrained
        )

    # arcs -------------------------------------------------------------
    def theta1_max(self) -> float:
        return np.pi - self.gamma1

    def theta2_max(self) -> float:
        return np.pi - self.gamma2

    # variable packing ---------------------------------------------------
    def split(self, x):
        x = np.atleast_2d(np.asarray(x).T).T  # (n,) -> (n, 1)
        i = 0
        if self.fixed_theta1 is None:
            theta1 = x[0]
            i = 1
        else:
            theta1 = np.full(x.shape[1], self.fixed_theta1, dtype=x.dtype)
        theta2, phi2 = x[i], x[i + 1]
        m = len(self.constrained)
        t1 = x[i + 2 : i + 2 + m]
        t2 = x[i + 2 + m : i + 2 + 2 * m]
        return theta1, theta2, phi2, t1, t2

    # geometry, batch- and complex-safe -----------------------------------
    def _focals_and_triads(self, theta1, theta2, phi2):
        g1, g2 = self.gamma1, self.gamma2
        bf1 = np.sin(g1 + theta1) / np.sin(g1)
        f1 = np.stack(
            [1.0 - bf1 * np.cos(theta1), bf1 * np.sin(theta1), np.zeros_like(theta1)]
        )
        bf2 = np.sin(g2 + theta2) / np.sin(g2)
        x2 = 1.0 - bf2 * np.cos(theta2)
        y2 = bf2 * np.sin(theta2)
        f2 = np.stack([x2, y2 * np.cos(phi2), y2 * np.sin(phi2)])
        return f1, f2

    @staticmethod
    def _world_triad(f):
        va = -f / _bnorm(f)
        vb = np.stack([1.0 - f[0], -f[1], -f[2]])
        vb = vb / _bnorm(vb)
        w2 = vb - (va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]) * va
        w2 = w2 / _bnorm(w2)
        w3 = np.stack(
            [
                va[1] * w2[2] - va[2] * w2[1],
                va[2] * w2[0] - va[0] * w2[2],
                va[0] * w2[1] - va[1] * w2[0],
            ]
        )
        return va, w2, w3

    def world_dirs(self, theta1, theta2, phi2):
        """World direction of every constrained ray, per frame."""
        f1, f2 = self._focals_and_triads(theta1, theta2, phi2)
        w1 = self._world_triad(f1)
        w2 = self._world_triad(f2)
        h1, h2 = self.handed
        dirs1 = {
            x: c[0] * w1[0] + c[1] * w1[1] + h1 * c[2] * w1[2]
            for x, c in self.c1.items()
        }
        dirs2 = {
            x: c[0] * w2[0] + c[1] * w2[1] + h2 * c[2] * w2[2]
            for x, c in self.c2.items()
        }
        return f1, f2, dirs1, dirs2

    def residual(self, x):
        """Meeting residuals, stacked 3 per constrained label."""
        squeeze = np.asarray(x).ndim == 1
        theta1, theta2, phi2, t1, t2 = self.split(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            # line-search trial points may step outside the valid arcs,
            # where the triads degenerate; the resulting non-finite
            # residuals are rejected by the caller
            f1, f2, dirs1, dirs2 = self.world_dirs(theta1, theta2, phi2)
            blocks = []
            for k, lbl in enumerate(self.constrained):
                blocks.append(f1 + t1[k] * dirs1[lbl] - f2 - t2[k] * dirs2[lbl])
            res = np.concatenate(blocks, axis=0)
        return res[:, 0] if squeeze else res

    def jacobian(self, x):
        """Batched complex-step Jacobian of :meth:`residual`."""
        x = np.asarray(x, dtype=float)
        h = 1e-200
        batch = x[:, None].astype(complex) + 1j * h * np.eye(x.size, dtype=complex)
        return np.imag(self.residual(batch)) / h

    # multistart ---------------------------------------------------------
    def closest_t(self, theta1, theta2, phi2):
        """Least-squares line parameters and gap for fixed placement angles."""
        f1, f2, dirs1, dirs2 = self.world_dirs(theta1, theta2, phi2)
        r = f2 - f1
        t1 = np.empty((len(self.constrained),) + np.shape(theta2))
        t2 = np.empty_like(t1)
        gap = np.zeros(np.shape(theta2))
        for k, lbl in enumerate(self.constrained):
            d1, d2 = dirs1[lbl], dirs2[lbl]
            b = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
            rd1 = r[0] * d1[0] + r[1] * d1[1] + r[2] * d1[2]
            rd2 = r[0] * d2[0] + r[1] * d2[1] + r[2] * d2[2]
            denom = 1.0 - b * b
            denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
            t2[k] = (b * rd1 - rd2) / denom
            t1[k] = rd1 + t2[k] * b
            miss = f1 + t1[k] * d1 - f2 - t2[k] * d2
            gap += miss[0] ** 2 + miss[1] ** 2 + miss[2] ** 2
        return t1, t2, gap

    def multistart_seeds(self, rng: np.random.Generator,
                         n_screen: int, n_keep: int) -> list[np.ndarray]:
        """Screen random placements, keep those with the smallest line gaps.

        Candidates whose least-squares line parameters come out negative
        are penalized: admissible roots keep every point in front of both
        focal points, so such regions rarely hold one.
        """
        free_theta1 = self.fixed_theta1 is None
        th1 = (
            rng.uniform(0.02, self.theta1_max() - 0.02, n_screen)
            if free_theta1
            else np.full(n_screen, self.fixed_theta1)
        )
        th2 = rng.uniform(0.02, self.theta2_max() - 0.02, n_screen)
        ph2 = rng.uniform(0.0, 2 * np.pi, n_screen)
        with np.errstate(invalid="ignore", divide="ignore"):
            t1, t2, gap = self.closest_t(th1, th2, ph2)
            cheirality = np.minimum(t1.min(axis=0), t2.min(axis=0))
            gap = np.where(cheirality <= 0.0, gap + 1e3, gap)
            gap = np.where(np.isfinite(gap), gap, np.inf)
        order = np.argsort(gap)
        # keep the best candidates subject to a minimum spacing in the
        # placement angles, so the starts cover several valleys instead of
        # piling into the deepest one
        seeds = []
        kept: list[np.ndarray] = []
        for idx in order:
            if not np.isfinite(gap[idx]):
                break
            place = np.array([th1[idx], th2[idx], ph2[idx]])
            if any(
                max(
                    abs(place[0] - p[0]),
                    abs(place[1] - p[1]),
                    abs((place[2] - p[2] + np.pi) % (2 * np.pi) - np.pi),
                )
                < 0.2
                for p in kept
            ):
                continue
            kept.append(place)
            head = [th1[idx]] if free_theta1 else []
            seeds.append(
                np.array(head + [th2[idx], ph2[idx]] + list(t1[:, idx]) + list(t2[:, idx]))
            )
            if len(seeds) >= n_keep:
                break
        return seeds

    # root post-processing -------------------------------------------------
    def root_valid(self, x) -> bool:
        theta1, theta2, phi2, t1, t2 = self.split(np.asarray(x, dtype=float))
        if not (_ARC_MARGIN < theta1[0] < self.theta1_max() - _ARC_MARGIN):
            return False
        if not (_ARC_MARGIN < theta2[0] < self.theta2_max() - _ARC_MARGIN):
            return False
        if min(t1.min(), t2.min()) <= 1e-9:
            return False
        f1, f2, _, _ = self.world_dirs(theta1, theta2, phi2)
        baseline = float(_bnorm((f2 - f1)[:, 0]))
        return baseline >= TOL.min_baseline

    def jac_cond(self, x) -> float:
        sing = np.linalg.svd(self.jacobian(np.asarray(x, dtype=float)),
                             compute_uv=False)
        if sing[-1] <= 0.0:
            return np.inf
        return float(sing[0] / sing[-1])


def meet_residual(pose_vars: PoseVars, line_params: LineParams,
                  obs1: FrameObservation, obs2: FrameObservation,
                  labels: Sequence[str] | None = None,
                  handedness: tuple[int, int] = (1, 1)) -> np.ndarray:
    """Residual of the meeting-line equations at explicit variable values.

    Three scalars per constrained label: the gap between the two world
    lines at the given line parameters.  ``labels`` defaults to every
    non-anchor label, sorted.
    """
    all_labels = sorted(obs1.labels)
    constrained = tuple(labels) if labels is not None else tuple(all_labels[2:])
    for frame_obs, kind in ((obs1, "first"), (obs2, "second")):
        if frame_obs.kind != PERSPECTIVE:
            raise ValueError(f"{kind} observation must be perspective")
    if not constrained:
        return np.zeros(0)
    system = _MeetSystem(obs1, obs2, constrained, handed=handedness)
    # validate the placement before evaluating
    place_f1(pose_vars.theta1, system.gamma1)
    place_f1(pose_vars.theta2, system.gamma2)
    x = np.array(
        [pose_vars.theta1, pose_vars.theta2, pose_vars.phi2]
        + [line_params.t_first[l] for l in constrained]
        + [line_params.t_second[l] for l in constrained]
    )
    return system.residual(x)


def meet_jacobian(pose_vars: PoseVars, line_params: LineParams,
                  obs1: FrameObservation, obs2: FrameObservation,
                  labels: Sequence[str] | None = None,
                  handedness: tuple[int, int] = (1, 1)) -> np.ndarray:
    """The solver's Jacobian of :func:`meet_residual` (complex step)."""
    all_labels = sorted(obs1.labels)
    constrained = tuple(labels) if labels is not None else tuple(all_labels[2:])
    system = _MeetSystem(obs1, obs2, constrained, handed=handedness)
    x = np.array(
        [pose_vars.theta1, pose_vars.theta2, pose_vars.phi2]
        + [line_params.t_first[l] for l in constrained]
        + [line_params.t_second[l] for l in constrained]
    )
    return system.jacobian(x)


# -- solutions ----------------------------------------------------------------


@dataclass(frozen=True)
class PerspectiveSolution:
    """One admissible two-frame reconstruction in the anchored gauge."""

    body: RigidBodyModel
    poses: tuple[PoseParams, PoseParams]
    vars: PoseVars
    line_params: LineParams
    residual: float
    frame2_mirrored: bool
    degenerate: bool

    @property
    def relative_pose(self) -> PoseParams:
        r1, r2 = self.poses[0].rotation, self.poses[1].rotation
        return PoseParams(
            r1.T @ r2, r1.T @ (self.poses[1].translation - self.poses[0].translation)
        )


def _canonical_branch(x: np.ndarray, handed: tuple[int, int],
                      free_theta1: bool) -> tuple[np.ndarray, tuple[int, int]]:
    """Reflect through the anchor plane so camera 1 is always proper."""
    h1, h2 = handed
    if h1 == 1:
        return x, handed
    x = x.copy()
    phi_idx = 2 if free_theta1 else 1
    x[phi_idx] = (-x[phi_idx]) % (2 * np.pi)
    return x, (1, -h2)


def _proper_rotation(focal: np.ndarray, obs: FrameObservation,
                     anchor_a: str, anchor_b: str) -> np.ndarray:
    return camera_orientation(
        focal, obs.vector(anchor_a), obs.vector(anchor_b), handedness=1
    )


def _build_solution(system: _MeetSystem, x: np.ndarray, res: float,
                    obs1: FrameObservation, obs2: FrameObservation,
                    handed: tuple[int, int]) -> PerspectiveSolution:
    theta1, theta2, phi2, t1, t2 = system.split(x)
    f1, f2, dirs1, dirs2 = system.world_dirs(theta1, theta2, phi2)
    f1 = f1[:, 0]
    f2 = f2[:, 0]
    labels = [system.anchor_a, system.anchor_b]
    pts = [ANCHOR_A, ANCHOR_B]
    for k, lbl in enumerate(system.constrained):
        p_first = f1 + t1[k, 0] * dirs1[lbl][:, 0]
        p_second = f2 + t2[k, 0] * dirs2[lbl][:, 0]
        labels.append(lbl)
        pts.append(0.5 * (p_first + p_second))
    body = RigidBodyModel(tuple(labels), np.array(pts))
    pose1 = PoseParams(_proper_rotation(f1, obs1, system.anchor_a, system.anchor_b), f1)
    pose2 = PoseParams(_proper_rotation(f2, obs2, system.anchor_a, system.anchor_b), f2)
    degenerate = bool(system.jac_cond(x) >= TOL.meet_cond_flag)
    pose_vars = PoseVars(float(theta1[0]), float(theta2[0]), float(phi2[0] % (2 * np.pi)))
    line_params = LineParams(
        {lbl: float(t1[k, 0]) for k, lbl in enumerate(system.constrained)},
        {lbl: float(t2[k, 0]) for k, lbl in enumerate(system.constrained)},
    )
    return PerspectiveSolution(
        body=body,
        poses=(pose1, pose2),
        vars=pose_vars,
        line_params=line_params,
        residual=res,
        frame2_mirrored=(handed[1] == -1),
        degenerate=degenerate,
    )


def _validate_pair(obs: Sequence[FrameObservation], n_points: int):
    if len(obs) != 2:
        raise ValueError("exactly two frames are required")
    obs1, obs2 = obs
    if obs1.kind != PERSPECTIVE or obs2.kind != PERSPECTIVE:
        raise ValueError("perspective observations required")
    if sorted(obs1.labels) != sorted(obs2.labels):
        raise ValueError("frames must observe the same label set")
    if len(obs1.labels) != n_points:
        raise ValueError(f"expected {n_points} points, got {len(obs1.labels)}")
    for o in obs:
        rays = o.coords
        for i in range(len(rays)):
            for j in range(i + 1, len(rays)):
                if np.linalg.norm(np.cross(rays[i], rays[j])) < 1e-9:
                    raise ValueError(
                        f"frame {o.frame_index}: rays {o.labels[i]}, {o.labels[j]} coincide"
                    )
    return obs1, obs2


def solve_five_point_two_frame(
    obs: Sequence[FrameObservation],
) -> list[PerspectiveSolution]:
    """All found reconstructions of five points from two perspective frames.

    Damped-Newton multistart over the 9-variable meeting system, repeated
    for both handedness completions of each camera; roots are accepted at
    residual infinity-norm below 1e-9 with every line parameter positive,
    then deduplicated by body shape.
    """
    obs1, obs2 = _validate_pair(obs, 5)
    labels = sorted(obs1.labels)
    constrained = tuple(labels[2:])
    rng = np.random.default_rng(_MULTISTART_SEED)
    solutions: list[PerspectiveSolution] = []
    best_residual = np.inf
    n_degenerate = 0
    for handed in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        system = _MeetSystem(obs1, obs2, constrained, handed=handed)
        seeds = system.multistart_seeds(rng, _SCREEN_SAMPLES, _NEWTON_STARTS)
        for x0 in seeds:
            x, res, ok = damped_newton(
                system.residual, system.jacobian, x0,
                max_iter=40, converge_tol=TOL.newton_converge,
                early_abort=(12, 1e-2),
            )
            best_residual = min(best_residual, res)
            if res > TOL.newton_validate:
                continue
            x, canon_handed = _canonical_branch(x, handed, free_theta1=True)
            canon = _MeetSystem(obs1, obs2, constrained, handed=canon_handed)
            if not canon.root_valid(x):
                continue
            if canon.jac_cond(x) >= TOL.meet_cond_reject:
                n_degenerate += 1
                continue
            sol = _build_solution(canon, x, res, obs1, obs2, canon_handed)
            if any(
                shape_distance(sol.body, s.body) < 1e-6
                and s.frame2_mirrored == sol.frame2_mirrored
                for s in solutions
            ):
                continue
            solutions.append(sol)
    if not solutions:
        detail = (
            f" ({n_degenerate} ill-conditioned root(s) rejected)"
            if n_degenerate
            else ""
        )
        raise NoConvergence(
            "no multistart branch converged to an admissible root" + detail,
            best_residual=float(best_residual),
        )
    solutions.sort(key=lambda s: (s.vars.theta1, s.vars.theta2, s.vars.phi2))
    return solutions


# -- ambiguity family ----------------------------------------------------------


@dataclass(frozen=True)
class FamilySample:
    theta1: float
    body: RigidBodyModel
    residual: float
    vars: PoseVars
    line_params: LineParams


@dataclass(frozen=True)
class AmbiguityFamily:
    """Reconstructions along a theta1 grid; break_index marks a failed chain."""

    samples: tuple[FamilySample, ...]
    grid: tuple[float, ...]
    break_index: int | None

    def max_pairwise_shape_distance(self) -> float:
        worst = 0.0
        for i in range(len(self.samples)):
            for j in range(i + 1, len(self.samples)):
                worst = max(
                    worst,
                    shape_distance(self.samples[i].body, self.samples[j].body),
                )
        return worst


def _ray_angle(u: np.ndarray, v: np.ndarray) -> float:
    # atan2 of the cross/dot pair stays exact for nearly parallel rays,
    # where arccos of the dot product bottoms out near sqrt(eps)
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)), u @ v))


def _reprojection_residual(solution: PerspectiveSolution,
                           obs: Sequence[FrameObservation]) -> float:
    """Worst angular gap between observed and reprojected rays."""
    from .geometry import project_perspective  # local to avoid cycle at import

    worst = 0.0
    mirror_cam = np.diag([1.0, 1.0, -1.0])
    for k, (pose, o) in enumerate(zip(solution.poses, obs)):
        reproj = project_perspective(solution.body, pose)
        flip = k == 1 and solution.frame2_mirrored
        triad = _triad(o.vector(sorted(o.labels)[0]), o.vector(sorted(o.labels)[1]))
        d = triad @ mirror_cam @ triad.T
        for lbl in o.labels:
            observed = d @ o.vector(lbl) if flip else o.vector(lbl)
            worst = max(worst, _ray_angle(reproj.vector(lbl), observed))
    return worst


def trace_ambiguity_family(obs: Sequence[FrameObservation],
                           theta_grid: Sequence[float]) -> AmbiguityFamily:
    """Solve the four-point system for each frozen theta1 on the grid.

    The first solvable grid point is seeded by multistart; each later one
    by numerical continuation from its neighbour, bisecting the theta step
    up to six times before declaring the chain broken.  Grid points that
    fall outside the valid inscribed-angle arc before a chain exists are
    skipped; the family is empty when no grid point admits a solution.
    """
    obs1, obs2 = _validate_pair(obs, 4)
    labels = sorted(obs1.labels)
    constrained = tuple(labels[2:])
    grid = tuple(float(t) for t in theta_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("theta grid must be strictly increasing")
    rng = np.random.default_rng(_MULTISTART_SEED)
    samples: list[FamilySample] = []
    break_index: int | None = None
    first_failure: int | None = None
    prev: tuple[float, np.ndarray] | None = None

    def solve_at(theta1: float, seed: np.ndarray | None) -> np.ndarray | None:
        system = _MeetSystem(obs1, obs2, constrained, fixed_theta1=theta1)
        if seed is not None:
            x, res, _ = damped_newton(
                system.residual, system.jacobian, seed,
                max_iter=40, converge_tol=TOL.newton_converge,
            )
            if (res <= TOL.newton_validate and system.root_valid(x)
                    and system.jac_cond(x) < TOL.meet_cond_reject):
                return x
            return None
        # first point of a chain: collect every admissible root and pick the
        # deterministically smallest placement (several distinct roots are
        # usually consistent with the data; any of them seeds a valid branch)
        roots: list[np.ndarray] = []
        for x0 in system.multistart_seeds(rng, _SCREEN_SAMPLES, _NEWTON_STARTS):
            x, res, _ = damped_newton(
                system.residual, system.jacobian, x0,
                max_iter=40, converge_tol=TOL.newton_converge,
            )
            if (res <= TOL.newton_validate and system.root_valid(x)
                    and system.jac_cond(x) < TOL.meet_cond_reject):
                x[1] = x[1] % (2 * np.pi)
                if not any(np.abs(x - r).max() < 1e-6 for r in roots):
                    roots.append(x)
        if not roots:
            return None
        return min(roots, key=lambda r: tuple(r))

    def continue_to(theta_from: float, x_from: np.ndarray,
                    theta_to: float) -> np.ndarray | None:
        x = solve_at(theta_to, x_from)
        if x is not None:
            return x
        lo, x_lo = theta_from, x_from
        for _ in range(6):
            mid = 0.5 * (lo + theta_to)
            x_mid = solve_at(mid, x_lo)
            if x_mid is None:
                return None
            x = solve_at(theta_to, x_mid)
            if x is not None:
                return x
            lo, x_lo = mid, x_mid
        return None

    for gi, theta1 in enumerate(grid):
        system = _MeetSystem(obs1, obs2, constrained, fixed_theta1=theta1)
        arc_ok = _ARC_MARGIN < theta1 < system.theta1_max() - _ARC_MARGIN
        if not arc_ok:
            if prev is not None:
                break_index = gi
                break
            first_failure = gi if first_failure is None else first_failure
            continue
        if prev is None:
            x = solve_at(theta1, None)
            if x is None:
                first_failure = gi if first_failure is None else first_failure
                continue
        else:
            x = continue_to(prev[0], prev[1], theta1)
            if x is None:
                break_index = gi
                break
        full = np.concatenate([[theta1], x])
        sol = _build_solution(
            _MeetSystem(obs1, obs2, constrained, handed=(1, 1)), full,
            float(np.abs(system.residual(x)).max()), obs1, obs2, (1, 1),
        )
        reproj = _reprojection_residual(sol, (obs1, obs2))
        samples.append(
            FamilySample(theta1, sol.body, reproj, sol.vars, sol.line_params)
        )
        prev = (theta1, x)

    if break_index is None and not samples:
        break_index = first_failure if first_failure is not None else 0
    return AmbiguityFamily(tuple(samples), grid, break_index)
