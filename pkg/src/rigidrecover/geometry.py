"""Core value types and geometric primitives.

Conventions used throughout the package:

* A rigid body is an ordered list of labeled 3-D points in arbitrary
  length units.
* A pose is a proper rotation (det = +1) plus a translation.  Orthogonal
  projection maps a world point ``p`` to the first two components of
  ``R @ p + t`` (the depth component of ``t`` never reaches the image).
  Perspective observation of ``p`` from focal point ``t`` is the unit ray
  ``normalize(R.T @ (p - t))`` in camera coordinates; the observables are
  inter-ray angles, so no intrinsic camera model is assumed.
* All types are immutable values; every operation is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CoincidentPoint,
    DegenerateConfiguration,
    LabelMismatch,
    WrongKind,
)
from .tolerances import DEFAULT as TOL

ORTHOGONAL = "orthogonal"
PERSPECTIVE = "perspective"


def _frozen_array(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


def pair_key(p: str, q: str) -> tuple[str, str]:
    """Canonical unordered label pair."""
    if p == q:
        raise ValueError(f"degenerate segment ({p}, {q})")
    return (p, q) if p < q else (q, p)


@dataclass(frozen=True)
class RigidBodyModel:
    """Labeled 3-D points of a traced object."""

    labels: tuple[str, ...]
    points: np.ndarray  # (n, 3)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(
            self, "points", _frozen_array(self.points, (len(self.labels), 3))
        )
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("body labels must be unique")
        if not self.labels:
            raise ValueError("body must contain at least one point")

    @classmethod
    def from_items(cls, items: Iterable[tuple[str, Sequence[float]]]) -> "RigidBodyModel":
        items = list(items)
        return cls(tuple(l for l, _ in items), np.array([p for _, p in items], dtype=float))

    def point(self, label: str) -> np.ndarray:
        return self.points[self.labels.index(label)]

    def pairwise_sq_lengths(self) -> dict[tuple[str, str], float]:
        """Squared distance for every unordered label pair."""
        out = {}
        for i, p in enumerate(self.labels):
            for j in range(i + 1, len(self.labels)):
                d = self.points[i] - self.points[j]
                out[pair_key(p, self.labels[j])] = float(d @ d)
        return out

    def sorted_distances(self) -> np.ndarray:
        return np.sqrt(np.sort(list(self.pairwise_sq_lengths().values())))


@dataclass(frozen=True)
class PoseParams:
    """Rigid motion: proper rotation plus translation."""

    rotation: np.ndarray  # (3, 3), orthonormal, det +1
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen_array(self.rotation, (3, 3)))
        object.__setattr__(self, "translation", _frozen_array(self.translation, (3,)))
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e3 * TOL.orthonormality:
            raise ValueError(f"rotation not orthonormal (max deviation {err:.3e})")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e3 * TOL.orthonormality:
            raise ValueError("rotation must be proper (det = +1)")

    @classmethod
    def identity(cls) -> "PoseParams":
        return cls(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class FrameObservation:
    """Per-frame 2-D measurements of every body point.

    For orthogonal frames ``coords`` holds image (x, y) pairs; for
    perspective frames it holds unit ray directions from the focal point,
    expressed in camera coordinates.
    """

    kind: str
    labels: tuple[str, ...]
    coords: np.ndarray  # (n, 2) orthogonal / (n, 3) perspective
    frame_index: int = 1

    def __post_init__(self):
        if self.kind not in (ORTHOGONAL, PERSPECTIVE):
            raise ValueError(f"unknown observation kind {self.kind!r}")
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        width = 2 if self.kind == ORTHOGONAL else 3
        object.__setattr__(
            self, "coords", _frozen_array(self.coords, (len(self.labels), width))
        )
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("observation labels must be unique")
        if self.frame_index < 1:
            raise ValueError("frame index must be >= 1")
        if self.kind == PERSPECTIVE:
            norms = np.linalg.norm(self.coords, axis=1)
            if np.abs(norms - 1.0).max() > 1e3 * TOL.unit_ray:
                raise ValueError("perspective rays must have unit norm")

    def vector(self, label: str) -> np.ndarray:
        return self.coords[self.labels.index(label)]

    def projected_sq_lengths(self) -> dict[tuple[str, str], float]:
        """Squared image distance per pair (orthogonal frames only)."""
        if self.kind != ORTHOGONAL:
            raise WrongKind("projected lengths are defined for orthogonal frames")
        out = {}
        for i, p in enumerate(self.labels):
            for j in range(i + 1, len(self.labels)):
                d = self.coords[i] - self.coords[j]
                out[pair_key(p, self.labels[j])] = float(d @ d)
        return out


@dataclass(frozen=True)
class SegmentLengthSet:
    """Squared true segment lengths keyed by unordered label pair."""

    values: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        canon = {}
        for (p, q), v in dict(self.values).items():
            v = float(v)
            if v <= 0.0:
                raise ValueError(f"squared length for ({p}, {q}) must be > 0")
            canon[pair_key(p, q)] = v
        object.__setattr__(self, "values", canon)

    def __getitem__(self, pair: tuple[str, str]) -> float:
        return self.values[pair_key(*pair)]

    def __iter__(self):
        return iter(sorted(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def check_against(self, obs: FrameObservation, slack: float | None = None) -> None:
        """Verify true >= projected squared length for every pair in ``obs``."""
        proj = obs.projected_sq_lengths()
        scale = max(self.values.values())
        slack = (TOL.radicand_slack if slack is None else slack) * max(scale, 1.0)
        for pair, psq in proj.items():
            if self.values[pair] < psq - slack:
                raise ValueError(
                    f"squared length of {pair} shorter than its projection"
                )


# -- projection -------------------------------------------------------------

def project_orthogonal(body: RigidBodyModel, pose: PoseParams,
                       frame_index: int = 1) -> FrameObservation:
    """Orthogonal image: drop the depth coordinate after the rigid motion."""
    moved = body.points @ pose.rotation.T + pose.translation
    return FrameObservation(ORTHOGONAL, body.labels, moved[:, :2], frame_index)


def project_perspective(body: RigidBodyModel, pose: PoseParams,
                        frame_index: int = 1) -> FrameObservation:
    """Unit rays from the focal point (``pose.translation``) to each point."""
    rel = body.points - pose.translation
    dist = np.linalg.norm(rel, axis=1)
    if dist.min() < 1e-12:
        label = body.labels[int(np.argmin(dist))]
        raise CoincidentPoint(f"point {label} coincides with the focal point")
    rays = (rel / dist[:, None]) @ pose.rotation  # row-wise R.T @ rel
    return FrameObservation(PERSPECTIVE, body.labels, rays, frame_index)


def view_angle(obs: FrameObservation, label_p: str, label_q: str) -> float:
    """Angle subtended at the focal point by two observed rays, in [0, pi]."""
    if obs.kind != PERSPECTIVE:
        raise WrongKind("view angles are defined for perspective observations")
    dot = float(obs.vector(label_p) @ obs.vector(label_q))
    return float(np.arccos(np.clip(dot, -1.0, 1.0)))


# -- alignment and congruence -----------------------------------------------

def _orthogonal_fit(source: np.ndarray, target: np.ndarray,
                    force_proper: bool) -> tuple[np.ndarray, np.ndarray, float]:
    """Raw least-squares orthogonal map; improper maps allowed on request."""
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.shape != tgt.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ValueError("point sets must both be (n, 3)")
    if src.shape[0] < 3:
        raise DegenerateConfiguration("need at least 3 correspondences")
    c_src = src.mean(axis=0)
    c_tgt = tgt.mean(axis=0)
    s = src - c_src
    t = tgt - c_tgt
    sing = np.linalg.svd(s, compute_uv=False)
    if sing[1] <= 1e-9 * max(sing[0], 1e-300):
        raise DegenerateConfiguration("correspondences are collinear")
    u, _, vt = np.linalg.svd(t.T @ s)
    d = np.sign(np.linalg.det(u @ vt)) if force_proper else 1.0
    rot = u @ np.diag([1.0, 1.0, d]) @ vt
    trans = c_tgt - rot @ c_src
    residual = float(np.sqrt(np.mean(np.sum((s @ rot.T - t) ** 2, axis=1))))
    return rot, trans, residual


def procrustes_align(source: np.ndarray, target: np.ndarray) -> tuple[PoseParams, float]:
    """Best-fit rigid motion mapping ``source`` points onto ``target``.

    Solves the orthogonal Procrustes problem via SVD of the cross
    covariance, with a determinant correction so the returned rotation is
    always proper.  Returns the pose and the RMS alignment residual.
    """
    rot, trans, residual = _orthogonal_fit(source, target, force_proper=True)
    return PoseParams(rot, trans), residual


def shape_distance(a: RigidBodyModel, b: RigidBodyModel) -> float:
    """Scale-invariant congruence gap between two bodies.

    Each body is reduced to its sorted pairwise-distance vector normalized
    by its own norm; the result is the Euclidean distance between the two
    normalized vectors.  Zero iff the bodies are similar (congruent up to
    scale and isometry, reflections included).
    """
    if set(a.labels) != set(b.labels):
        raise LabelMismatch("bodies must share the same label set")
    da = a.sorted_distances()
    db = b.sorted_distances()
    na = np.linalg.norm(da)
    nb = np.linalg.norm(db)
    if na == 0.0 or nb == 0.0:
        raise DegenerateConfiguration("body with all points coincident")
    return float(np.linalg.norm(da / na - db / nb))


def relative_pose(base: PoseParams, other: PoseParams) -> PoseParams:
    """Motion taking the ``base`` camera frame to the ``other`` one."""
    rot = base.rotation.T @ other.rotation
    trans = base.rotation.T @ (other.translation - base.translation)
    return PoseParams(rot, trans)
