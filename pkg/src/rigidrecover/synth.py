"""Deterministic synthetic scenes: the ground-truth oracle for round trips.

Bodies are sampled uniformly in a cube, rotations uniformly on SO(3) via
unit quaternions (rescaled in angle when a cap below pi is requested),
translations uniformly in a cube.  Scenes failing the degeneracy guard
(flat bodies, nearly collinear image triangles) are resampled; generation
is a pure function of the spec, so equal seeds give bit-identical scenes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import GuardExhausted
from .geometry import (
    ORTHOGONAL,
    PERSPECTIVE,
    FrameObservation,
    PoseParams,
    RigidBodyModel,
    project_orthogonal,
    project_perspective,
)

_LABELS = tuple("ABCDEFGHIJKLMNOPQRSTUVWXYZ")


@dataclass(frozen=True)
class SynthSpec:
    n_points: int
    n_frames: int
    projection: str
    seed: int
    body_scale: float = 1.0
    motion_magnitude: tuple[float, float] = (np.pi, 1.0)
    noise_sigma: float = 0.0
    min_tetra_volume: float = 1e-3
    min_image_area: float = 1e-3

    def __post_init__(self):
        if self.projection not in (ORTHOGONAL, PERSPECTIVE):
            raise ValueError(f"unknown projection {self.projection!r}")
        if self.n_points < 3:
            raise ValueError("need at least 3 points")
        if self.n_frames < 2:
            raise ValueError("need at least 2 frames")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if self.n_points > len(_LABELS):
            raise ValueError("too many points to label")


def _random_rotation(rng: np.random.Generator, max_angle: float) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    if max_angle < np.pi:
        # keep the quaternion's axis, rescale the angle into [0, max_angle]
        angle = rng.uniform(0.0, max_angle)
        axis = np.array([x, y, z])
        norm = np.linalg.norm(axis)
        axis = axis / norm if norm > 1e-15 else np.array([0.0, 0.0, 1.0])
        half = angle / 2.0
        w, x, y, z = np.cos(half), *(np.sin(half) * axis)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _body_ok(points: np.ndarray, spec: SynthSpec) -> bool:
    scale = spec.body_scale
    for tri in itertools.combinations(range(len(points)), 3):
        u = points[tri[1]] - points[tri[0]]
        v = points[tri[2]] - points[tri[0]]
        if 0.5 * np.linalg.norm(np.cross(u, v)) < spec.min_image_area * scale * scale:
            return False
    if len(points) >= 4:
        for tet in itertools.combinations(range(len(points)), 4):
            m = points[list(tet[1:])] - points[tet[0]]
            if abs(np.linalg.det(m)) / 6.0 < spec.min_tetra_volume * scale**3:
                return False
    return True


def _images_ok(obs: FrameObservation, spec: SynthSpec) -> bool:
    pts = obs.coords[:, :2]
    # perspective rays are compared by their directions' cross products
    if obs.kind == PERSPECTIVE:
        for i, j in itertools.combinations(range(len(pts)), 2):
            if np.linalg.norm(np.cross(obs.coords[i], obs.coords[j])) < 1e-6:
                return False
        return True
    scale = spec.body_scale
    for tri in itertools.combinations(range(len(pts)), 3):
        u = pts[tri[1]] - pts[tri[0]]
        v = pts[tri[2]] - pts[tri[0]]
        if 0.5 * abs(u[0] * v[1] - u[1] * v[0]) < spec.min_image_area * scale * scale:
            return False
    return True


def _perturb_rays(rays: np.ndarray, sigma: float,
                  rng: np.random.Generator) -> np.ndarray:
    out = np.empty_like(rays)
    for i, ray in enumerate(rays):
        axis = rng.standard_normal(3)
        axis -= (axis @ ray) * ray
        norm = np.linalg.norm(axis)
        if norm < 1e-15:
            out[i] = ray
            continue
        axis /= norm
        angle = abs(rng.normal(0.0, sigma))
        out[i] = np.cos(angle) * ray + np.sin(angle) * np.cross(axis, ray)
        out[i] /= np.linalg.norm(out[i])
    return out


def generate(spec: SynthSpec) -> tuple[
    RigidBodyModel, list[PoseParams], list[FrameObservation]
]:
    """Sample a body, per-frame poses, and their (optionally noisy) images."""
    rng = np.random.default_rng(spec.seed)
    max_rot, max_trans = spec.motion_magnitude
    labels = _LABELS[: spec.n_points]
    for _ in range(1000):
        pts = rng.uniform(-0.5, 0.5, size=(spec.n_points, 3)) * spec.body_scale
        if not _body_ok(pts, spec):
            continue
        body = RigidBodyModel(labels, pts)
        centroid = pts.mean(axis=0)
        poses = []
        for _ in range(spec.n_frames):
            rot = _random_rotation(rng, max_rot)
            if spec.projection == PERSPECTIVE:
                direction = rng.standard_normal(3)
                direction /= np.linalg.norm(direction)
                dist = spec.body_scale * (3.0 + rng.uniform(0.0, 2.0))
                trans = centroid + direction * dist
            else:
                trans = rng.uniform(-0.5, 0.5, size=3) * max_trans
            poses.append(PoseParams(rot, trans))
        project = (
            project_orthogonal if spec.projection == ORTHOGONAL else project_perspective
        )
        obs = [project(body, pose, i + 1) for i, pose in enumerate(poses)]
        if not all(_images_ok(o, spec) for o in obs):
            continue
        if spec.noise_sigma > 0.0:
            noisy = []
            for o in obs:
                if spec.projection == ORTHOGONAL:
                    coords = o.coords + rng.normal(0.0, spec.noise_sigma, o.coords.shape)
                else:
                    coords = _perturb_rays(o.coords, spec.noise_sigma, rng)
                noisy.append(FrameObservation(o.kind, o.labels, coords, o.frame_index))
            obs = noisy
        return body, poses, obs
    raise GuardExhausted(
        f"degeneracy guard rejected 1000 sampled scenes for seed {spec.seed}"
    )


def mirror_body(body: RigidBodyModel) -> RigidBodyModel:
    """Reflect a body through the z=0 plane; all distances are preserved."""
    pts = body.points.copy()
    pts[:, 2] *= -1.0
    return RigidBodyModel(body.labels, pts)
