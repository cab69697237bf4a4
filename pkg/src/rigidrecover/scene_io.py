"""Scene and report files: canonical JSON, schema checks, invariant checks.

Scene files are versioned JSON with labels sorted lexicographically and
floats emitted with 17 significant digits, so writing and re-reading a
scene is bit-exact.  Schema violations report a JSON pointer to the
offending field; value-level problems (non-unit rays, improper rotations)
raise :class:`InvariantError` naming the culprit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InvariantError, ParseError, SchemaError
from .geometry import (
    ORTHOGONAL,
    PERSPECTIVE,
    FrameObservation,
    PoseParams,
    RigidBodyModel,
)
from .tolerances import DEFAULT as TOL

FORMAT_VERSION = "1"


@dataclass(frozen=True)
class Scene:
    projection: str
    body: RigidBodyModel
    poses: tuple[PoseParams, ...]
    observations: tuple[FrameObservation, ...]
    format_version: str = FORMAT_VERSION


# -- canonical JSON writer -----------------------------------------------------


def _fmt(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            raise ValueError("cannot serialize non-finite number")
        return format(v, ".17g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        items = sorted(value.items())
        return "{" + ",".join(f"{json.dumps(k)}:{_fmt(v)}" for k, v in items) + "}"
    if isinstance(value, (list, tuple)) or isinstance(value, np.ndarray):
        return "[" + ",".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_canonical(obj: Any) -> str:
    """Deterministic JSON: sorted keys, 17-significant-digit floats."""
    return _fmt(obj)


# -- scene <-> dict -------------------------------------------------------------


def scene_to_dict(scene: Scene) -> dict:
    return {
        "format_version": scene.format_version,
        "projection": scene.projection,
        "body": {l: list(scene.body.point(l)) for l in scene.body.labels},
        "poses": [
            {
                "rotation": [float(v) for v in pose.rotation.reshape(-1)],
                "translation": list(pose.translation),
            }
            for pose in scene.poses
        ],
        "observations": [
            {l: list(o.vector(l)) for l in o.labels} for o in scene.observations
        ],
    }


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(scene_to_dict(scene)))
        fh.write("\n")


def _expect(cond: bool, message: str, pointer: str) -> None:
    if not cond:
        raise SchemaError(message, pointer)


def _number_list(raw: Any, length: int, pointer: str) -> list[float]:
    _expect(isinstance(raw, list), "expected an array", pointer)
    _expect(len(raw) == length, f"expected {length} numbers", pointer)
    out = []
    for i, v in enumerate(raw):
        _expect(
            isinstance(v, (int, float)) and not isinstance(v, bool),
            "expected a number", f"{pointer}/{i}",
        )
        out.append(float(v))
    return out


def scene_from_dict(raw: Any) -> Scene:
    _expect(isinstance(raw, dict), "scene must be a JSON object", "")
    for key in ("format_version", "projection", "body", "poses", "observations"):
        _expect(key in raw, f"missing required key {key!r}", "")
    _expect(
        raw["format_version"] == FORMAT_VERSION,
        f"unsupported format_version {raw['format_version']!r}", "/format_version",
    )
    projection = raw["projection"]
    _expect(
        projection in (ORTHOGONAL, PERSPECTIVE),
        "projection must be 'orthogonal' or 'perspective'", "/projection",
    )
    body_raw = raw["body"]
    _expect(isinstance(body_raw, dict) and body_raw, "body must be a non-empty object", "/body")
    labels = tuple(sorted(body_raw))
    points = np.array([_number_list(body_raw[l], 3, f"/body/{l}") for l in labels])
    body = RigidBodyModel(labels, points)

    poses_raw = raw["poses"]
    _expect(isinstance(poses_raw, list) and poses_raw, "poses must be a non-empty array", "/poses")
    poses = []
    for i, p in enumerate(poses_raw):
        _expect(isinstance(p, dict), "pose must be an object", f"/poses/{i}")
        for key in ("rotation", "translation"):
            _expect(key in p, f"missing required key {key!r}", f"/poses/{i}")
        rot = np.array(_number_list(p["rotation"], 9, f"/poses/{i}/rotation")).reshape(3, 3)
        trans = np.array(_number_list(p["translation"], 3, f"/poses/{i}/translation"))
        try:
            poses.append(PoseParams(rot, trans))
        except ValueError as exc:
            raise InvariantError(f"pose {i + 1}: {exc}") from exc

    obs_raw = raw["observations"]
    _expect(isinstance(obs_raw, list) and obs_raw, "observations must be a non-empty array", "/observations")
    _expect(
        len(obs_raw) == len(poses),
        "observations and poses must have the same frame count", "/observations",
    )
    width = 2 if projection == ORTHOGONAL else 3
    observations = []
    for i, frame in enumerate(obs_raw):
        _expect(isinstance(frame, dict), "frame must be an object", f"/observations/{i}")
        _expect(
            set(frame) == set(labels),
            "frame must observe exactly the body labels", f"/observations/{i}",
        )
        coords = np.array(
            [_number_list(frame[l], width, f"/observations/{i}/{l}") for l in labels]
        )
        if projection == PERSPECTIVE:
            norms = np.linalg.norm(coords, axis=1)
            bad = np.abs(norms - 1.0) > 1e3 * TOL.unit_ray
            if bad.any():
                label = labels[int(np.argmax(bad))]
                raise InvariantError(
                    f"frame {i + 1}: ray for label {label!r} is not unit length"
                )
        observations.append(FrameObservation(projection, labels, coords, i + 1))
    return Scene(projection, body, tuple(poses), tuple(observations))


def load_scene(path) -> Scene:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    return scene_from_dict(raw)


# -- report files ---------------------------------------------------------------


def pose_to_dict(pose: PoseParams) -> dict:
    return {
        "rotation": [float(v) for v in pose.rotation.reshape(-1)],
        "translation": list(pose.translation),
    }


def body_to_dict(body: RigidBodyModel) -> dict:
    return {l: list(body.point(l)) for l in body.labels}


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(report))
        fh.write("\n")
