import numpy as np
import pytest

from rigidrecover.geometry import PoseParams, RigidBodyModel


def rotation_from_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return rotation_from_quat(rng.standard_normal(4))


def angle_between(u, v) -> float:
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    c = (u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def gt_theta1(body: RigidBodyModel, poses) -> float:
    """Angle at the second anchor between the anchor edge and focal point 1."""
    labels = sorted(body.labels)
    a, b = body.point(labels[0]), body.point(labels[1])
    return angle_between(a - b, poses[0].translation - b)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
