import math

import numpy as np
import pytest

from viloop.frames import RigidTransform


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation from a normalized 4-normal quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_transform(rng: np.random.Generator, span: float = 5.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-span, span, size=3))


def rt_as_mat4(t: RigidTransform) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = t.rotation
    m[:3, 3] = t.translation
    return m


def mat4_close(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.abs(a - b).max() <= tol)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
