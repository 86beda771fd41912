import numpy as np
import pytest

from labelsplat import Camera, GaussianScene


def make_camera(width=64, height=64, fx=80.0, fy=80.0, cam_id="cam",
                rotation=None, translation=None):
    return Camera(
        id=cam_id, width=width, height=height, fx=fx, fy=fy,
        cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        rotation=np.eye(3) if rotation is None else rotation,
        translation=np.zeros(3) if translation is None else translation,
    )


def random_rotation(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_scene(rng, n, width=64, height=64, fx=80.0, labels_upto=5,
                 behind_fraction=0.1, bg=None):
    """Random scene in front of an identity-pose camera, with a sprinkle of
    off-frustum and behind-camera Gaussians to exercise culling."""
    z = rng.uniform(1.5, 6.0, size=n)
    behind = rng.random(n) < behind_fraction
    z[behind] = rng.uniform(-2.0, 0.005, size=int(behind.sum()))
    half_w = width / (2.0 * fx)
    xy = rng.uniform(-1.3, 1.3, size=(n, 2)) * half_w * np.abs(z)[:, None] * 2.5
    means = np.column_stack([xy, z])
    quats = rng.normal(size=(n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    return GaussianScene(
        means=means,
        log_scales=np.log(rng.uniform(0.03, 0.5, size=(n, 3))),
        rotations=quats,
        opacity_logits=rng.uniform(-3.0, 3.0, size=n),
        colors=rng.uniform(0.0, 1.0, size=(n, 3)),
        labels=rng.integers(0, labels_upto + 1, size=n),
        background_color=rng.uniform(0, 1, size=3) if bg is None else np.asarray(bg),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(7)
