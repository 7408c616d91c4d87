import numpy as np
import pytest

from groupaffect.nn import AugmentConfig, augment
from groupaffect.nn.augment import affine


@pytest.fixture
def image(rng):
    return rng.uniform(0, 1, size=(64, 64, 3)).astype(np.float32)


def test_identity_transform(image):
    np.testing.assert_array_equal(affine(image, 0.0, 1.0, False), image)


def test_disabled_config_is_identity(image, rng):
    cfg = AugmentConfig(rotation_deg_max=0, zoom_fraction=0, horizontal_flip=False)
    np.testing.assert_array_equal(augment(image, cfg, rng), image)


def test_flip_twice_is_identity(image):
    once = affine(image, flip=True)
    np.testing.assert_array_equal(once, image[:, ::-1])
    np.testing.assert_array_equal(affine(once, flip=True), image)


def test_fixed_seed_is_byte_identical(image):
    cfg = AugmentConfig()
    a = augment(image, cfg, np.random.default_rng(3))
    b = augment(image, cfg, np.random.default_rng(3))
    assert a.tobytes() == b.tobytes()


def test_output_range_and_shape(image, rng):
    cfg = AugmentConfig()
    for _ in range(20):
        out = augment(image, cfg, rng)
        assert out.shape == (64, 64, 3)
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_rotation_90_moves_pixels():
    img = np.zeros((5, 5, 1))
    img[0, 2, 0] = 1.0  # top middle
    out = affine(img, angle_deg=90.0)
    # a quarter turn sends the top-middle pixel to a side-middle pixel
    assert out[2, 0, 0] == pytest.approx(1.0) or out[2, 4, 0] == pytest.approx(1.0)
    assert out[0, 2, 0] == pytest.approx(0.0, abs=1e-12)


def test_zoom_in_keeps_center_and_zero_fill_on_zoom_out():
    img = np.ones((9, 9, 1))
    out = affine(img, zoom=0.5)
    assert out[4, 4, 0] == pytest.approx(1.0)
    assert out[0, 0, 0] == 0.0


@pytest.mark.parametrize("kw", [{"rotation_deg_max": 181}, {"zoom_fraction": 1.0}, {"zoom_fraction": -0.1}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        AugmentConfig(**kw)
