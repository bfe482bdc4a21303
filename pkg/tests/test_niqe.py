import numpy as np
import pytest
from skimage import data
from skimage.color import rgb2gray

from stvqa.errors import ConfigurationError
from stvqa.niqe import (
    N_PATCH_FEATURES,
    NiqeModel,
    effective_patch_size,
    fit_model,
    frame_niqe,
    niqe_distance,
    patch_features,
)


@pytest.fixture(scope="module")
def model():
    return NiqeModel.load()


def _gray(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = rgb2gray(img[..., :3] / 255.0)
    elif img.max() > 1:
        img = img / 255.0
    return img


def test_distance_zero_for_identical_statistics(rng):
    a = rng.standard_normal((50, 4))
    cov = np.cov(a, rowvar=False)
    assert niqe_distance(a.mean(0), cov, a.mean(0), cov) == 0.0


def test_distance_one_dimensional():
    # (0 - 2)^2 / ((1 + 1) / 2) = 4 -> 2
    assert niqe_distance([0.0], [[1.0]], [2.0], [[1.0]]) == pytest.approx(2.0)


def test_distance_matches_mahalanobis(rng):
    A = rng.standard_normal((3, 3))
    c1, c2 = A @ A.T + np.eye(3), np.diag([1.0, 2.0, 3.0])
    d = rng.standard_normal(3)
    want = np.sqrt(d @ np.linalg.inv((c1 + c2) / 2) @ d)
    assert niqe_distance(d, c1, np.zeros(3), c2) == pytest.approx(want, rel=1e-12)


def test_distance_singular_uses_pinv():
    warns = []
    cov = np.diag([1.0, 0.0])
    got = niqe_distance([1.0, 5.0], cov, [0.0, 0.0], cov, warns)
    assert got == pytest.approx(1.0)
    assert warns and "pseudo-inverse" in warns[0]


def test_bundled_model_shape_and_symmetry(model):
    assert model.mean_vector.shape == (N_PATCH_FEATURES,)
    assert np.array_equal(model.covariance, model.covariance.T)
    assert model.patch_size == 96 and model.sharpness_fraction == 0.75


def test_model_round_trip_and_errors(tmp_path, model):
    p = tmp_path / "m.json"
    model.save(p)
    back = NiqeModel.load(p)
    assert np.array_equal(back.mean_vector, model.mean_vector)
    assert np.array_equal(back.covariance, model.covariance)
    with pytest.raises(ConfigurationError):
        NiqeModel.load(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigurationError):
        NiqeModel.load(tmp_path / "bad.json")
    with pytest.raises(ConfigurationError):
        NiqeModel(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_patch_features_shape_and_selection(rng):
    img = rng.random((200, 300))
    img[:, :100] = 0.5  # flat patches are never the sharpest
    all_rows = patch_features(img, select=False)
    sharp = patch_features(img)
    assert all_rows.shape == (2 * 3, 36)
    assert 1 <= len(sharp) <= 4
    assert effective_patch_size((40, 70), 96) == 40
    assert effective_patch_size((41, 70), 96) == 40


def test_held_out_natural_images_score_below_noise(model, rng):
    natural = [_gray(data.immunohistochemistry()), _gray(data.hubble_deep_field()), _gray(data.text())]
    nat = [frame_niqe(im, model)[-1] for im in natural]
    noise = [frame_niqe(rng.random(im.shape), model)[-1] for im in natural]
    assert max(nat) < min(noise)


def test_refit_reproduces_model(model):
    imgs = [_gray(data.camera()), _gray(data.astronaut())]
    a, b = fit_model(imgs), fit_model(imgs)
    assert np.array_equal(a.mean_vector, b.mean_vector)
    # a model fitted on an image scores that image closer than white noise
    assert frame_niqe(imgs[0], a)[-1] < frame_niqe(np.random.default_rng(0).random(imgs[0].shape), a)[-1]
