import csv

import numpy as np
import pytest

from stvqa.config import PipelineConfig
from stvqa.errors import ParameterError
from stvqa.motionval import (
    UNIFORM_MAAD,
    SyntheticSpec,
    angular_deviation,
    beats_uniform,
    evaluate_orientation,
    make_texture,
    make_video,
    validate,
)


def test_spec_validation():
    for bad in (dict(theta=np.pi), dict(theta=-0.1), dict(theta=0, speed=-1), dict(theta=0, texture="plaid"),
                dict(theta=0, size=(32, 128))):
        with pytest.raises(ParameterError):
            SyntheticSpec(**bad)
    with pytest.raises(ParameterError):
        make_video(SyntheticSpec(0.0, frames=9))


def test_static_video_frames_identical():
    v = make_video(SyntheticSpec(0.3, speed=0.0))
    assert all(np.array_equal(v[0], f) for f in v[1:])


@pytest.mark.parametrize("theta,shift", [(0.0, (0, 1)), (np.pi / 2, (1, 0))])
def test_integer_motion_is_exact_roll(theta, shift):
    v = make_video(SyntheticSpec(theta, speed=1.0))
    for t in range(1, 10):
        assert np.array_equal(v[t], np.roll(v[0], (t * shift[0], t * shift[1]), axis=(0, 1)))


def test_fractional_motion_composes():
    v = make_video(SyntheticSpec(0.0, speed=0.5))
    assert np.allclose(v[2], np.roll(v[0], 1, axis=1), atol=1e-10)


def test_texture_statistics_and_spectrum():
    spec = SyntheticSpec(0.0, sigma_s=2.0, size=(256, 256), contrast=0.1)
    tex = make_texture(spec)
    assert tex.mean() == pytest.approx(0.5) and tex.std() == pytest.approx(0.1)
    # dividing out the Gaussian transfer function leaves a flat (white) spectrum
    f = np.fft.fftfreq(256) * 2 * np.pi
    w2 = f[:, None] ** 2 + f[None, :] ** 2
    power = np.abs(np.fft.fft2(tex - 0.5)) ** 2 / np.exp(-(spec.sigma_s**2) * w2)
    low = power[(w2 > 0) & (w2 < 0.1)].mean()
    mid = power[(w2 > 0.25) & (w2 < 0.5)].mean()
    assert mid / low == pytest.approx(1.0, rel=0.2)
    white = make_texture(SyntheticSpec(0.0, texture="white-noise"))
    assert abs(np.corrcoef(white[:, :-1].ravel(), white[:, 1:].ravel())[0, 1]) < 0.03


def test_angular_deviation():
    assert angular_deviation(0.0, np.pi - 0.1) == pytest.approx(0.1)
    assert angular_deviation(np.pi / 2, 0.0) == pytest.approx(np.pi / 2)
    assert angular_deviation(0.2 + np.pi, 0.2) == pytest.approx(0.0)


def test_static_video_not_applicable():
    r = validate(SyntheticSpec(0.5, speed=0.0))
    assert not r.applicable and r.maad is None and "static" in r.flags[0]


def test_report_consistency(tmp_path):
    cfg = PipelineConfig(D=2)
    r = validate(SyntheticSpec(np.pi / 3, size=(64, 64)), cfg)
    assert sum(r.histogram) == r.n_windows
    assert 0.0 <= r.maad <= np.pi / 2
    assert r.offsets == pytest.approx([k * np.pi / 6 for k in range(6)])
    assert sum(r.offset_counts) > 0
    r.write_csv(tmp_path / "k.csv")
    with open(tmp_path / "k.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["angular_offset", "mean_kurtosis"] and len(rows) == 7
    r.write_json(tmp_path / "k.json")


def test_theta_pi_periodicity():
    v = make_video(SyntheticSpec(np.pi / 6, size=(64, 64)))
    cfg = PipelineConfig(D=2)
    a = evaluate_orientation(v, np.pi / 6, cfg)
    b = evaluate_orientation(v, np.pi / 6 + np.pi, cfg)
    assert a.maad == pytest.approx(b.maad, abs=1e-12)
    assert a.kurtosis_by_offset == pytest.approx(b.kurtosis_by_offset)


def test_beats_uniform():
    ok, p = beats_uniform([0.3, 0.35, 0.4, 0.32])
    assert ok and p < 0.05
    ok, _ = beats_uniform([UNIFORM_MAAD + 0.05, UNIFORM_MAAD + 0.1, UNIFORM_MAAD])
    assert not ok
