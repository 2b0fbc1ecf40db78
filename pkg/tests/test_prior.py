import numpy as np
import pytest

from reflare import (
    Image,
    OpticalCenter,
    PRIOR_GAMMA,
    SynthesisConfig,
    build_sample,
    compute_prior,
    encoded,
    export_samples,
    import_samples,
    synthesize_triplet,
)
from reflare.prior import SixChannelSample
from reflare.scenes import make_night_scene


def test_prior_gamma_default_is_ten():
    assert PRIOR_GAMMA == 10.0


def test_prior_suppresses_midtones_keeps_saturation():
    data = np.full((21, 21, 3), 0.5)
    data[3, 4] = 1.0
    prior = compute_prior(Image(data, encoded(2.2)), OpticalCenter(10.0, 10.0))
    # saturated pixel survives at the mirrored position...
    assert prior.data[17, 16, 0] == 1.0
    # ...while the 0.5 midtone field collapses to 0.5**10
    assert abs(prior.data[0, 0, 0] - 0.5 ** 10) < 1e-12


def test_prior_rejects_bad_exponent():
    img = Image(np.zeros((5, 5, 3)), encoded())
    with pytest.raises(ValueError):
        compute_prior(img, OpticalCenter(2.0, 2.0), gamma_p=0.0)


def triplet():
    pair = make_night_scene(1, size=96).pair
    return synthesize_triplet(pair, SynthesisConfig(resize_target=(96, 96),
                                                    crop=64), seed=3)


def test_six_channel_contract():
    t = triplet()
    s = build_sample(t)
    assert s.input.shape == (64, 64, 6)
    assert s.target.shape == (64, 64, 6)
    assert np.array_equal(s.input[:, :, :3], t.corrupted.data)
    assert np.array_equal(s.target[:, :, :3], t.flare_free.data)
    assert np.array_equal(s.target[:, :, 3:], t.flare.data)
    # prior half is the rotated saturation extraction of the input
    from reflare.image import raster_center
    prior = compute_prior(t.corrupted, raster_center(t.corrupted))
    assert np.array_equal(s.input[:, :, 3:], prior.data)


def test_six_channel_shape_validation():
    with pytest.raises(ValueError):
        SixChannelSample(np.zeros((4, 4, 6)), np.zeros((4, 5, 6)))
    with pytest.raises(ValueError):
        SixChannelSample(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)))


def test_export_import_round_trip(tmp_path):
    t = triplet()
    samples = [build_sample(t)]
    export_samples(tmp_path, samples)
    back = import_samples(tmp_path)
    assert len(back) == 1
    assert np.abs(back[0].input - samples[0].input).max() < 1e-7
    assert np.abs(back[0].target - samples[0].target).max() < 1e-7
