import numpy as np
import pytest

from reflare import (
    FlareRemover,
    Image,
    OpticalCenter,
    SearchConfig,
    SynthesisConfig,
    encoded,
    fit_flare,
    hdr_merge,
    masked_psnr,
    proposal_region,
    remove_flare,
    synthesize_triplet,
)
from reflare.scenes import make_flare_free_image, make_night_scene


def flare_triplet(seed=0, sigma=1.0, shift=(0, 0)):
    scene = make_night_scene(seed, low_shift=(-shift[0], -shift[1]))
    cfg = SynthesisConfig(resize_target=(512, 512), crop=512,
                          translate_max=0.0,
                          blur_sigma_range=(sigma, sigma),
                          noise_sigma_range=(0.0, 0.0))
    return synthesize_triplet(scene.pair, cfg, seed=seed), scene


def test_proposal_region_geometry():
    data = np.full((64, 64, 3), 0.1)
    data[10, 20] = 1.0  # saturated pixel
    img = Image(data, encoded(2.2))
    prop = proposal_region(img, OpticalCenter(31.5, 31.5), dilation=5)
    assert prop[53, 43]  # the mirror position
    assert prop[53, 48] and not prop[53, 49]  # radius-5 disk edge
    assert not prop[10, 20]  # the source itself is untouched


def test_proposal_region_empty_without_saturation():
    img = Image(np.full((32, 32, 3), 0.5), encoded(2.2))
    prop = proposal_region(img, OpticalCenter(15.5, 15.5))
    assert not prop.any()


def test_fit_recovers_known_parameters():
    t, _ = flare_triplet(seed=21, sigma=1.5, shift=(3, -6))
    params = fit_flare(t.corrupted)
    assert params.improved
    assert abs(params.blur_sigma - 1.5) <= 1e-3
    assert abs(params.offset[0] - 3.0) <= 1e-3
    assert abs(params.offset[1] + 6.0) <= 1e-3


def test_remove_flare_improves_masked_psnr():
    t, _ = flare_triplet(seed=22, sigma=2.0)
    res = remove_flare(t.corrupted)
    before = masked_psnr(t.corrupted, t.flare_free, t.mask)
    after = masked_psnr(res.flare_free_est, t.flare_free, t.mask)
    assert after - before >= 10.0


def test_removal_additivity_and_locality():
    t, _ = flare_triplet(seed=23, sigma=1.0)
    res = remove_flare(t.corrupted)
    g = t.params.gamma
    dec_in = np.power(t.corrupted.data, g)
    dec_sum = (np.power(res.flare_free_est.data, g)
               + np.power(res.flare_est.data, g))
    unclipped = np.power(res.flare_free_est.data, g) > 0
    assert np.abs((dec_in - dec_sum)[unclipped]).max() <= 1e-5
    outside = ~res.proposal
    assert np.array_equal(res.flare_free_est.data[outside],
                          t.corrupted.data[outside])


def test_null_safety_identity():
    img = make_flare_free_image(404)
    res = remove_flare(img)
    assert res.params.is_identity
    assert np.array_equal(res.flare_free_est.data, img.data)
    assert res.flare_est.data.max() == 0.0


def test_hdr_merge_inverse():
    t, _ = flare_triplet(seed=24, sigma=0.5)
    merged = hdr_merge(t.corrupted, t.flare, ev_step=12.0)
    assert merged.domain.is_linear
    g = t.params.gamma
    sat = t.corrupted.data.max(axis=2) >= 0.99
    assert sat.any()
    flare_lin = np.power(t.flare.data, g)
    back = flare_lin[::-1, ::-1]  # rotation about the raster center
    re_exposed = merged.data * 2.0 ** -12.0
    assert np.abs(re_exposed[sat] - back[sat]).max() <= 1e-5
    # unsaturated pixels carry the plain decoded input
    assert np.abs(merged.data[~sat] - np.power(t.corrupted.data, g)[~sat]).max() == 0


def test_hdr_merge_validation():
    t, _ = flare_triplet(seed=24, sigma=0.5)
    with pytest.raises(ValueError):
        hdr_merge(t.corrupted, Image(np.zeros((8, 8, 3)), encoded(2.0)))


def test_estimator_api():
    t, _ = flare_triplet(seed=25, sigma=0.0)
    est = FlareRemover()
    params = est.get_params()
    assert params["dilation"] == 25 and params["sat_threshold"] == 0.9
    est.set_params(passes=1)

    out = est.fit_transform(t.corrupted)
    res = remove_flare(t.corrupted)
    assert np.array_equal(out.data, res.flare_free_est.data)
    assert est.fitted_params_.improved
    # transform re-applies the fitted model to a same-geometry image
    again = est.transform(t.corrupted)
    assert np.abs(again.data - out.data).max() < 1e-12


def test_transform_before_fit_raises():
    with pytest.raises(RuntimeError):
        FlareRemover().transform(make_flare_free_image(1, size=64))


def test_search_config_grids():
    cfg = SearchConfig()
    assert cfg.sigma_grid()[0] == 0.0 and cfg.sigma_grid()[-1] == 4.0
    assert cfg.shift_grid()[0] == -15.0 and cfg.shift_grid()[-1] == 15.0
    assert np.all(np.diff(cfg.shift_grid()) == 3.0)
