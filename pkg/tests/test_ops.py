import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reflare import DomainMismatchError, Image, LINEAR, OpticalCenter, encoded, make_rng, ops
from reflare.ops import _bilinear_sample

from oracles import brute_bilinear, brute_gaussian_blur


def rand_img(seed=0, h=12, w=15, domain=LINEAR):
    rng = np.random.default_rng(seed)
    return Image(rng.random((h, w, 3)), domain)


# gamma ----------------------------------------------------------------------

@pytest.mark.parametrize("gamma", [1.8, 2.0, 2.2])
def test_gamma_round_trip(gamma):
    img = rand_img(1, domain=encoded(gamma))
    back = ops.to_encoded(ops.to_linear(img), gamma)
    assert np.abs(back.data - img.data).max() <= 1e-6
    assert back.domain == encoded(gamma)


def test_to_linear_requires_gamma():
    img = rand_img(2, domain=encoded())  # unknown gamma
    with pytest.raises(ValueError):
        ops.to_linear(img)
    ops.to_linear(img, 2.2)  # explicit override works


def test_domain_direction_guards():
    lin = rand_img(3, domain=LINEAR)
    with pytest.raises(DomainMismatchError):
        ops.to_linear(lin)
    with pytest.raises(DomainMismatchError):
        ops.to_encoded(rand_img(3, domain=encoded(2.0)), 2.0)


def test_gamma_apply_rejects_bad_exponent():
    with pytest.raises(ValueError):
        ops.gamma_apply(rand_img(4), 0.0, LINEAR)


# sampling / geometry --------------------------------------------------------

def test_bilinear_matches_brute_force():
    rng = np.random.default_rng(5)
    arr = rng.random((9, 7, 3))
    pts = rng.uniform(-2.0, 10.0, size=(40, 2))
    for border in ("zero", "clamp"):
        got = _bilinear_sample(arr, pts[:, 0], pts[:, 1], border=border)
        want = np.stack([brute_bilinear(arr, y, x, border) for y, x in pts])
        assert np.allclose(got, want, atol=1e-12)


def test_rotate180_exact_flip_at_raster_center():
    img = rand_img(6, h=8, w=10)
    out = ops.rotate180_about(img, OpticalCenter(4.5, 3.5))
    assert np.array_equal(out.data, img.data[::-1, ::-1])


def test_rotate180_is_an_involution():
    img = rand_img(7, h=9, w=9)
    c = OpticalCenter(4.0, 4.0)
    twice = ops.rotate180_about(ops.rotate180_about(img, c), c)
    assert np.abs(twice.data - img.data).max() < 1e-12


def test_rotate180_moves_delta_to_mirror():
    data = np.zeros((21, 21, 3))
    data[4, 6] = 1.0
    out = ops.rotate180_about(Image(data), OpticalCenter(10.0, 10.0))
    assert out.data[16, 14, 0] == 1.0
    assert out.data.sum() == 3.0


def test_translate_integer_shift_zero_fill():
    img = rand_img(8, h=6, w=6)
    out = ops.translate(img, 2.0, -1.0)
    assert np.array_equal(out.data[:5, 2:], img.data[1:, :4])
    assert np.all(out.data[:, :2] == 0.0)
    assert np.all(out.data[5:, :] == 0.0)


@settings(max_examples=20, deadline=None)
@given(dx=st.floats(-3, 3), dy=st.floats(-3, 3))
def test_translate_subpixel_matches_brute_force(dx, dy):
    img = rand_img(9, h=7, w=7)
    out = ops.translate(img, dx, dy)
    for y in range(7):
        for x in range(7):
            want = brute_bilinear(img.data, y - dy, x - dx, "zero")
            assert np.allclose(out.data[y, x], want, atol=1e-12)


def test_resize_identity_when_size_unchanged():
    img = rand_img(10, h=8, w=5)
    out = ops.resize_bilinear(img, 5, 8)
    assert np.abs(out.data - img.data).max() < 1e-12


def test_resize_constant_image_stays_constant():
    img = Image(np.full((16, 24, 3), 0.37))
    out = ops.resize_bilinear(img, 7, 5)
    assert np.abs(out.data - 0.37).max() < 1e-12
    assert (out.height, out.width) == (5, 7)


def test_crop_bounds():
    img = rand_img(11, h=10, w=10)
    out = ops.crop(img, 2, 3, 4, 5)
    assert np.array_equal(out.data, img.data[3:8, 2:6])
    with pytest.raises(ValueError):
        ops.crop(img, 8, 0, 4, 4)


# arithmetic -----------------------------------------------------------------

def test_add_requires_linear_domains():
    a = rand_img(12, domain=LINEAR)
    b = rand_img(13, domain=encoded(2.2))
    with pytest.raises(DomainMismatchError):
        ops.add(a, b)
    s = ops.add(a, rand_img(13, domain=LINEAR))
    assert np.array_equal(s.data, a.data + rand_img(13).data)


def test_mul_gains_and_clamp():
    img = Image(np.full((2, 2, 3), 0.8))
    out = ops.mul_gains(img, (0.5, 1.0, 2.0))
    assert np.allclose(out.data[0, 0], [0.4, 0.8, 1.6])
    assert ops.clamp01(out).data.max() == 1.0
    with pytest.raises(ValueError):
        ops.mul_gains(img, (-1.0, 0.0, 0.0))


# blur / noise ---------------------------------------------------------------

@pytest.mark.parametrize("sigma", [0.7, 1.3, 2.0])
def test_gaussian_blur_matches_dense_oracle(sigma):
    img = rand_img(14, h=14, w=11)
    got = ops.gaussian_blur(img, sigma)
    want = brute_gaussian_blur(img.data, sigma)
    assert np.abs(got.data - want).max() < 1e-10


def test_gaussian_blur_preserves_flat_field():
    img = Image(np.full((10, 10, 3), 0.25))
    out = ops.gaussian_blur(img, 2.5)
    assert np.abs(out.data - 0.25).max() < 1e-12  # replicate edges: no darkening


def test_blur_sigma_zero_is_identity():
    img = rand_img(15)
    assert ops.gaussian_blur(img, 0.0) is img


def test_noise_zero_sigma_identity_and_rng_untouched():
    img = rand_img(16)
    rng = make_rng(0)
    out = ops.add_gaussian_noise(img, 0.0, rng)
    assert out is img
    assert rng.random() == make_rng(0).random()  # no draws consumed


def test_noise_clamps_at_zero():
    img = Image(np.zeros((50, 50, 3)))
    out = ops.add_gaussian_noise(img, 0.5, make_rng(1))
    assert out.data.min() == 0.0
    assert out.data.max() > 0.0
