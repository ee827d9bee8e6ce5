import math

import numpy as np
import pytest

from recurrent_sr.degrade import (
    DCT8, DegradeConfig, dct8_forward, dct8_inverse, jpeg_surrogate, make_lr, quant_table,
)
from recurrent_sr.resample import downscale2x


def _dct_brute(block):
    out = np.zeros((8, 8))
    for u in range(8):
        for v in range(8):
            cu = math.sqrt(1 / 8) if u == 0 else math.sqrt(2 / 8)
            cv = math.sqrt(1 / 8) if v == 0 else math.sqrt(2 / 8)
            s = 0.0
            for x in range(8):
                for y in range(8):
                    s += block[x, y] * math.cos((2 * x + 1) * u * math.pi / 16) * math.cos((2 * y + 1) * v * math.pi / 16)
            out[u, v] = cu * cv * s
    return out


def test_dct_matrix_orthonormal():
    np.testing.assert_allclose(DCT8 @ DCT8.T, np.eye(8), atol=1e-12)
    np.testing.assert_allclose(DCT8[0], 1 / math.sqrt(8), atol=1e-15)


def test_dct_of_constant_block():
    coef = dct8_forward(np.full((8, 8), 0.7))
    assert abs(coef[0, 0] - 8 * 0.7) < 1e-9
    ac = coef.copy()
    ac[0, 0] = 0
    assert np.abs(ac).max() < 1e-9


def test_dct_roundtrip(rng):
    b = rng.normal(size=(8, 8))
    np.testing.assert_allclose(dct8_inverse(dct8_forward(b)), b, atol=1e-9)


def test_dct_matches_brute_force(rng):
    b = rng.uniform(-128, 127, size=(8, 8))
    np.testing.assert_allclose(dct8_forward(b), _dct_brute(b), atol=1e-9)


def test_quant_table_scaling():
    assert (quant_table(100) == 1).all()
    q50 = quant_table(50)
    assert q50[0, 0] == 16 and q50[7, 7] == 99
    # q = 10 -> scale 500: 16 * 5 = 80
    assert quant_table(10)[0, 0] == 80
    with pytest.raises(ValueError):
        quant_table(0)
    with pytest.raises(ValueError):
        quant_table(101)


def test_quality_100_is_near_lossless(natural_images):
    for img in natural_images[:5]:
        assert np.abs(jpeg_surrogate(img, 100) - img).max() <= 2 / 255


def test_constant_image_survives(rng):
    img = np.full((3, 16, 24), 0.42)
    for q in (5, 30, 90):
        np.testing.assert_allclose(jpeg_surrogate(img, q), 0.42, atol=0.5 * quant_table(q)[0, 0] / (8 * 255) + 1e-12)


def test_distortion_monotone_in_quality(natural_images):
    imgs = natural_images[:6]
    maes = [np.mean([np.abs(jpeg_surrogate(i, q) - i).mean() for i in imgs]) for q in (10, 30, 50, 70, 90)]
    assert all(a >= b for a, b in zip(maes, maes[1:])), maes
    assert maes[0] > maes[-1]


def test_distortion_ordering_agrees_with_reference_codec(natural_images):
    Image = pytest.importorskip("PIL.Image")
    import io

    from recurrent_sr.data import to_float, to_u8

    img = natural_images[0]
    ref = []
    for q in (10, 90):
        buf = io.BytesIO()
        Image.fromarray(to_u8(img)).save(buf, format="JPEG", quality=q, subsampling=0)
        dec = to_float(np.asarray(Image.open(io.BytesIO(buf.getvalue())).convert("RGB")), np.float64)
        ref.append(np.abs(dec - img).mean())
    ours = [np.abs(jpeg_surrogate(img, q) - img).mean() for q in (10, 90)]
    assert ours[0] > ours[1] and ref[0] > ref[1]


def test_non_multiple_of_8_is_padded_and_cropped(rng):
    img = rng.random((3, 13, 21))
    out = jpeg_surrogate(img, 50)
    assert out.shape == img.shape
    assert out.min() >= 0 and out.max() <= 1


def test_make_lr_shapes_and_modes(natural_images):
    hr = natural_images[0][:, :128, :128]
    lr = make_lr(hr, DegradeConfig(quality=30))
    assert lr.shape == (3, 64, 64)
    assert lr.min() >= 0 and lr.max() <= 1
    np.testing.assert_array_equal(make_lr(hr, DegradeConfig(enabled=False)), downscale2x(hr))
    assert make_lr(hr).tobytes() == make_lr(hr.copy()).tobytes()
    other = make_lr(hr, DegradeConfig(order="downscale_then_compress"))
    assert other.shape == lr.shape and not np.array_equal(other, lr)


def test_make_lr_full_size_patch(rng):
    assert make_lr(rng.random((3, 256, 256))).shape == (3, 128, 128)


def test_degrade_config_validation():
    with pytest.raises(ValueError):
        DegradeConfig(quality=0)
    with pytest.raises(ValueError):
        DegradeConfig(order="sideways")
