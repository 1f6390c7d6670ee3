import numpy as np
import pytest

from semcom_market.metrics import (
    IdenticalImagesError,
    bicubic_kernel,
    compression_rate_of,
    extract,
    mse,
    psnr,
    ssim,
)
from semcom_market.pnm import PnmError, read_pnm, write_pnm


def ramp(h=8, w=8):
    return (np.arange(h * w).reshape(h, w) * (255.0 / (h * w - 1)))


class TestMse:
    def test_identical_is_zero(self):
        x = ramp()
        assert mse(x, x) == 0.0

    def test_unit_offset(self):
        x = ramp() / 2
        assert mse(x, x + 1.0) == 1.0

    def test_2x2_fixture(self):
        # diffs 2, -2, 3, 4 -> squares 4, 4, 9, 16 -> mean 33/4
        x = np.array([[10.0, 20.0], [30.0, 40.0]])
        y = np.array([[12.0, 18.0], [33.0, 44.0]])
        assert mse(x, y) == pytest.approx(8.25, rel=1e-15)

    def test_channels_averaged(self):
        x = np.zeros((4, 4, 3))
        y = np.zeros((4, 4, 3))
        y[:, :, 0] = 3.0  # squared error 9 on one of three channels
        assert mse(x, y) == pytest.approx(3.0, rel=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros((2, 2)), np.zeros((3, 3)))


class TestPsnr:
    def test_max_error_is_zero_db(self):
        x = np.zeros((4, 4))
        y = np.full((4, 4), 255.0)
        assert psnr(x, y) == pytest.approx(0.0, abs=1e-12)

    def test_unit_offset_reference(self):
        # MSE 1 at MAX 255: 10*log10(65025), pinned by hand evaluation
        x = ramp() / 2
        assert psnr(x, x + 1.0) == pytest.approx(48.13080360867910, abs=1e-9)

    def test_identical_images_signal(self):
        x = ramp()
        with pytest.raises(IdenticalImagesError):
            psnr(x, x)

    def test_strictly_decreasing_in_mse(self, rng):
        x = ramp()
        noised = [x + rng.normal(0, sigma, x.shape) for sigma in (1.0, 4.0, 16.0)]
        values = [psnr(x, y) for y in noised]
        errors = [mse(x, y) for y in noised]
        assert errors == sorted(errors)
        assert values == sorted(values, reverse=True)


class TestSsim:
    def test_self_similarity_is_one(self):
        x = ramp()
        assert ssim(x, x) == 1.0

    def test_inverted_image_scores_low(self):
        x = ramp()
        inverted = 255.0 - x
        assert ssim(x, inverted) < 0.5

    def test_symmetry(self, rng):
        for _ in range(20):
            x = rng.uniform(0, 255, (6, 6))
            y = rng.uniform(0, 255, (6, 6))
            assert ssim(x, y) == pytest.approx(ssim(y, x), rel=1e-12)

    def test_bounded(self, rng):
        for _ in range(50):
            x = rng.uniform(0, 255, (5, 5))
            y = rng.uniform(0, 255, (5, 5))
            assert -1.0 <= ssim(x, y) <= 1.0

    def test_windowed_mode(self, rng):
        x = rng.uniform(0, 255, (12, 12))
        assert ssim(x, x, windowed=True) == pytest.approx(1.0, rel=1e-12)
        y = x + rng.normal(0, 20, x.shape)
        w = ssim(x, y, windowed=True)
        assert -1.0 <= w <= 1.0

    def test_window_larger_than_image(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((4, 4)), np.zeros((4, 4)), windowed=True)


class TestBicubicKernel:
    def test_anchor_values(self):
        assert bicubic_kernel(0.0) == 1.0
        assert bicubic_kernel(1.0) == 0.0
        assert bicubic_kernel(2.0) == 0.0
        assert bicubic_kernel(2.5) == 0.0
        assert bicubic_kernel(0.5) == pytest.approx(0.5625, rel=1e-15)

    def test_both_pieces_agree_at_one(self):
        # 1.5 - 2.5 + 1 and -0.5 + 2.5 - 4 + 2 are both zero
        inner = 1.5 * 1.0 - 2.5 * 1.0 + 1.0
        outer = -0.5 * 1.0 + 2.5 * 1.0 - 4.0 * 1.0 + 2.0
        assert inner == outer == bicubic_kernel(1.0)

    def test_even_symmetry(self, rng):
        s = rng.uniform(-2.5, 2.5, 100)
        assert np.allclose(bicubic_kernel(s), bicubic_kernel(-s))

    def test_partition_of_unity(self, rng):
        phases = rng.uniform(0.0, 1.0, 10_000)
        total = sum(bicubic_kernel(phases - k) for k in (-1, 0, 1, 2))
        assert np.max(np.abs(total - 1.0)) <= 1e-12


def reference_extract(image, rate):
    """Direct 16-tap summation oracle, independent of the library path."""
    h, w = image.shape
    out_h = round(h * rate ** 0.5)
    out_w = round(w * rate ** 0.5)
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        y = (i + 0.5) * h / out_h - 0.5
        y0 = int(np.floor(y))
        for j in range(out_w):
            x = (j + 0.5) * w / out_w - 0.5
            x0 = int(np.floor(x))
            acc = 0.0
            for m in (-1, 0, 1, 2):
                for n in (-1, 0, 1, 2):
                    wy = bicubic_kernel(y - (y0 + m))
                    wx = bicubic_kernel(x - (x0 + n))
                    src = image[min(max(y0 + m, 0), h - 1), min(max(x0 + n, 0), w - 1)]
                    acc += wy * wx * src
            out[i, j] = min(max(acc, 0.0), 255.0)
    return out


class TestExtract:
    def test_identity_at_rate_one(self):
        x = ramp()
        assert np.array_equal(extract(x, 1.0), x)

    def test_constant_image_preserved(self):
        x = np.full((9, 7), 123.0)
        for rate in (0.25, 0.5, 0.81):
            out = extract(x, rate)
            assert np.allclose(out, 123.0, atol=1e-9)

    def test_output_dimensions(self):
        out = extract(np.zeros((8, 8)), 0.25)
        assert out.shape == (4, 4)
        out = extract(np.zeros((10, 6)), 0.5)
        assert out.shape == (round(10 * 0.5 ** 0.5), round(6 * 0.5 ** 0.5))

    def test_ramp_matches_direct_convolution(self):
        x = ramp()
        got = extract(x, 0.25)
        want = reference_extract(x, 0.25)
        assert np.max(np.abs(got - want)) <= 1e-9

    def test_random_matches_direct_convolution(self, rng):
        x = rng.uniform(0, 255, (11, 13))
        for rate in (0.2, 0.49, 0.9):
            assert np.max(np.abs(extract(x, rate) - reference_extract(x, rate))) <= 1e-9

    def test_clamped_to_range(self, rng):
        # high-contrast content can overshoot with bicubic; output must stay in range
        x = rng.choice([0.0, 255.0], size=(16, 16))
        out = extract(x, 0.25)
        assert out.min() >= 0.0 and out.max() <= 255.0

    def test_rate_too_small(self):
        with pytest.raises(ValueError):
            extract(np.zeros((2, 2)), 0.01)

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            extract(np.zeros((4, 4)), 1.5)

    def test_color_image(self):
        x = np.stack([ramp(), ramp() / 2, ramp() / 4], axis=2)
        out = extract(x, 0.25)
        assert out.shape == (4, 4, 3)


class TestCompressionRate:
    def test_trivials(self):
        assert compression_rate_of(100.0, 100.0) == 1.0
        assert compression_rate_of(50.0, 100.0) == 0.5
        assert compression_rate_of(0.3 * 8e7, 8e7) == pytest.approx(0.3, rel=1e-15)

    def test_zero_source(self):
        with pytest.raises(ValueError):
            compression_rate_of(1.0, 0.0)


class TestPnm:
    @pytest.mark.parametrize("ascii_format", [False, True])
    def test_gray_round_trip(self, tmp_path, ascii_format):
        img = ramp().astype(np.uint8)
        path = tmp_path / "img.pgm"
        write_pnm(path, img, ascii_format=ascii_format)
        loaded, maxval = read_pnm(path)
        assert maxval == 255
        assert np.array_equal(loaded, img)

    @pytest.mark.parametrize("ascii_format", [False, True])
    def test_color_round_trip(self, tmp_path, ascii_format, rng):
        img = rng.integers(0, 256, (5, 7, 3)).astype(np.uint8)
        path = tmp_path / "img.ppm"
        write_pnm(path, img, ascii_format=ascii_format)
        loaded, maxval = read_pnm(path)
        assert np.array_equal(loaded, img)

    def test_comments_in_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P2\n# a comment\n2 2\n255\n0 10\n20 30\n")
        img, maxval = read_pnm(path)
        assert np.array_equal(img, [[0, 10], [20, 30]])

    def test_canonical_writer_is_stable(self, tmp_path):
        img = ramp().astype(np.uint8)
        a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
        write_pnm(a, img)
        write_pnm(b, img)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P7\n2 2\n255\n")
        with pytest.raises(PnmError):
            read_pnm(path)

    def test_truncated_raster(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n\x00\x01")
        with pytest.raises(PnmError):
            read_pnm(path)

    def test_maxval_out_of_range(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P2\n1 1\n65535\n0\n")
        with pytest.raises(PnmError):
            read_pnm(path)
