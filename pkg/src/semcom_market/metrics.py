"""Image quality and compression math for the semantic pipeline.

MSE / PSNR / SSIM quantify reconstruction fidelity; the bicubic kernel and
:func:`extract` implement the controllable extraction stage that shrinks an
image to a target compression rate by 16-tap weighted resampling.

Images are numpy arrays shaped (H, W) or (H, W, C) with values in
[0, max_value]; max_value defaults to 255 (8-bit sources).
"""

from __future__ import annotations

import math

import numpy as np


class IdenticalImagesError(ValueError):
    """PSNR is unbounded for identical images; signalled instead of a number."""


def _check_pair(x: np.ndarray, y: np.ndarray):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim not in (2, 3):
        raise ValueError("images must be (H, W) or (H, W, C)")
    return x, y


def mse(x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared pixel error, averaged over all pixels and channels."""
    x, y = _check_pair(x, y)
    return float(np.mean((x - y) ** 2))


def psnr(x: np.ndarray, y: np.ndarray, max_value: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB: 10*log10(MAX^2 / MSE)."""
    err = mse(x, y)
    if err == 0.0:
        raise IdenticalImagesError("MSE is zero: images are identical, PSNR undefined")
    return 10.0 * math.log10(max_value ** 2 / err)


def _ssim_formula(x: np.ndarray, y: np.ndarray, c1: float, c2: float) -> float:
    mu_x = x.mean()
    mu_y = y.mean()
    var_x = ((x - mu_x) ** 2).mean()
    var_y = ((y - mu_y) ** 2).mean()
    cov = ((x - mu_x) * (y - mu_y)).mean()
    return float(
        (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
    )


def ssim(
    x: np.ndarray,
    y: np.ndarray,
    max_value: float = 255.0,
    windowed: bool = False,
    window: int = 8,
) -> float:
    """Structural similarity between two images.

    Default evaluates the SSIM formula once over whole-image statistics
    (population moments); windowed mode averages it over all sliding
    window x window patches instead.  Stabilizers follow the usual choice
    C1 = (0.01 MAX)^2, C2 = (0.03 MAX)^2.
    """
    x, y = _check_pair(x, y)
    c1 = (0.01 * max_value) ** 2
    c2 = (0.03 * max_value) ** 2
    if not windowed:
        return _ssim_formula(x, y, c1, c2)
    if x.ndim == 2:
        x = x[:, :, None]
        y = y[:, :, None]
    h, w, ch = x.shape
    if h < window or w < window:
        raise ValueError("image smaller than the SSIM window")
    vals = []
    for c in range(ch):
        xs = np.lib.stride_tricks.sliding_window_view(x[:, :, c], (window, window))
        ys = np.lib.stride_tricks.sliding_window_view(y[:, :, c], (window, window))
        for i in range(xs.shape[0]):
            for j in range(xs.shape[1]):
                vals.append(_ssim_formula(xs[i, j], ys[i, j], c1, c2))
    return float(np.mean(vals))


def bicubic_kernel(s):
    """Keys bicubic convolution weight at (signed) distance s; zero beyond |s| >= 2."""
    s = np.abs(np.asarray(s, dtype=float))
    near = (1.5 * s - 2.5) * s * s + 1.0
    far = ((-0.5 * s + 2.5) * s - 4.0) * s + 2.0
    out = np.where(s < 1.0, near, np.where(s < 2.0, far, 0.0))
    return float(out) if out.ndim == 0 else out


def _resample_axis(img: np.ndarray, n_out: int) -> np.ndarray:
    """Bicubic resample along axis 0 with clamp-to-edge indexing."""
    n_in = img.shape[0]
    scale = n_out / n_in
    pos = (np.arange(n_out) + 0.5) / scale - 0.5  # centre-aligned source coordinates
    base = np.floor(pos).astype(int)
    t = pos - base
    out = np.zeros((n_out,) + img.shape[1:], dtype=float)
    for m in (-1, 0, 1, 2):
        w = bicubic_kernel(t - m)
        idx = np.clip(base + m, 0, n_in - 1)
        out += w.reshape((-1,) + (1,) * (img.ndim - 1)) * img[idx]
    return out


def extract(image: np.ndarray, rate: float, max_value: float = 255.0) -> np.ndarray:
    """Shrink an image to roughly rate * (H*W) pixels by bicubic resampling.

    Each axis is scaled by sqrt(rate) so the output pixel count matches the
    target compression rate; every output pixel is the 4x4 kernel-weighted
    average of its source neighbourhood (clamp-to-edge at borders), clipped
    back into [0, max_value].
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError("compression rate must be in (0, 1]")
    image = np.asarray(image, dtype=float)
    if image.ndim not in (2, 3):
        raise ValueError("image must be (H, W) or (H, W, C)")
    h, w = image.shape[:2]
    axis_scale = math.sqrt(rate)
    out_h = round(h * axis_scale)
    out_w = round(w * axis_scale)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"rate {rate} shrinks a {h}x{w} image below one pixel")
    out = _resample_axis(image, out_h)
    out = _resample_axis(out.swapaxes(0, 1), out_w).swapaxes(0, 1)
    return np.clip(out, 0.0, max_value)


def compression_rate_of(payload_bits: float, source_bits: float) -> float:
    """Transmitted bit length over source bit length."""
    if source_bits <= 0:
        raise ValueError("source_bits must be positive")
    return payload_bits / source_bits
