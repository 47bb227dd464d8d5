"""Oriented Gabor filtering: kernels, the orientation bank, per-block wrinkle scores."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .imaging import BlockGrid, Mask, RgbImage, luma

DEFAULT_N_ORIENT = 8
DEFAULT_WAVELENGTH = 16.0
DEFAULT_SIGMA = 0.56 * DEFAULT_WAVELENGTH
DEFAULT_GAMMA = 0.5
DEFAULT_MIN_CLOTH_FRACTION = 0.25


class BadParams(ValueError):
    """Raised for filter parameters outside their valid ranges."""


class RasterTooSmall(ValueError):
    """Raised when the input raster is smaller than the kernel."""


def kernel_size_for(sigma: float) -> int:
    """Smallest odd side length covering +/- 2 sigma."""
    side = int(math.ceil(4.0 * sigma))
    return side if side % 2 == 1 else side + 1


@dataclass
class GaborParams:
    """Parameters of one complex Gabor filter.

    wavelength and sigma are in pixels, theta and phi in radians.  theta is
    the axis of the sinusoidal carrier; gamma squashes the envelope along the
    perpendicular axis.
    """

    wavelength: float
    phi: float
    sigma: float
    gamma: float
    theta: float
    ksize: int

    def __post_init__(self):
        if self.wavelength <= 0:
            raise BadParams(f"wavelength must be positive, got {self.wavelength}")
        if self.sigma <= 0:
            raise BadParams(f"sigma must be positive, got {self.sigma}")
        if self.gamma <= 0:
            raise BadParams(f"gamma must be positive, got {self.gamma}")
        if self.ksize < 3 or self.ksize % 2 == 0:
            raise BadParams(f"ksize must be an odd integer >= 3, got {self.ksize}")


@dataclass
class Kernel:
    """Sampled even (cosine) and odd (sine) taps of one Gabor filter."""

    params: GaborParams
    even: np.ndarray
    odd: np.ndarray

    @property
    def side(self) -> int:
        return self.params.ksize


def gabor_kernel(params: GaborParams, dc_correct: bool = True) -> Kernel:
    """Sample the complex Gabor filter on an ksize x ksize tap grid.

    At tap offset (x, y) from the center, with x' = x cos(theta) + y sin(theta)
    and y' = -x sin(theta) + y cos(theta):

        envelope = exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2))
        even     = envelope * cos(2 pi x' / wavelength + phi)
        odd      = envelope * sin(2 pi x' / wavelength + phi)

    With dc_correct the even taps are shifted to zero mean so a constant
    raster produces no response.
    """
    c = params.ksize // 2
    offs = np.arange(params.ksize, dtype=np.float64) - c
    x = offs[np.newaxis, :]  # column offset
    y = offs[:, np.newaxis]  # row offset
    ct, st = math.cos(params.theta), math.sin(params.theta)
    xp = x * ct + y * st
    yp = -x * st + y * ct
    env = np.exp(-(xp * xp + params.gamma ** 2 * yp * yp) / (2.0 * params.sigma ** 2))
    arg = 2.0 * math.pi * xp / params.wavelength + params.phi
    even = env * np.cos(arg)
    odd = env * np.sin(arg)
    if dc_correct:
        even = even - even.mean()
    return Kernel(params=params, even=even, odd=odd)


@dataclass
class FilterBank:
    """Evenly spaced orientation bank.

    orientations[i] = i * pi / n_orient is the stripe direction kernel i
    responds to most strongly; each kernel's carrier axis is built
    perpendicular to its label so that a grating with stripes along
    orientations[i] maximizes response i.
    """

    n_orient: int
    orientations: np.ndarray
    kernels: list

    @property
    def ksize(self) -> int:
        return self.kernels[0].side


def build_bank(
    n_orient: int = DEFAULT_N_ORIENT,
    wavelength: float = DEFAULT_WAVELENGTH,
    sigma: float = DEFAULT_SIGMA,
    gamma: float = DEFAULT_GAMMA,
    ksize: int | None = None,
    phi: float = 0.0,
) -> FilterBank:
    if n_orient < 1:
        raise BadParams(f"need at least one orientation, got {n_orient}")
    if ksize is None:
        ksize = kernel_size_for(sigma)
    orientations = np.array([i * math.pi / n_orient for i in range(n_orient)])
    kernels = []
    for ori in orientations:
        carrier = (ori + math.pi / 2.0) % math.pi
        p = GaborParams(wavelength=wavelength, phi=phi, sigma=sigma,
                        gamma=gamma, theta=carrier, ksize=ksize)
        kernels.append(gabor_kernel(p))
    return FilterBank(n_orient=n_orient, orientations=orientations, kernels=kernels)


def _corr_taps(kernel: Kernel) -> np.ndarray:
    # correlation with taps t == convolution with t flipped on both axes
    return np.flip(kernel.even + 1j * kernel.odd, (0, 1))


def _energy_batch(rasters: np.ndarray, kernels: list) -> np.ndarray:
    """Quadrature energy of each raster under each kernel, shape (n_k, B, h, w).

    Inputs are edge-padded by the kernel radius and convolved circularly at
    the next fast FFT size >= h + 2r; with that much padding the wraparound
    never reaches the central h x w crop, so the result equals direct
    windowed correlation with edge-replicated borders.
    """
    b, h, w = rasters.shape
    side = kernels[0].side
    r = side // 2
    nh = sfft.next_fast_len(h + 2 * r)
    nw = sfft.next_fast_len(w + 2 * r)
    padded = np.pad(rasters, ((0, 0), (r, nh - h - r), (r, nw - w - r)), mode="edge")
    spec = sfft.fft2(padded)
    out = np.empty((len(kernels), b, h, w), dtype=np.float64)
    for i, k in enumerate(kernels):
        kf = sfft.fft2(_corr_taps(k), s=(nh, nw))
        conv = sfft.ifft2(spec * kf)
        out[i] = np.abs(conv[:, 2 * r:2 * r + h, 2 * r:2 * r + w])
    return out


def convolve(gray: np.ndarray, kernel: Kernel) -> np.ndarray:
    """Per-pixel quadrature energy of a float raster under one kernel.

    Borders are handled by edge replication; output matches the input shape.
    """
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ValueError(f"expected a 2-D raster, got shape {gray.shape}")
    if gray.shape[0] < kernel.side or gray.shape[1] < kernel.side:
        raise RasterTooSmall(
            f"raster {gray.shape} smaller than kernel side {kernel.side}")
    return _energy_batch(gray[np.newaxis], [kernel])[0, 0]


def block_response(block: np.ndarray, bank: FilterBank) -> tuple:
    """Summed energies of one block under every bank kernel.

    Returns (per_orientation, magnitude, theta_star) where magnitude is the
    best summed energy and theta_star the matching stripe direction.  Ties go
    to the lowest orientation index.
    """
    block = np.asarray(block, dtype=np.float64)
    if block.shape[0] < bank.ksize or block.shape[1] < bank.ksize:
        raise RasterTooSmall(
            f"block {block.shape} smaller than kernel side {bank.ksize}")
    energies = _energy_batch(block[np.newaxis], bank.kernels)
    per = energies[:, 0].sum(axis=(1, 2))
    best = int(per.argmax())
    return per, float(per[best]), float(bank.orientations[best])


@dataclass
class WrinkleField:
    """Per-block wrinkle scores over a BlockGrid.

    magnitudes[j] is the best summed Gabor energy of block j, orientations[j]
    the stripe direction achieving it, per_orientation the full (n_orient,
    n_blocks) response table.  Blocks whose cloth fraction fell below
    min_cloth_fraction carry zero magnitude.
    """

    grid: BlockGrid
    magnitudes: np.ndarray
    orientations: np.ndarray
    per_orientation: np.ndarray
    cloth_fraction: np.ndarray
    min_cloth_fraction: float

    def to_dict(self) -> dict:
        return {
            "rows": self.grid.rows,
            "cols": self.grid.cols,
            "magnitudes": [float(v) for v in self.magnitudes],
            "orientations": [float(v) for v in self.orientations],
            "cloth_fraction": [float(v) for v in self.cloth_fraction],
        }


def wrinkle_field(
    img: RgbImage,
    mask: Mask,
    grid: BlockGrid,
    bank: FilterBank,
    min_cloth_fraction: float = DEFAULT_MIN_CLOTH_FRACTION,
) -> WrinkleField:
    """Score every block of the image for wrinkle strength and direction.

    The grayscale is zeroed outside the mask and shifted to zero mean over
    the cloth, so block scores reflect shading variation inside the cloth
    rather than the cloth/background brightness step.  Blocks with less cloth
    than min_cloth_fraction are excluded (zero magnitude, orientation 0).
    """
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError("image and mask dimensions differ")
    if grid.width != img.width or grid.height != img.height:
        raise BadParams("grid does not tile this image")
    gray = luma(img)
    bits = mask.bits
    n_cloth = int(bits.sum())
    if n_cloth > 0:
        gray = np.where(bits, gray - gray[bits].mean(), 0.0)
    else:
        gray = np.zeros_like(gray)

    n_b = grid.n_blocks
    fractions = np.empty(n_b)
    for j in range(n_b):
        fractions[j] = grid.block_pixels(bits, j).mean()

    per = np.zeros((bank.n_orient, n_b))
    eligible = [j for j in range(n_b) if fractions[j] >= min_cloth_fraction]
    # batch same-shaped blocks through one FFT pass each
    by_shape: dict = {}
    for j in eligible:
        _, _, w, h = grid.blocks[j]
        by_shape.setdefault((h, w), []).append(j)
    for (h, w), js in by_shape.items():
        if h < bank.ksize or w < bank.ksize:
            raise RasterTooSmall(
                f"block {h}x{w} smaller than kernel side {bank.ksize}")
        stack = np.stack([grid.block_pixels(gray, j) for j in js])
        energies = _energy_batch(stack, bank.kernels)
        sums = energies.sum(axis=(2, 3))
        for col, j in enumerate(js):
            per[:, j] = sums[:, col]

    best = per.argmax(axis=0)
    magnitudes = per[best, np.arange(n_b)]
    orientations = np.asarray(bank.orientations)[best]
    return WrinkleField(
        grid=grid,
        magnitudes=magnitudes,
        orientations=orientations,
        per_orientation=per,
        cloth_fraction=fractions,
        min_cloth_fraction=min_cloth_fraction,
    )


def heatmap_image(field: WrinkleField) -> RgbImage:
    """Render block magnitudes as a flat-filled color map, dark blue to warm yellow."""
    lo = np.array([18.0, 26.0, 72.0])
    hi = np.array([250.0, 222.0, 64.0])
    top = float(field.magnitudes.max())
    px = np.zeros((field.grid.height, field.grid.width, 3), dtype=np.uint8)
    for j, (x0, y0, w, h) in enumerate(field.grid.blocks):
        t = field.magnitudes[j] / top if top > 0 else 0.0
        color = np.round(lo + (hi - lo) * t).astype(np.uint8)
        px[y0:y0 + h, x0:x0 + w] = color
    return RgbImage(px)
