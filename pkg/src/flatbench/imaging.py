"""Raster types, HSV cloth segmentation, block partitioning, and coverage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

# 4-connectivity for component labeling
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class EmptyMask(ValueError):
    """Raised when an operation needs at least one true pixel."""


class BadGrid(ValueError):
    """Raised when a block layout cannot tile the image."""


@dataclass
class RgbImage:
    """Row-major 8-bit RGB raster, shape (h, w, 3)."""

    px: np.ndarray

    def __post_init__(self):
        self.px = np.ascontiguousarray(self.px, dtype=np.uint8)
        if self.px.ndim != 3 or self.px.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {self.px.shape}")
        if self.px.shape[0] < 1 or self.px.shape[1] < 1:
            raise ValueError("image must have at least one pixel")

    @property
    def width(self) -> int:
        return self.px.shape[1]

    @property
    def height(self) -> int:
        return self.px.shape[0]


@dataclass
class Mask:
    """Boolean raster aligned with an image, true where cloth."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)
        if self.bits.ndim != 2 or self.bits.shape[0] < 1 or self.bits.shape[1] < 1:
            raise ValueError(f"expected (h, w) boolean array, got shape {self.bits.shape}")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass
class HsvBounds:
    """Inclusive HSV window; hue in degrees [0, 360), may wrap around 0."""

    h_lo: float
    h_hi: float
    s_lo: float
    s_hi: float
    v_lo: float
    v_hi: float

    def __post_init__(self):
        for name in ("h_lo", "h_hi"):
            val = getattr(self, name)
            if not 0.0 <= val < 360.0:
                raise ValueError(f"{name} must be in [0, 360), got {val}")
        for name in ("s_lo", "s_hi", "v_lo", "v_hi"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {val}")
        if self.s_lo > self.s_hi or self.v_lo > self.v_hi:
            raise ValueError("saturation/value bounds must satisfy lo <= hi")

    def to_dict(self) -> dict:
        return {
            "h_lo": self.h_lo, "h_hi": self.h_hi,
            "s_lo": self.s_lo, "s_hi": self.s_hi,
            "v_lo": self.v_lo, "v_hi": self.v_hi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HsvBounds":
        return cls(**{k: float(d[k]) for k in ("h_lo", "h_hi", "s_lo", "s_hi", "v_lo", "v_hi")})


@dataclass
class BlockGrid:
    """Partition of a raster into rows x cols axis-aligned blocks.

    Blocks are stored row-major as (x0, y0, w, h).  Every block has the base
    size except the last row/column, which absorbs the remainder pixels.
    """

    width: int
    height: int
    rows: int
    cols: int
    blocks: list

    @property
    def n_blocks(self) -> int:
        return self.rows * self.cols

    def block_pixels(self, arr: np.ndarray, j: int) -> np.ndarray:
        x0, y0, w, h = self.blocks[j]
        return arr[y0:y0 + h, x0:x0 + w]

    def center(self, j: int) -> tuple:
        """Sub-pixel center of block j in image coordinates."""
        x0, y0, w, h = self.blocks[j]
        return (x0 + w / 2.0, y0 + h / 2.0)

    def neighbors8(self, j: int) -> list:
        """Indices of the up-to-8 blocks adjacent to j, row-major order."""
        r, c = divmod(j, self.cols)
        out = []
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if 0 <= nr < self.rows and 0 <= nc < self.cols:
                    out.append(nr * self.cols + nc)
        return out


def split_blocks(width: int, height: int, rows: int, cols: int) -> BlockGrid:
    """Tile a width x height raster into a rows x cols BlockGrid."""
    if not (1 <= rows <= height) or not (1 <= cols <= width):
        raise BadGrid(f"cannot split {width}x{height} into {rows}x{cols} blocks")
    base_w = width // cols
    base_h = height // rows
    blocks = []
    for r in range(rows):
        y0 = r * base_h
        h = base_h if r < rows - 1 else height - y0
        for c in range(cols):
            x0 = c * base_w
            w = base_w if c < cols - 1 else width - x0
            blocks.append((x0, y0, w, h))
    return BlockGrid(width=width, height=height, rows=rows, cols=cols, blocks=blocks)


def rgb_to_hsv(px: np.ndarray) -> tuple:
    """Hexcone RGB -> (hue degrees [0,360), saturation [0,1], value [0,1])."""
    arr = px.astype(np.float64) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    mx = arr.max(axis=-1)
    mn = arr.min(axis=-1)
    delta = mx - mn
    h = np.zeros_like(mx)
    nz = delta > 0
    rmax = nz & (mx == r)
    gmax = nz & ~rmax & (mx == g)
    bmax = nz & ~rmax & ~gmax
    h[rmax] = 60.0 * ((g[rmax] - b[rmax]) / delta[rmax])
    h[gmax] = 60.0 * ((b[gmax] - r[gmax]) / delta[gmax]) + 120.0
    h[bmax] = 60.0 * ((r[bmax] - g[bmax]) / delta[bmax]) + 240.0
    h = np.mod(h, 360.0)
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return h, s, mx


def segment_cloth(img: RgbImage, bounds: HsvBounds) -> Mask:
    """Threshold in HSV and keep the largest 4-connected component.

    An image with no in-range pixels yields an all-false mask.
    """
    h, s, v = rgb_to_hsv(img.px)
    if bounds.h_lo <= bounds.h_hi:
        h_ok = (h >= bounds.h_lo) & (h <= bounds.h_hi)
    else:
        # window wraps through 0 degrees
        h_ok = (h >= bounds.h_lo) | (h <= bounds.h_hi)
    hit = h_ok & (s >= bounds.s_lo) & (s <= bounds.s_hi) & (v >= bounds.v_lo) & (v <= bounds.v_hi)
    if not hit.any():
        return Mask(np.zeros(hit.shape, dtype=bool))
    labels, n = ndimage.label(hit, structure=_CROSS)
    if n == 1:
        return Mask(hit)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    keep = int(sizes.argmax())  # first-largest wins ties
    return Mask(labels == keep)


def center_of_mass(mask: Mask) -> tuple:
    """Mean (x, y) of true pixels; raises EmptyMask when there are none."""
    ys, xs = np.nonzero(mask.bits)
    if xs.size == 0:
        raise EmptyMask("center of mass of an empty mask")
    return (float(xs.mean()), float(ys.mean()))


def coverage(mask: Mask) -> float:
    """Fraction of pixels that are true."""
    return mask.count() / mask.bits.size


def luma(img: RgbImage) -> np.ndarray:
    """Float grayscale in [0, 255] using Rec. 601 weights."""
    px = img.px.astype(np.float64)
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]


def save_png(img: RgbImage, path) -> None:
    Image.fromarray(img.px, mode="RGB").save(path, format="PNG")


def load_png(path) -> RgbImage:
    with Image.open(path) as im:
        return RgbImage(np.asarray(im.convert("RGB")))


def encode_png(img: RgbImage) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(img.px, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> RgbImage:
    import io

    with Image.open(io.BytesIO(data)) as im:
        return RgbImage(np.asarray(im.convert("RGB")))


def save_mask_png(mask: Mask, path) -> None:
    Image.fromarray(mask.bits.astype(np.uint8) * 255, mode="L").save(path, format="PNG")


def load_mask_png(path) -> Mask:
    with Image.open(path) as im:
        return Mask(np.asarray(im.convert("L")) > 127)
