"""RGB images on [0, 1], coordinate grids on [-1, 1], and PSNR.

Grid convention (shared by encoder and decoder): pixel column ``i`` of an
image ``n`` pixels wide sits at ``x = 2 i / (n - 1) - 1`` so both edges are
included; a dimension of one pixel maps to 0. Rows follow the same rule.
Coordinates are listed row-major, matching the pixel layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .siren import ContractError


class ImageError(OSError):
    """Unreadable, unsupported or degenerate image file."""


@dataclass
class ImagePlane:
    """An RGB image stored as a float array of shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ContractError(f"pixels must have shape (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ContractError("image has a zero dimension")
        if not (np.all(px >= 0.0) and np.all(px <= 1.0)):
            raise ContractError("pixel values must lie in [0, 1]")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    def flat(self) -> np.ndarray:
        """Pixels as an (H*W, 3) array in grid order."""
        return self.pixels.reshape(-1, 3)

    def crop(self, region: "Region") -> "ImagePlane":
        x, y, w, h = region
        return ImagePlane(self.pixels[y:y + h, x:x + w])

    @classmethod
    def from_uint8(cls, arr) -> "ImagePlane":
        return cls(np.asarray(arr, dtype=np.float64) / 255.0)

    def to_uint8(self) -> np.ndarray:
        return np.rint(np.clip(self.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


Region = tuple[int, int, int, int]  # x, y, width, height in pixels


def load_image(path) -> ImagePlane:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im)
    except FileNotFoundError as exc:
        raise ImageError(f"{path}: no such file") from exc
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageError(f"{path}: cannot read image ({exc})") from exc
    if arr.size == 0:
        raise ImageError(f"{path}: image has a zero dimension")
    return ImagePlane.from_uint8(arr)


def save_image(plane: ImagePlane, path) -> None:
    """Write as 8-bit RGB; format follows the file extension (PNG recommended)."""
    try:
        Image.fromarray(plane.to_uint8(), mode="RGB").save(path)
    except (ValueError, KeyError) as exc:
        raise ImageError(f"{path}: unsupported output format ({exc})") from exc


@dataclass(frozen=True)
class CoordGrid:
    """Sample locations for a (possibly rescaled, possibly cropped) image.

    ``coords`` is (height * width, 2) with columns (x, y); ``width`` and
    ``height`` give the shape of the sampled block, ``source_dims`` the image
    whose normalization was used.
    """

    coords: np.ndarray
    width: int
    height: int
    source_dims: tuple[int, int]

    def __len__(self):
        return self.coords.shape[0]


def axis_coords(index, n: int) -> np.ndarray:
    index = np.asarray(index, dtype=np.float64)
    if n == 1:
        return np.zeros_like(index)
    return 2.0 * index / (n - 1) - 1.0


def _grid(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def full_grid(width: int, height: int) -> CoordGrid:
    if width < 1 or height < 1:
        raise ContractError(f"grid dimensions must be positive, got {width}x{height}")
    coords = _grid(axis_coords(np.arange(width), width), axis_coords(np.arange(height), height))
    return CoordGrid(coords, width, height, (width, height))


def scaled_dims(width: int, height: int, scale: float) -> tuple[int, int]:
    if not (math.isfinite(scale) and scale > 0):
        raise ContractError(f"scale must be positive, got {scale}")
    return max(1, round(width * scale)), max(1, round(height * scale))


def subgrid(width: int, height: int, scale: float = 1.0, region: Region | None = None) -> CoordGrid:
    """Grid for a rescaled and/or cropped decode of a ``width x height`` image.

    The image is resampled at ``scale`` over the same [-1, 1] span, and
    ``region`` (given in source pixels) selects the part of that resampled
    grid covering the same area. At scale 1 the result is exactly the
    corresponding rows of :func:`full_grid`.
    """
    sw, sh = scaled_dims(width, height, scale)
    if region is None:
        x0, x1, y0, y1 = 0, sw, 0, sh
    else:
        rx, ry, rw, rh = region
        if rw < 1 or rh < 1:
            raise ContractError(f"empty region {region}")
        if rx < 0 or ry < 0 or rx + rw > width or ry + rh > height:
            raise ContractError(f"region {region} outside {width}x{height} image")
        sx, sy = sw / width, sh / height
        x0, x1 = math.floor(rx * sx), min(sw, math.ceil((rx + rw) * sx))
        y0, y1 = math.floor(ry * sy), min(sh, math.ceil((ry + rh) * sy))
        x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    coords = _grid(axis_coords(np.arange(x0, x1), sw), axis_coords(np.arange(y0, y1), sh))
    return CoordGrid(coords, x1 - x0, y1 - y0, (width, height))


def mse(reference: ImagePlane, test: ImagePlane) -> float:
    if reference.dims != test.dims:
        raise ContractError(f"dimension mismatch: {reference.dims} vs {test.dims}")
    return float(np.mean((reference.pixels - test.pixels) ** 2))


def psnr_from_mse(err: float) -> float:
    if err == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


def psnr(reference: ImagePlane, test: ImagePlane) -> float:
    """Peak signal-to-noise ratio in dB with peak value 1."""
    return psnr_from_mse(mse(reference, test))
