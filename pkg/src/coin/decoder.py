"""Reconstruct images by sampling a stored network on a coordinate grid."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .image_plane import CoordGrid, ImagePlane, Region, full_grid, subgrid
from .siren import SirenNetwork, forward
from .storage import QuantizedModel, dequantize, read_coin

CHUNK = 65536


def render(net: SirenNetwork, grid: CoordGrid, workers: int = 1) -> ImagePlane:
    """Evaluate ``net`` on ``grid`` and clamp to [0, 1].

    The grid is split into fixed chunks; rows never interact, so the result is
    identical for any chunking or worker count.
    """
    chunks = [grid.coords[i:i + CHUNK] for i in range(0, len(grid), CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: forward(net, c), chunks))
    else:
        parts = [forward(net, c) for c in chunks]
    rgb = np.clip(np.concatenate(parts).astype(np.float64), 0.0, 1.0)
    return ImagePlane(rgb.reshape(grid.height, grid.width, 3))


def decode(q: QuantizedModel, dims: tuple[int, int], workers: int = 1) -> ImagePlane:
    return render(dequantize(q), full_grid(*dims), workers)


def decode_progressive(
    q: QuantizedModel,
    dims: tuple[int, int],
    scale: float = 1.0,
    region: Region | None = None,
    workers: int = 1,
) -> ImagePlane:
    """Decode at another resolution and/or only a pixel region of the image."""
    return render(dequantize(q), subgrid(*dims, scale=scale, region=region), workers)


def decode_file(path, scale: float = 1.0, region: Region | None = None, workers: int = 1) -> ImagePlane:
    q, dims = read_coin(path)
    if scale == 1.0 and region is None:
        return decode(q, dims, workers)
    return decode_progressive(q, dims, scale, region, workers)
