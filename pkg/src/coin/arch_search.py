"""Architecture presets, bpp-budget enumeration and PSNR sweeps."""
from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .encoder import TrainConfig, encode
from .image_plane import ImagePlane
from .siren import DEFAULT_FREQ_SCALE, Architecture, ContractError
from .storage import bpp

MAX_LAYERS = 20
MAX_WIDTH = 128

# bpp label -> (hidden layers, width) for 768x512 images at 16 bits.
PRESETS = {
    0.07: (5, 20),
    0.15: (5, 30),
    0.3: (10, 28),
    0.6: (10, 40),
    1.2: (13, 49),
}


def preset(bpp_label: float, freq_scale: float = DEFAULT_FREQ_SCALE) -> Architecture:
    for label, (layers, width) in PRESETS.items():
        if abs(label - bpp_label) < 1e-9:
            return Architecture(layers, width, freq_scale)
    raise KeyError(f"no preset for {bpp_label} bpp; known labels: {sorted(PRESETS)}")


def valid_architectures(
    target_bpp: float,
    image_dims: tuple[int, int],
    precision_bits: int = 16,
    tolerance: float = 0.05,
    max_layers: int = MAX_LAYERS,
    max_width: int = MAX_WIDTH,
    freq_scale: float = DEFAULT_FREQ_SCALE,
) -> list[Architecture]:
    """All (layers, width) pairs whose bpp is within ``tolerance`` of the target.

    Sorted by distance to the target, ties broken by fewer layers.
    """
    if not target_bpp > 0:
        raise ContractError(f"target_bpp must be positive, got {target_bpp}")
    if not 0 <= tolerance < 1:
        raise ContractError(f"tolerance must lie in [0, 1), got {tolerance}")
    lo, hi = target_bpp * (1 - tolerance), target_bpp * (1 + tolerance)
    found = []
    for layers in range(1, max_layers + 1):
        for width in range(1, max_width + 1):
            arch = Architecture(layers, width, freq_scale)
            rate = bpp(arch, precision_bits, *image_dims)
            if rate > hi:
                # bpp grows with width
                break
            if rate >= lo:
                found.append((abs(rate - target_bpp), layers, arch))
    found.sort(key=lambda t: (t[0], t[1]))
    return [arch for _, _, arch in found]


@dataclass
class SweepRow:
    arch: Architecture
    best_psnr: float
    bpp: float
    iterations: int
    seed: int
    seconds: float


SWEEP_COLUMNS = ["hidden_layers", "width", "param_count", "bpp", "best_psnr_db", "iterations", "seed"]


def _run_one(image: ImagePlane, arch: Architecture, cfg: TrainConfig, precision_bits: int) -> SweepRow:
    t0 = time.perf_counter()
    _, metrics = encode(image, arch, cfg)
    return SweepRow(
        arch, metrics.best_psnr, bpp(arch, precision_bits, *image.dims),
        cfg.iterations, cfg.seed, time.perf_counter() - t0,
    )


def sweep(
    image: ImagePlane,
    candidates: list[Architecture],
    cfg: TrainConfig,
    precision_bits: int = 16,
    workers: int = 1,
) -> list[SweepRow]:
    """Encode ``image`` with every candidate; rows sorted by best PSNR, descending.

    Each candidate uses the same seed, so results do not depend on the
    order candidates are given in.
    """
    if not candidates:
        raise ContractError("sweep needs at least one candidate architecture")
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_run_one, image, a, cfg, precision_bits) for a in candidates]
            rows = [f.result() for f in futures]
    else:
        rows = [_run_one(image, a, cfg, precision_bits) for a in candidates]
    rows.sort(key=lambda r: (-r.best_psnr, r.arch.hidden_layers, r.arch.width))
    return rows


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([
                r.arch.hidden_layers, r.arch.width, r.arch.param_count,
                f"{r.bpp:.6f}", f"{r.best_psnr:.4f}", r.iterations, r.seed,
            ])


def search(
    image: ImagePlane,
    target_bpp: float,
    cfg: TrainConfig,
    top_k: int = 4,
    search_iterations: int | None = None,
    precision_bits: int = 16,
    tolerance: float = 0.05,
    workers: int = 1,
) -> tuple[Architecture, list[SweepRow]]:
    """Pick an architecture for a bpp budget by short trial encodes.

    The ``top_k`` candidates closest to the budget are each trained for
    ``search_iterations`` steps; the one with the highest PSNR wins.
    """
    candidates = valid_architectures(target_bpp, image.dims, precision_bits, tolerance)[:top_k]
    if not candidates:
        raise ContractError(f"no architecture fits {target_bpp} bpp within {tolerance:.0%}")
    trial = replace(cfg, iterations=search_iterations or cfg.iterations)
    rows = sweep(image, candidates, trial, precision_bits, workers)
    return rows[0].arch, rows
