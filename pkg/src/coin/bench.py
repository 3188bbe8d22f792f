"""Rate-distortion benchmark over a directory of images."""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from .arch_search import preset
from .decoder import decode
from .encoder import TrainConfig, encode
from .image_plane import ImagePlane, load_image, psnr
from .storage import bpp, quantize

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".bmp", ".ppm", ".tif", ".tiff", ".jpg", ".jpeg"}


@dataclass
class BenchRow:
    image_id: str
    bpp_label: float
    hidden_layers: int | None = None
    width: int | None = None
    bpp_actual: float | None = None
    psnr_32bit: float | None = None
    psnr_16bit: float | None = None
    # after rounding the 16-bit decode to 8-bit pixels
    psnr_16bit_8bit: float | None = None
    best_psnr_train: float | None = None
    wall_seconds: float | None = None
    iterations: int | None = None
    seed: int | None = None
    status: str = "ok"
    # left empty for external tools to fill with a reference codec's numbers
    baseline_codec: str | None = None
    baseline_bpp: float | None = None
    baseline_psnr: float | None = None


COLUMNS = [f.name for f in fields(BenchRow)]


def list_corpus(corpus_dir) -> list[Path]:
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise NotADirectoryError(f"{corpus_dir} is not a directory")
    return sorted(p for p in corpus_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def bench_one(path: Path, label: float, cfg: TrainConfig) -> BenchRow:
    row = BenchRow(path.stem, label, iterations=cfg.iterations, seed=cfg.seed)
    t0 = time.perf_counter()
    try:
        image = load_image(path)
        arch = preset(label)
        row.hidden_layers, row.width = arch.hidden_layers, arch.width
        row.bpp_actual = bpp(arch, 16, *image.dims)
        net, metrics = encode(image, arch, cfg)
        row.best_psnr_train = metrics.best_psnr
        row.psnr_32bit = psnr(image, decode(quantize(net, 32), image.dims))
        decoded = decode(quantize(net, 16), image.dims)
        row.psnr_16bit = psnr(image, decoded)
        row.psnr_16bit_8bit = psnr(image, ImagePlane.from_uint8(decoded.to_uint8()))
    except Exception as exc:  # one bad image must not stop the run
        log.warning("%s @ %s bpp failed: %s", path.name, label, exc)
        row.status = f"error: {type(exc).__name__}: {exc}"
    row.wall_seconds = time.perf_counter() - t0
    return row


def aggregate(rows: list[BenchRow], labels) -> list[BenchRow]:
    out = []
    for label in labels:
        ok = [r for r in rows if r.bpp_label == label and r.status == "ok"]
        agg = BenchRow("mean", label, status="aggregate")
        if ok:
            for name in ("bpp_actual", "psnr_32bit", "psnr_16bit", "psnr_16bit_8bit", "best_psnr_train", "wall_seconds"):
                setattr(agg, name, sum(getattr(r, name) for r in ok) / len(ok))
            agg.iterations, agg.seed = ok[0].iterations, ok[0].seed
        out.append(agg)
    return out


def run_bench(corpus_dir, labels, cfg: TrainConfig, workers: int | None = None) -> list[BenchRow]:
    """Encode every image at every bpp label; returns data rows then one mean row per label."""
    images = list_corpus(corpus_dir)
    if not images:
        log.warning("no images found in %s", corpus_dir)
        return []
    jobs = [(p, label) for p in images for label in labels]
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
            futures = [pool.submit(bench_one, p, label, cfg) for p, label in jobs]
            rows = [f.result() for f in futures]
    else:
        rows = [bench_one(p, label, cfg) for p, label in jobs]
    return rows + aggregate(rows, labels)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return v


def write_bench_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for r in rows:
            writer.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
