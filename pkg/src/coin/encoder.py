"""Encoding loop: overfit a network to one image and keep the best-PSNR snapshot."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .image_plane import ImagePlane, full_grid, psnr_from_mse
from .optimizer import AdamState, adam_step
from .siren import Architecture, ContractError, SirenNetwork, backward, forward_fast, init_siren
from .storage import HEADER_SIZE, QuantizedModel, dequantize, parse_header, quantize, to_bytes

log = logging.getLogger(__name__)


class EncodeDivergedError(ArithmeticError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"loss became {loss} at iteration {iteration}")
        self.iteration = iteration
        self.loss = loss


class CheckpointMismatchError(ValueError):
    pass


@dataclass
class TrainConfig:
    iterations: int = 50_000
    lr: float = 2e-4
    seed: int = 0
    log_every: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    # Only PSNR is supported as the checkpoint criterion.
    checkpoint_metric = "psnr"

    def __post_init__(self):
        if self.iterations < 1:
            raise ContractError(f"iterations must be >= 1, got {self.iterations}")
        if self.log_every < 1:
            raise ContractError(f"log_every must be >= 1, got {self.log_every}")
        if not self.lr >= 0:
            raise ContractError(f"lr must be non-negative, got {self.lr}")


@dataclass
class TracePoint:
    iteration: int
    loss: float
    psnr: float


@dataclass
class RunMetrics:
    trace: list[TracePoint] = field(default_factory=list)
    best_psnr: float = -math.inf
    best_iteration: int = 0

    def best_so_far(self) -> list[float]:
        out, best = [], -math.inf
        for p in self.trace:
            best = max(best, p.psnr)
            out.append(best)
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss", "psnr"])
            for p in self.trace:
                writer.writerow([p.iteration, repr(p.loss), repr(p.psnr)])

    def to_dict(self) -> dict:
        return {
            "trace": [[p.iteration, p.loss, p.psnr] for p in self.trace],
            "best_psnr": self.best_psnr,
            "best_iteration": self.best_iteration,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        return cls([TracePoint(*row) for row in d["trace"]], d["best_psnr"], d["best_iteration"])


def image_digest(image: ImagePlane) -> str:
    return hashlib.sha256(image.to_uint8().tobytes() + repr(image.dims).encode()).hexdigest()


def config_hash(image: ImagePlane, arch: Architecture, cfg: TrainConfig) -> str:
    """Everything that must agree for a resumed run to continue the same encode.

    The iteration budget is excluded so a run can be extended.
    """
    key = {k: v for k, v in asdict(cfg).items() if k != "iterations"}
    key["arch"] = [arch.hidden_layers, arch.width, arch.freq_scale]
    key["image"] = image_digest(image)
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()


@dataclass
class EncodeSession:
    """Mutable state of one encode; everything needed to continue it."""

    image: ImagePlane
    cfg: TrainConfig
    net: SirenNetwork
    adam: AdamState
    best_net: SirenNetwork
    metrics: RunMetrics = field(default_factory=RunMetrics)
    iteration: int = 0

    @classmethod
    def start(cls, image: ImagePlane, arch: Architecture, cfg: TrainConfig) -> "EncodeSession":
        net = init_siren(arch, cfg.seed)
        adam = AdamState.fresh(net, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)
        return cls(image, cfg, net, adam, net.copy())

    @property
    def arch(self) -> Architecture:
        return self.net.arch

    def run(self, steps: int, on_log: Callable[[TracePoint], None] | None = None) -> None:
        """Advance by ``steps`` Adam updates over the full pixel grid."""
        coords = full_grid(*self.image.dims).coords.astype(np.float32)
        targets = self.image.flat().astype(np.float32)
        last = self.iteration + steps
        for _ in range(steps):
            # non-finite values are caught below
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = backward(self.net, coords, targets)
                if not math.isfinite(loss):
                    raise EncodeDivergedError(self.iteration + 1, loss)
                adam_step(self.net, grads, self.adam)
            self.iteration += 1
            if self.iteration % self.cfg.log_every == 0 or self.iteration == last:
                point = self._evaluate(coords, targets)
                if on_log is not None:
                    on_log(point)

    def _evaluate(self, coords, targets) -> TracePoint:
        out = forward_fast(self.net, coords).astype(np.float64)
        loss = float(np.mean((out - targets) ** 2))
        if not math.isfinite(loss):
            raise EncodeDivergedError(self.iteration, loss)
        err = float(np.mean((np.clip(out, 0.0, 1.0) - self.image.flat()) ** 2))
        point = TracePoint(self.iteration, loss, psnr_from_mse(err))
        m = self.metrics
        m.trace.append(point)
        if point.psnr > m.best_psnr:
            m.best_psnr = point.psnr
            m.best_iteration = self.iteration
            self.best_net = self.net.copy()
        log.debug("iter %d loss %.6g psnr %.3f dB", point.iteration, point.loss, point.psnr)
        return point

    def config_hash(self) -> str:
        return config_hash(self.image, self.arch, self.cfg)

    # Checkpoint: a 32-bit .coin container holding the current network,
    # followed by tagged sections (4-byte tag, u32 length, data).
    def save(self, path) -> None:
        body = to_bytes(quantize(self.net, 32), self.image.dims)
        meta = {
            "iteration": self.iteration,
            "config": asdict(self.cfg),
            "config_hash": self.config_hash(),
            "metrics": self.metrics.to_dict(),
        }
        sections = [
            (b"BEST", quantize(self.best_net, 32).payload.tobytes()),
            (b"ADAM", self.adam.to_bytes()),
            (b"META", json.dumps(meta).encode()),
        ]
        for tag, data in sections:
            body += tag + struct.pack("<I", len(data)) + data
        Path(path).write_bytes(body)

    @classmethod
    def load(cls, path, image: ImagePlane) -> "EncodeSession":
        data = Path(path).read_bytes()
        arch, bits, dims = parse_header(data)
        if bits != 32:
            raise CheckpointMismatchError("checkpoints store 32-bit parameters")
        pos = HEADER_SIZE + arch.param_count * 4
        net = dequantize(QuantizedModel(arch, 32, np.frombuffer(data[HEADER_SIZE:pos], "<f4")))
        sections = {}
        while pos < len(data):
            tag = data[pos:pos + 4]
            (n,) = struct.unpack_from("<I", data, pos + 4)
            sections[tag] = data[pos + 8:pos + 8 + n]
            pos += 8 + n
        best = dequantize(QuantizedModel(arch, 32, np.frombuffer(sections[b"BEST"], "<f4")))
        adam = AdamState.from_bytes(sections[b"ADAM"], net)
        meta = json.loads(sections[b"META"])
        if dims != image.dims:
            raise CheckpointMismatchError(f"checkpoint is for a {dims} image, got {image.dims}")
        cfg = TrainConfig(**meta["config"])
        session = cls(image, cfg, net, adam, best, RunMetrics.from_dict(meta["metrics"]), meta["iteration"])
        if session.config_hash() != meta["config_hash"]:
            raise CheckpointMismatchError("checkpoint does not belong to this image/configuration")
        return session


def encode(
    image: ImagePlane,
    arch: Architecture,
    cfg: TrainConfig,
    on_log: Callable[[TracePoint], None] | None = None,
) -> tuple[SirenNetwork, RunMetrics]:
    """Fit ``arch`` to ``image`` with full-batch Adam.

    Returns a copy of the network with the highest PSNR seen at any logged
    iteration (every ``cfg.log_every`` steps and at the last step).
    """
    session = EncodeSession.start(image, arch, cfg)
    session.run(cfg.iterations, on_log)
    return session.best_net, session.metrics


def resume(
    checkpoint,
    image: ImagePlane,
    arch: Architecture,
    cfg: TrainConfig,
    extra_iterations: int,
    on_log: Callable[[TracePoint], None] | None = None,
) -> tuple[SirenNetwork, RunMetrics, EncodeSession]:
    """Continue a saved encode for ``extra_iterations`` more steps.

    ``arch`` and ``cfg`` must describe the same encode the checkpoint came
    from (the iteration budget may differ).
    """
    session = EncodeSession.load(checkpoint, image)
    if config_hash(image, arch, cfg) != session.config_hash():
        raise CheckpointMismatchError("architecture or training configuration differs from checkpoint")
    if extra_iterations < 0:
        raise ContractError("extra_iterations must be non-negative")
    session.run(extra_iterations, on_log)
    return session.best_net, session.metrics, session


def mean_color_psnr(image: ImagePlane) -> float:
    """PSNR of the constant image filled with the mean color (a trivial baseline)."""
    flat = image.flat()
    return psnr_from_mse(float(np.mean((flat - flat.mean(axis=0)) ** 2)))
