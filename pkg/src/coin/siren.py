"""Sine-activated MLP mapping (x, y) coordinates to RGB.

Hidden layers compute ``sin(freq_scale * (W a + b))``; the output layer is a
plain affine map. Parameters are plain numpy arrays so the network can be
trained with a hand-written backward pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

IN_DIM = 2
OUT_DIM = 3
DEFAULT_FREQ_SCALE = 30.0


class ContractError(ValueError):
    """Raised when an operation is called with incompatible shapes or values."""


@dataclass(frozen=True)
class Architecture:
    hidden_layers: int
    width: int
    freq_scale: float = DEFAULT_FREQ_SCALE
    in_dim: int = IN_DIM
    out_dim: int = OUT_DIM

    def __post_init__(self):
        if int(self.hidden_layers) != self.hidden_layers or self.hidden_layers < 1:
            raise ContractError(f"hidden_layers must be a positive integer, got {self.hidden_layers}")
        if int(self.width) != self.width or self.width < 1:
            raise ContractError(f"width must be a positive integer, got {self.width}")
        if not (math.isfinite(self.freq_scale) and self.freq_scale > 0):
            raise ContractError(f"freq_scale must be positive, got {self.freq_scale}")
        # the container stores the scale as float32
        object.__setattr__(self, "freq_scale", float(np.float32(self.freq_scale)))
        if self.in_dim != IN_DIM or self.out_dim != OUT_DIM:
            raise ContractError("in_dim and out_dim are fixed to 2 and 3")

    @property
    def param_count(self) -> int:
        w, L = self.width, self.hidden_layers
        return (
            (self.in_dim * w + w)
            + (L - 1) * (w * w + w)
            + (w * self.out_dim + self.out_dim)
        )

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out_features, in_features) of every affine layer, input to output."""
        w = self.width
        shapes = [(w, self.in_dim)]
        shapes += [(w, w)] * (self.hidden_layers - 1)
        shapes.append((self.out_dim, w))
        return shapes

    def __str__(self):
        return f"L={self.hidden_layers},w={self.width},w0={self.freq_scale:g}"


@dataclass
class SirenNetwork:
    arch: Architecture
    layers: list[tuple[np.ndarray, np.ndarray]] = field(repr=False)

    def __post_init__(self):
        shapes = self.arch.layer_shapes()
        if len(self.layers) != len(shapes):
            raise ContractError(f"expected {len(shapes)} layers, got {len(self.layers)}")
        for (W, b), (n_out, n_in) in zip(self.layers, shapes):
            if W.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ContractError(
                    f"layer shape {W.shape}/{b.shape} does not match ({n_out}, {n_in})"
                )

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0][0].dtype

    def copy(self) -> "SirenNetwork":
        return SirenNetwork(self.arch, [(W.copy(), b.copy()) for W, b in self.layers])

    def astype(self, dtype) -> "SirenNetwork":
        return SirenNetwork(
            self.arch, [(W.astype(dtype), b.astype(dtype)) for W, b in self.layers]
        )

    def parameters(self) -> list[np.ndarray]:
        """Flat list of arrays in storage order: W0, b0, W1, b1, ..."""
        return [p for layer in self.layers for p in layer]

    def flatten(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    @classmethod
    def from_flat(cls, arch: Architecture, flat, dtype=np.float32) -> "SirenNetwork":
        flat = np.asarray(flat)
        if flat.ndim != 1 or flat.size != arch.param_count:
            raise ContractError(
                f"flat parameter vector has {flat.size} entries, {arch} needs {arch.param_count}"
            )
        layers = []
        pos = 0
        for n_out, n_in in arch.layer_shapes():
            W = flat[pos:pos + n_out * n_in].reshape(n_out, n_in).astype(dtype)
            pos += n_out * n_in
            b = flat[pos:pos + n_out].astype(dtype)
            pos += n_out
            layers.append((W, b))
        return cls(arch, layers)

    @classmethod
    def zeros(cls, arch: Architecture, dtype=np.float32) -> "SirenNetwork":
        return cls.from_flat(arch, np.zeros(arch.param_count), dtype=dtype)


# Gradients share the network's layout.
GradientSet = list[tuple[np.ndarray, np.ndarray]]


def init_bound(arch: Architecture, layer_index: int) -> float:
    """Half-width of the uniform init interval for a given affine layer."""
    n_in = arch.layer_shapes()[layer_index][1]
    if layer_index == 0:
        return 1.0 / n_in
    return math.sqrt(6.0 / n_in) / arch.freq_scale


def init_siren(arch: Architecture, seed: int, dtype=np.float32) -> SirenNetwork:
    """SIREN initialization; biases share their layer's weight interval."""
    rng = np.random.default_rng(seed)
    layers = []
    for i, (n_out, n_in) in enumerate(arch.layer_shapes()):
        bound = init_bound(arch, i)
        W = rng.uniform(-bound, bound, size=(n_out, n_in)).astype(dtype)
        b = rng.uniform(-bound, bound, size=n_out).astype(dtype)
        layers.append((W, b))
    return SirenNetwork(arch, layers)


def _as_coords(coords, dtype) -> np.ndarray:
    coords = np.asarray(coords, dtype=dtype)
    if coords.ndim != 2 or coords.shape[1] != IN_DIM:
        raise ContractError(f"coords must have shape (N, 2), got {coords.shape}")
    return coords


def _affine_rowwise(a: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Fixed-order accumulation that never mixes rows, so any subset of the
    # batch produces bit-identical rows (BLAS kernels give no such promise).
    out = np.broadcast_to(b, (a.shape[0], b.shape[0])).copy()
    for k in range(W.shape[1]):
        out += a[:, k:k + 1] * W[:, k]
    return out


def forward(net: SirenNetwork, coords) -> np.ndarray:
    """Evaluate the network on an (N, 2) batch; returns raw (N, 3) outputs.

    Each row is computed independently of the others, so evaluating a pixel
    alone or inside any batch gives identical values.
    """
    a = _as_coords(coords, net.dtype)
    w0 = net.dtype.type(net.arch.freq_scale)
    *hidden, (W_out, b_out) = net.layers
    for W, b in hidden:
        a = np.sin(w0 * _affine_rowwise(a, W, b))
    return _affine_rowwise(a, W_out, b_out)


def forward_fast(net: SirenNetwork, coords) -> np.ndarray:
    """Same function as :func:`forward` through BLAS matmuls (training path)."""
    a = _as_coords(coords, net.dtype)
    w0 = net.dtype.type(net.arch.freq_scale)
    *hidden, (W_out, b_out) = net.layers
    for W, b in hidden:
        a = np.sin(w0 * (a @ W.T + b))
    return a @ W_out.T + b_out


def backward(net: SirenNetwork, coords, targets) -> tuple[float, GradientSet]:
    """Mean squared error over all output scalars and its exact gradient."""
    x = _as_coords(coords, net.dtype)
    targets = np.asarray(targets, dtype=net.dtype)
    if targets.shape != (x.shape[0], OUT_DIM):
        raise ContractError(
            f"targets shape {targets.shape} does not match {x.shape[0]} coordinates"
        )
    w0 = net.dtype.type(net.arch.freq_scale)
    *hidden, (W_out, b_out) = net.layers

    acts = [x]
    phases = []
    for W, b in hidden:
        phase = w0 * (acts[-1] @ W.T + b)
        phases.append(phase)
        acts.append(np.sin(phase))
    y = acts[-1] @ W_out.T + b_out

    diff = y - targets
    loss = float(np.mean(np.square(diff, dtype=np.float64)))
    dy = diff * net.dtype.type(2.0 / diff.size)

    grads: GradientSet = [None] * len(net.layers)
    grads[-1] = (dy.T @ acts[-1], dy.sum(axis=0))
    delta = dy @ W_out
    for i in range(len(hidden) - 1, -1, -1):
        dz = delta * (w0 * np.cos(phases[i]))
        grads[i] = (dz.T @ acts[i], dz.sum(axis=0))
        if i:
            delta = dz @ hidden[i][0]
    return loss, grads
