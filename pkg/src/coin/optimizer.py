"""Adam with bias correction, operating on SirenNetwork parameters in place."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .siren import ContractError, GradientSet, SirenNetwork


@dataclass
class AdamState:
    """Optimizer state.

    ``first_moment`` and ``second_moment`` hold one array per parameter in
    storage order (W0, b0, W1, b1, ...).
    """

    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list, repr=False)
    second_moment: list[np.ndarray] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.lr >= 0:
            raise ContractError(f"lr must be non-negative, got {self.lr}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ContractError(f"{name} must lie in (0, 1), got {v}")
        if not self.epsilon > 0:
            raise ContractError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def fresh(cls, net: SirenNetwork, **hyper) -> "AdamState":
        params = net.parameters()
        return cls(
            **hyper,
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
        )

    _HEAD = struct.Struct("<Qdddd")

    def to_bytes(self) -> bytes:
        """Serialize hyperparameters, step and float32 moment buffers."""
        head = self._HEAD.pack(self.step, self.lr, self.beta1, self.beta2, self.epsilon)
        m = np.concatenate([a.ravel() for a in self.first_moment]).astype("<f4")
        v = np.concatenate([a.ravel() for a in self.second_moment]).astype("<f4")
        return head + m.tobytes() + v.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, net: SirenNetwork) -> "AdamState":
        step, lr, b1, b2, eps = cls._HEAD.unpack_from(data)
        shapes = [p.shape for p in net.parameters()]
        n = sum(int(np.prod(s)) for s in shapes)
        body = np.frombuffer(data, dtype="<f4", offset=cls._HEAD.size)
        if body.size != 2 * n:
            raise ContractError(f"optimizer section holds {body.size} values, expected {2 * n}")

        def split(flat):
            out, pos = [], 0
            for s in shapes:
                k = int(np.prod(s))
                out.append(flat[pos:pos + k].reshape(s).astype(net.dtype))
                pos += k
            return out

        return cls(lr, b1, b2, eps, step, split(body[:n]), split(body[n:]))


def adam_step(net: SirenNetwork, grads: GradientSet, state: AdamState) -> tuple[SirenNetwork, AdamState]:
    params = net.parameters()
    flat_grads = [g for pair in grads for g in pair]
    if len(flat_grads) != len(params) or len(state.first_moment) != len(params):
        raise ContractError("gradients / optimizer state do not match the network")
    for p, g in zip(params, flat_grads):
        if p.shape != g.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {p.shape}")

    state.step += 1
    t = state.step
    dt = net.dtype.type
    b1, b2 = dt(state.beta1), dt(state.beta2)
    step_size = dt(state.lr / (1.0 - state.beta1 ** t))
    denom_scale = dt(1.0 / np.sqrt(1.0 - state.beta2 ** t))
    eps = dt(state.epsilon)

    for p, g, m, v in zip(params, flat_grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= step_size * m / (np.sqrt(v) * denom_scale + eps)
    return net, state
