"""Flat parameter vectors and tanh MLPs that read their weights out of them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from esp_marl.errors import InvalidArgument
from esp_marl.nn.autograd import Tensor


@dataclass
class ParameterVector:
    """A flat float64 vector with named slices.

    ``registry[name] = (start, shape)``. Layer weights are views into
    ``values`` so an optimizer can treat the whole model as one array.
    """

    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    registry: dict = field(default_factory=dict)

    def add(self, name: str, shape) -> None:
        if name in self.registry:
            raise InvalidArgument(f"duplicate parameter {name!r}")
        shape = tuple(int(s) for s in shape)
        start = self.values.size
        self.registry[name] = (start, shape)
        self.values = np.concatenate([self.values, np.zeros(int(np.prod(shape)))])

    def __len__(self):
        return self.values.size

    def view(self, name: str, flat=None):
        """Named slice of ``flat`` (defaults to ``self.values``), reshaped."""
        start, shape = self.registry[name]
        size = int(np.prod(shape))
        src = self.values if flat is None else flat
        return src[start : start + size].reshape(shape)

    def set(self, name: str, value) -> None:
        start, shape = self.registry[name]
        self.values[start : start + int(np.prod(shape))] = np.asarray(value, dtype=np.float64).reshape(-1)

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.values.copy(), dict(self.registry))

    def check(self) -> None:
        total = sum(int(np.prod(shape)) for _, shape in self.registry.values())
        if total != self.values.size:
            raise InvalidArgument("registry does not cover the parameter vector")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgument("non-finite parameter values")


def orthogonal(rng: np.random.Generator, shape, gain=1.0) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


@dataclass(frozen=True)
class MLPArch:
    """Dense layer widths ``(in, hidden..., out)``; tanh between layers, linear output."""

    sizes: tuple

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]


def register_mlp(params: ParameterVector, prefix: str, arch: MLPArch) -> None:
    for k, (a, b) in enumerate(zip(arch.sizes[:-1], arch.sizes[1:])):
        params.add(f"{prefix}.l{k}.W", (b, a))
        params.add(f"{prefix}.l{k}.b", (b,))


def init_mlp(params: ParameterVector, prefix: str, arch: MLPArch, rng, out_gain=1.0,
             hidden_gain=np.sqrt(2.0)) -> None:
    n = len(arch.sizes) - 1
    for k, (a, b) in enumerate(zip(arch.sizes[:-1], arch.sizes[1:])):
        gain = out_gain if k == n - 1 else hidden_gain
        params.set(f"{prefix}.l{k}.W", orthogonal(rng, (b, a), gain))
        params.set(f"{prefix}.l{k}.b", np.zeros(b))


def mlp_forward(params: ParameterVector, x, arch: MLPArch, prefix: str = "mlp", flat=None):
    """Feed ``x`` (..., in) through the MLP.

    ``flat`` may be a :class:`Tensor` holding the parameter values; the result
    is then a Tensor differentiable w.r.t. it. Otherwise everything is numpy.
    """
    x_shape = x.shape
    if x_shape[-1] != arch.n_in:
        raise InvalidArgument(f"input width {x_shape[-1]} does not match arch input {arch.n_in}")
    src = params.values if flat is None else flat
    h = x
    n = len(arch.sizes) - 1
    for k in range(n):
        W = params.view(f"{prefix}.l{k}.W", src)
        b = params.view(f"{prefix}.l{k}.b", src)
        h = h @ W.T + b
        if k < n - 1:
            h = h.tanh() if isinstance(h, Tensor) else np.tanh(h)
    return h
