"""Categorical and diagonal-Gaussian action distributions on autograd tensors.

Both classes accept either numpy arrays or :class:`Tensor` parameters. Methods
return Tensors; use ``.data`` for plain arrays.
"""

import math

import numpy as np

from esp_marl.errors import InvalidArgument
from esp_marl.nn.autograd import Tensor, as_tensor

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class Categorical:
    def __init__(self, logits):
        self.logits = as_tensor(logits)
        if not np.all(np.isfinite(self.logits.data)):
            raise InvalidArgument("categorical logits must be finite")
        self.log_probs = self.logits.log_softmax()

    @property
    def n(self) -> int:
        return self.logits.shape[-1]

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs.data)

    def log_prob(self, actions) -> Tensor:
        a = np.asarray(actions)
        if np.any((a < 0) | (a >= self.n)):
            raise InvalidArgument(f"action index out of range [0, {self.n})")
        return self.log_probs.gather(a.astype(np.int64))

    def entropy(self) -> Tensor:
        p = self.log_probs.exp()
        return -(p * self.log_probs).sum(axis=-1)

    def kl(self, other: "Categorical") -> Tensor:
        """KL(self || other) summed over the action axis."""
        p = self.log_probs.exp()
        return (p * (self.log_probs - other.log_probs)).sum(axis=-1)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        cdf = np.cumsum(self.probs, axis=-1)
        u = rng.random(cdf.shape[:-1])[..., None]
        return np.minimum((cdf < u * cdf[..., -1:]).sum(axis=-1), self.n - 1)

    def mode(self) -> np.ndarray:
        return np.argmax(self.logits.data, axis=-1)


class DiagGaussian:
    """Independent normals over the last axis. ``log_std`` is clamped to [-5, 2]."""

    def __init__(self, mean, log_std):
        self.mean = as_tensor(mean)
        self.log_std = as_tensor(log_std).clip(LOG_STD_MIN, LOG_STD_MAX)
        if not (np.all(np.isfinite(self.mean.data)) and np.all(np.isfinite(self.log_std.data))):
            raise InvalidArgument("gaussian parameters must be finite")

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std.data)

    def log_prob(self, actions) -> Tensor:
        a = np.asarray(actions, dtype=np.float64)
        z = (a - self.mean) * (-self.log_std).exp()
        return (z * z * -0.5 - self.log_std - _HALF_LOG_2PI).sum(axis=-1)

    def entropy(self) -> Tensor:
        ent = self.log_std + (0.5 + _HALF_LOG_2PI)
        ent = ent * np.ones(self.mean.shape)  # broadcast a shared log-std over the batch
        return ent.sum(axis=-1)

    def kl(self, other: "DiagGaussian") -> Tensor:
        """KL(self || other) summed over dimensions (closed form)."""
        var_ratio = (2.0 * (self.log_std - other.log_std)).exp()
        diff = (self.mean - other.mean) * (-other.log_std).exp()
        return ((var_ratio + diff * diff - 1.0) * 0.5 - (self.log_std - other.log_std)).sum(axis=-1)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        noise = rng.standard_normal(self.mean.shape)
        return self.mean.data + self.std * noise

    def mode(self) -> np.ndarray:
        return self.mean.data.copy()
