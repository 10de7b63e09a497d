"""Adam over flat parameter vectors, with global-norm gradient clipping."""

import logging
from dataclasses import dataclass, field

import numpy as np

from esp_marl.errors import NonFiniteError

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.t)


@dataclass
class StepInfo:
    grad_norm: float
    clipped: bool = field(default=False)


def clip_by_global_norm(grad: np.ndarray, max_norm):
    norm = float(np.sqrt(np.dot(grad, grad)))
    if max_norm is not None and norm > max_norm:
        return grad * (max_norm / norm), norm, True
    return grad, norm, False


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState, lr: float = 3e-4,
              betas=(0.9, 0.999), eps: float = 1e-5, max_grad_norm=0.5):
    """Bias-corrected Adam update. Returns ``(new_params, new_state, StepInfo)``.

    Inputs are left untouched. A non-finite gradient or step aborts the update.
    """
    if grad.shape != params.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match parameters {params.shape}")
    if not np.all(np.isfinite(grad)):
        log.warning("non-finite gradient; update aborted")
        raise NonFiniteError("non-finite gradient; update aborted")
    grad, norm, clipped = clip_by_global_norm(grad, max_grad_norm)
    b1, b2 = betas
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    with np.errstate(invalid="ignore", over="ignore"):
        new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    if not np.all(np.isfinite(new)):
        log.warning("non-finite parameters after step; update aborted")
        raise NonFiniteError("non-finite parameters after step; update aborted")
    return new, AdamState(m, v, t), StepInfo(norm, clipped)
