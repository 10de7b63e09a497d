"""Central finite-difference checks for scalar losses of a flat parameter vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from esp_marl.nn.autograd import Tensor


@dataclass
class GradCheckResult:
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def relative_error(self) -> float:
        """||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-12)."""
        num = np.linalg.norm(self.analytic - self.numeric)
        den = max(np.linalg.norm(self.analytic) + np.linalg.norm(self.numeric), 1e-12)
        return float(num / den)


def analytic_gradient(fn, x: np.ndarray) -> np.ndarray:
    t = Tensor(np.array(x, dtype=np.float64), requires_grad=True)
    fn(t).backward()
    return np.zeros_like(t.data) if t.grad is None else t.grad


def numeric_gradient(fn, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    flat, g = x.reshape(-1), out.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = float(fn(Tensor(x)).data)
        flat[i] = old - eps
        lo = float(fn(Tensor(x)).data)
        flat[i] = old
        g[i] = (hi - lo) / (2.0 * eps)
    return out


def gradient_check(fn, x: np.ndarray, eps: float = 1e-6) -> GradCheckResult:
    """Compare reverse-mode and central-difference gradients of ``fn(Tensor) -> scalar``."""
    return GradCheckResult(analytic_gradient(fn, x), numeric_gradient(fn, x, eps))
