"""Adam updates for the mutable (imputed) entries only."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CrotConfig, NumericError, ValidationError


@dataclass
class AdamState:
    """Moment accumulators for one block of mutable entries.

    ``t`` counts the steps this block has received; bias correction uses it,
    so blocks updated at different frequencies stay independently calibrated.
    """

    m: np.ndarray
    v: np.ndarray
    t: int
    hyper: tuple[float, float, float, float]  # (learning_rate, beta1, beta2, eps)

    @classmethod
    def fresh(cls, shape: tuple[int, ...], cfg: CrotConfig) -> "AdamState":
        return cls(
            m=np.zeros(shape),
            v=np.zeros(shape),
            t=0,
            hyper=(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
        )


def adam_step(state: AdamState, grad: np.ndarray) -> tuple[AdamState, np.ndarray]:
    """One Adam step; returns the new state and the update the caller subtracts."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != state.m.shape:
        raise ValidationError(f"gradient shape {g.shape} != state shape {state.m.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite gradient passed to Adam")
    lr, b1, b2, eps = state.hyper
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * g
    v = b2 * state.v + (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    delta = lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(m=m, v=v, t=t, hyper=state.hyper), delta


class RowwiseAdam:
    """Adam over a (rows x cols) mutable block where rows step at their own pace.

    Each row carries its own step counter; stepping a subset of rows is
    exactly equivalent to running ``adam_step`` on those rows' individual
    states, and untouched rows keep their moments frozen.
    """

    def __init__(self, shape: tuple[int, int], cfg: CrotConfig) -> None:
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = np.zeros(shape[0], dtype=np.int64)
        self.hyper = (cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)

    def step_rows(self, rows: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Advance the given rows by one step; returns their update block."""
        rows = np.asarray(rows, dtype=np.intp)
        g = np.asarray(grad, dtype=np.float64)
        if g.shape != (rows.size, self.m.shape[1]):
            raise ValidationError(
                f"gradient shape {g.shape} != ({rows.size}, {self.m.shape[1]})"
            )
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient passed to Adam")
        lr, b1, b2, eps = self.hyper
        t = self.t[rows] + 1
        m = b1 * self.m[rows] + (1.0 - b1) * g
        v = b2 * self.v[rows] + (1.0 - b2) * g * g
        self.m[rows] = m
        self.v[rows] = v
        self.t[rows] = t
        corr1 = 1.0 - b1 ** t.astype(np.float64)
        corr2 = 1.0 - b2 ** t.astype(np.float64)
        return lr * (m / corr1[:, None]) / (np.sqrt(v / corr2[:, None]) + eps)
