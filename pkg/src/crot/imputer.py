"""End-to-end cluster-regularized OT imputation.

The run initializes the missing columns from the reference batch's column
means plus unit Gaussian noise, then repeatedly samples one batch from each
side, clusters both, and descends the combined divergence (data term plus
alpha times the centroid term) on the sampled rows' masked entries with Adam.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import ot
from .clustering import cluster_centroids, elbow_select_k, kmeans
from .core import (
    AUTO,
    CrotConfig,
    DataMatrix,
    MaskSpec,
    NumericError,
    RngStream,
    ValidationError,
    sample_indices,
    warn,
)
from .optim import RowwiseAdam

_EPS_SAMPLE_ROWS = 256


@dataclass(frozen=True)
class LossRecord:
    iteration: int
    data_term: float
    cluster_term: float
    total: float


@dataclass
class ImputationRun:
    """Completed matrix plus the run's loss history and resolved settings."""

    x2_imputed: DataMatrix
    loss_history: list[LossRecord]
    k_used: int
    converged_at: int | None
    wall_clock_ms: float
    config_echo: CrotConfig
    epsilon_used: float


class NumericAbort(NumericError):
    """Raised when the loss or gradient turns non-finite; carries the last finite state."""

    def __init__(self, message: str, partial: ImputationRun) -> None:
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class CrotLossResult:
    total: float
    data_term: float
    cluster_term: float
    grad: np.ndarray  # rows of the X2 batch x all columns; zero outside mutable cols


def initialize_missing(
    X1: DataMatrix, X2: DataMatrix, mask: MaskSpec, rng: RngStream
) -> DataMatrix:
    """Fill each masked entry with the reference column mean plus N(0, 1) noise."""
    if X1.cols != X2.cols:
        raise ValidationError(f"feature counts differ: {X1.cols} vs {X2.cols}")
    if X1.rows == 0:
        raise ValidationError("reference matrix has no rows")
    mask.validate_for(X2, require_nonempty=False)
    out = X2.values.copy()
    if not mask.is_empty:
        cols = mask.cols_array()
        rows = mask.scope_rows(X2.rows)
        means = X1.values[:, cols].mean(axis=0)
        noise = rng.generator().standard_normal((rows.size, cols.size))
        out[np.ix_(rows, cols)] = means[None, :] + noise
    return DataMatrix(out, X2.col_names, X2.row_ids)


def crot_loss(
    X1_batch: DataMatrix | np.ndarray,
    X2_batch: DataMatrix | np.ndarray,
    mutable_cols: np.ndarray | list[int],
    cfg: CrotConfig,
    rng: RngStream,
) -> CrotLossResult:
    """Cluster both batches, then evaluate the combined loss and its gradient."""
    if cfg.k == AUTO:
        raise ValidationError("crot_loss requires a resolved (numeric) k")
    A = X1_batch.values if isinstance(X1_batch, DataMatrix) else np.asarray(X1_batch, float)
    B = X2_batch.values if isinstance(X2_batch, DataMatrix) else np.asarray(X2_batch, float)
    labels1 = labels2 = None
    if cfg.alpha > 0:
        k_eff = min(int(cfg.k), A.shape[0], B.shape[0])
        if k_eff < int(cfg.k):
            warn(f"k={cfg.k} clamped to {k_eff} (batch rows)")
        # One shared stream: identical batches then get identical partitions,
        # so the centroid term cancels exactly at the self-identity point.
        seeding = rng.substream("kmeans")
        labels1 = kmeans(A, k_eff, seeding).labels
        labels2 = kmeans(B, k_eff, seeding).labels
    return crot_loss_given_labels(A, B, labels1, labels2, mutable_cols, cfg)


def crot_loss_given_labels(
    X1_batch: DataMatrix | np.ndarray,
    X2_batch: DataMatrix | np.ndarray,
    labels1: np.ndarray | None,
    labels2: np.ndarray | None,
    mutable_cols: np.ndarray | list[int],
    cfg: CrotConfig,
) -> CrotLossResult:
    """Loss and gradient with cluster assignments held fixed.

    The centroid term's gradient flows through the per-cluster averaging only
    (1/|cluster| per member row); assignments are treated as constants. With
    fewer than two surviving clusters on either side the term contributes
    zero, which also covers alpha = 0 where clustering is skipped entirely.
    """
    A = X1_batch.values if isinstance(X1_batch, DataMatrix) else np.asarray(X1_batch, float)
    B = X2_batch.values if isinstance(X2_batch, DataMatrix) else np.asarray(X2_batch, float)
    if A.shape[1] != B.shape[1]:
        raise ValidationError(f"feature counts differ: {A.shape[1]} vs {B.shape[1]}")
    cols = np.asarray(mutable_cols, dtype=np.intp)

    data_term, grad = ot.divergence_value_and_grad(A, B, cols, cfg)

    cluster_term = 0.0
    if cfg.alpha > 0 and labels1 is not None and labels2 is not None:
        k_eff = int(max(labels1.max(), labels2.max())) + 1
        C1, _ = cluster_centroids(A, labels1, k_eff)
        C2, ids2 = cluster_centroids(B, labels2, k_eff)
        if C1.rows >= 2 and C2.rows >= 2:
            cluster_term, grad_c2 = ot.divergence_value_and_grad(
                C1.values, C2.values, cols, cfg
            )
            counts2 = np.bincount(labels2, minlength=k_eff)
            pos = np.searchsorted(ids2, labels2)  # every label's cluster survives
            grad += cfg.alpha * grad_c2[pos] / counts2[labels2][:, None]

    total = data_term + cfg.alpha * cluster_term
    return CrotLossResult(
        total=float(total),
        data_term=float(data_term),
        cluster_term=float(cluster_term),
        grad=grad,
    )


class _EpochSampler:
    """Shuffled-epoch batch sampler over range(m).

    Batches are consecutive slices of concatenated random permutations, so
    after T batches of size l every index has appeared at least
    floor(T*l/m) times. A batch spanning an epoch boundary deduplicates by
    swapping repeats deeper into the new permutation.
    """

    def __init__(self, m: int, rng: RngStream) -> None:
        self._m = m
        self._gen = rng.generator()
        self._perm = self._gen.permutation(m)
        self._pos = 0

    def next_batch(self, l: int) -> np.ndarray:
        take = min(l, self._m - self._pos)
        batch = list(self._perm[self._pos : self._pos + take])
        self._pos += take
        if len(batch) < l:
            fresh = list(self._gen.permutation(self._m))
            seen = set(batch)
            i = 0
            while len(batch) < l:
                if fresh[i] not in seen:
                    batch.append(fresh[i])
                    seen.add(fresh[i])
                    fresh[i] = -1  # consumed
                i += 1
            self._perm = np.asarray([x for x in fresh if x >= 0], dtype=np.intp)
            self._pos = 0
        return np.asarray(batch, dtype=np.intp)


def _resolve_k(X1: DataMatrix, cfg: CrotConfig) -> int:
    if cfg.k != AUTO:
        return int(cfg.k)
    k_max = min(cfg.k_max, X1.rows)
    if k_max < 3:
        warn(f"too few rows ({X1.rows}) for elbow selection; using k=1")
        return 1
    if k_max < cfg.k_max:
        warn(f"k_max clamped from {cfg.k_max} to {k_max} (rows of X1)")
    return elbow_select_k(X1, k_max, cfg.stream("elbow"))


def _resolve_epsilon(X1: DataMatrix, cfg: CrotConfig) -> float:
    if cfg.epsilon != AUTO:
        return float(cfg.epsilon)
    m = X1.rows
    if m > _EPS_SAMPLE_ROWS:
        idx = sample_indices(m, _EPS_SAMPLE_ROWS, cfg.stream("epsilon"))
        sample = X1.values[idx]
    else:
        sample = X1.values
    return ot.auto_epsilon(ot.cost_matrix(sample, sample, cfg.p))


def crot_impute(
    X1: DataMatrix, X2: DataMatrix, mask: MaskSpec, cfg: CrotConfig
) -> ImputationRun:
    """Run the full iterative imputation; observed entries are never touched.

    Early stopping compares the window mean of the total loss against the
    mean one window earlier; the run also stops at ``cfg.iterations``. On a
    non-finite loss or gradient the run aborts with the last finite state
    attached to the raised :class:`NumericAbort`.
    """
    t0 = time.perf_counter()
    if X1.cols != X2.cols:
        raise ValidationError(f"feature counts differ: {X1.cols} vs {X2.cols}")
    mask.validate_for(X2, require_nonempty=False)

    if mask.is_empty:
        return ImputationRun(
            x2_imputed=X2.copy(),
            loss_history=[],
            k_used=0,
            converged_at=0,
            wall_clock_ms=(time.perf_counter() - t0) * 1000.0,
            config_echo=cfg,
            epsilon_used=0.0,
        )

    m1, m2 = X1.rows, X2.rows
    l = min(cfg.batch_size, m1, m2)
    if l < cfg.batch_size:
        warn(f"batch_size clamped from {cfg.batch_size} to {l} (row counts)")
    k = _resolve_k(X1, cfg)
    if k > l:
        warn(f"k={k} exceeds batch size {l}; clustering will clamp to {l}")
    eps = _resolve_epsilon(X1, cfg)
    run_cfg = replace(cfg, epsilon=eps, k=k, batch_size=l)

    if cfg.iterations * l < m2:
        warn(
            f"T*l = {cfg.iterations * l} < {m2} rows: some rows keep their "
            "initialization (under-covered)"
        )

    x2 = initialize_missing(X1, X2, mask, cfg.stream("init"))
    W = x2.values  # mutated in place; observed entries never written
    cols = mask.cols_array()
    in_scope = np.zeros(m2, dtype=bool)
    in_scope[mask.scope_rows(m2)] = True

    adam = RowwiseAdam((m2, cols.size), cfg)
    sampler = _EpochSampler(m2, cfg.stream("sample-l"))
    gen_k = cfg.stream("sample-k").generator()

    history: list[LossRecord] = []
    totals: list[float] = []
    converged_at: int | None = None
    window = cfg.convergence_window

    def finish(at: int | None) -> ImputationRun:
        return ImputationRun(
            x2_imputed=DataMatrix(W, X2.col_names, X2.row_ids),
            loss_history=history,
            k_used=k,
            converged_at=at,
            wall_clock_ms=(time.perf_counter() - t0) * 1000.0,
            config_echo=cfg,
            epsilon_used=eps,
        )

    for t in range(1, cfg.iterations + 1):
        K = sample_indices(m1, l, gen_k)
        L = sampler.next_batch(l)
        try:
            res = crot_loss(X1.values[K], W[L], cols, run_cfg, cfg.stream(f"iter{t}"))
        except (ValidationError, ValueError, FloatingPointError) as exc:
            # Inputs were validated up front, so a failure here means the
            # iterate overflowed (e.g. squared costs past float range).
            raise NumericAbort(
                f"numeric breakdown at iteration {t}: {exc}", finish(None)
            ) from exc
        if not (np.isfinite(res.total) and np.all(np.isfinite(res.grad))):
            raise NumericAbort(
                f"non-finite loss or gradient at iteration {t}", finish(None)
            )
        history.append(
            LossRecord(
                iteration=t,
                data_term=res.data_term,
                cluster_term=res.cluster_term,
                total=res.total,
            )
        )
        totals.append(res.total)

        upd = in_scope[L]
        if np.any(upd):
            delta = adam.step_rows(L[upd], res.grad[np.ix_(upd, cols)])
            W[np.ix_(L[upd], cols)] -= delta

        if t >= 2 * window:
            ma_now = float(np.mean(totals[-window:]))
            ma_prev = float(np.mean(totals[-2 * window : -window]))
            if abs(ma_now - ma_prev) <= cfg.convergence_rel_tol * max(abs(ma_prev), 1e-12):
                converged_at = t
                break

    return finish(converged_at)
