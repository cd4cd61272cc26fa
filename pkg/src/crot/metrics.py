"""Recovery metrics over masked entries and partition-agreement metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataMatrix, MaskSpec, ValidationError


@dataclass(frozen=True)
class RecoveryScores:
    """RMSE/MAE/PCC over the masked entries; pcc is None when undefined."""

    rmse: float
    mae: float
    pcc: float | None


@dataclass(frozen=True)
class AgreementScores:
    ari: float
    nmi: float
    purity: float


def recovery_scores(truth: DataMatrix, imputed: DataMatrix, mask: MaskSpec) -> RecoveryScores:
    """Score the imputation over exactly the entries all-rows x masked-columns.

    Pearson correlation is left undefined (None) when either flattened entry
    vector is constant, so a constant fill is never silently rewarded.
    """
    if truth.values.shape != imputed.values.shape:
        raise ValidationError(
            f"shape mismatch: {truth.values.shape} vs {imputed.values.shape}"
        )
    mask.validate_for(truth)
    cols = mask.cols_array()
    t = truth.values[:, cols].ravel()
    x = imputed.values[:, cols].ravel()
    diff = x - t
    rmse = float(np.sqrt(np.mean(diff * diff)))
    mae = float(np.mean(np.abs(diff)))
    tc = t - t.mean()
    xc = x - x.mean()
    sst = float(tc @ tc)
    ssx = float(xc @ xc)
    pcc: float | None
    if sst == 0 or ssx == 0:
        pcc = None  # a constant vector has no defined correlation
    else:
        pcc = float(np.clip((tc @ xc) / np.sqrt(sst * ssx), -1.0, 1.0))
    return RecoveryScores(rmse=rmse, mae=mae, pcc=pcc)


def _contingency(labels_true: np.ndarray, labels_pred: np.ndarray) -> np.ndarray:
    _, ti = np.unique(labels_true, return_inverse=True)
    _, pi = np.unique(labels_pred, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def _comb2(x: np.ndarray | float) -> np.ndarray | float:
    return x * (x - 1.0) / 2.0


def agreement_scores(labels_true, labels_pred) -> AgreementScores:
    """ARI (permutation model), NMI (arithmetic normalization) and purity."""
    lt = np.asarray(labels_true).ravel()
    lp = np.asarray(labels_pred).ravel()
    if lt.shape[0] != lp.shape[0]:
        raise ValidationError(f"label lengths differ: {lt.shape[0]} vs {lp.shape[0]}")
    if lt.shape[0] < 2:
        raise ValidationError("need at least 2 labeled points")
    table = _contingency(lt, lp)
    n = lt.shape[0]
    a = table.sum(axis=1).astype(np.float64)
    b = table.sum(axis=0).astype(np.float64)

    index = _comb2(table.astype(np.float64)).sum()
    expected = _comb2(a).sum() * _comb2(b).sum() / _comb2(float(n))
    max_index = 0.5 * (_comb2(a).sum() + _comb2(b).sum())
    denom = max_index - expected
    ari = 1.0 if denom == 0 else float((index - expected) / denom)

    pa = a / n
    pb = b / n
    h_true = float(-(pa[pa > 0] * np.log(pa[pa > 0])).sum())
    h_pred = float(-(pb[pb > 0] * np.log(pb[pb > 0])).sum())
    pij = table / n
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / np.outer(pa, pb)[nz])).sum())
    if h_true == 0 and h_pred == 0:
        nmi = 1.0  # both partitions trivial, hence identical up to relabeling
    else:
        nmi = mi / (0.5 * (h_true + h_pred))
    nmi = float(min(max(nmi, 0.0), 1.0))

    purity = float(table.max(axis=0).sum() / n)
    return AgreementScores(ari=ari, nmi=nmi, purity=purity)
