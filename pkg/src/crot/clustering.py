"""Lloyd's k-means with k-means++ seeding, centroid extraction, elbow selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataMatrix, RngStream, ValidationError, _generator_of


@dataclass
class ClusterModel:
    """Fitted clustering: labels, per-cluster means, WCSS and member counts.

    Empty clusters are flagged via ``counts`` (zero entries); their centroid
    rows hold the last seed position and carry no members.
    """

    k: int
    labels: np.ndarray
    centroids: DataMatrix
    wcss: float
    iterations_used: int
    counts: np.ndarray


def _sq_dists_to(A: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        np.einsum("ij,ij->i", A, A)[:, None]
        - 2.0 * A @ centers.T
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    return np.maximum(d2, 0.0)


def _plus_plus_seed(A: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    m = A.shape[0]
    centers = np.empty((k, A.shape[1]), dtype=np.float64)
    centers[0] = A[gen.integers(m)]
    d2 = _sq_dists_to(A, centers[:1])[:, 0]
    for s in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = gen.choice(m, p=d2 / total)
        else:
            idx = gen.integers(m)  # all points coincide with chosen centers
        centers[s] = A[idx]
        d2 = np.minimum(d2, _sq_dists_to(A, centers[s : s + 1])[:, 0])
    return centers


def _means(A: np.ndarray, labels: np.ndarray, k: int, fallback: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, A.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, A)
    centers = fallback.copy()
    nonempty = counts > 0
    centers[nonempty] = sums[nonempty] / counts[nonempty, None]
    return centers, counts


def kmeans(
    X: DataMatrix | np.ndarray,
    k: int,
    rng: RngStream | np.random.Generator,
    max_iter: int = 100,
) -> ClusterModel:
    """Lloyd iterations from a k-means++ start until assignments are stable.

    Deterministic given the stream; nearest-centroid ties break toward the
    lowest cluster id.
    """
    A = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    m = A.shape[0]
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > m:
        raise ValidationError(f"k={k} exceeds {m} rows")
    gen = _generator_of(rng)

    centers = _plus_plus_seed(A, k, gen)
    labels = np.argmin(_sq_dists_to(A, centers), axis=1)
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        centers, _ = _means(A, labels, k, centers)
        new_labels = np.argmin(_sq_dists_to(A, centers), axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    centers, counts = _means(A, labels, k, centers)
    wcss = float(((A - centers[labels]) ** 2).sum())
    return ClusterModel(
        k=k,
        labels=labels.astype(np.intp),
        centroids=DataMatrix(centers),
        wcss=wcss,
        iterations_used=iterations,
        counts=counts,
    )


def cluster_centroids(
    X: DataMatrix | np.ndarray, labels: np.ndarray, k: int
) -> tuple[DataMatrix, np.ndarray]:
    """Per-label mean rows; empty clusters are dropped.

    Returns the surviving centroids (possibly fewer than k rows) and the
    parallel array of surviving cluster ids.
    """
    A = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    lab = np.asarray(labels)
    if lab.shape[0] != A.shape[0]:
        raise ValidationError(f"{lab.shape[0]} labels for {A.shape[0]} rows")
    if lab.size and (lab.min() < 0 or lab.max() >= k):
        raise ValidationError(f"labels must lie in [0, {k})")
    counts = np.bincount(lab, minlength=k)
    sums = np.zeros((k, A.shape[1]), dtype=np.float64)
    np.add.at(sums, lab, A)
    surviving = np.flatnonzero(counts > 0)
    centroids = sums[surviving] / counts[surviving, None]
    return DataMatrix(centroids), surviving


def kmeans_restarts(
    X: DataMatrix | np.ndarray,
    k: int,
    rng: RngStream,
    restarts: int = 5,
    max_iter: int = 100,
) -> ClusterModel:
    """Best of several seeded k-means runs by WCSS; deterministic given the stream."""
    best: ClusterModel | None = None
    for r in range(restarts):
        model = kmeans(X, k, rng.substream(f"restart{r}"), max_iter=max_iter)
        if best is None or model.wcss < best.wcss:
            best = model
    assert best is not None
    return best


def elbow_select_k(X: DataMatrix | np.ndarray, k_max: int, rng: RngStream) -> int:
    """Pick k in [2, k_max-1] maximizing the second difference of the WCSS curve.

    Ties break toward smaller k, so a flat curve degenerates to the first
    candidate.
    """
    A = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    if k_max < 3:
        raise ValidationError("k_max must be >= 3")
    if A.shape[0] < k_max:
        raise ValidationError(f"need at least k_max={k_max} rows, got {A.shape[0]}")
    wcss = [kmeans(A, k, rng.substream(f"k{k}")).wcss for k in range(1, k_max + 1)]
    best_k, best_curv = 2, -np.inf
    for k in range(2, k_max):
        curv = wcss[k - 2] - 2.0 * wcss[k - 1] + wcss[k]
        if curv > best_curv:
            best_k, best_curv = k, curv
    return best_k
