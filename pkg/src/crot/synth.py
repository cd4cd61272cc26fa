"""Synthetic benchmark pairs: Gaussian mixtures with shared centers, patch masking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataMatrix, MaskSpec, RngStream, ValidationError

_MAX_CENTER_TRIES = 100

# Typical pairwise center distance as a multiple of the separation floor.
# 2.5x keeps the converged OT fixed point (center signal vs unit component
# noise) comfortably inside the benchmark's recovery thresholds.
_SIDE_FACTOR = 2.5


class GenerationError(RuntimeError):
    """Center placement failed within the retry budget."""


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture with k_true components shared by both batches.

    ``separation`` is the minimum pairwise center distance in units of the
    component standard deviation.
    """

    k_true: int = 3
    n: int = 20
    m_per_batch: int = 600
    separation: float = 8.0
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_true < 1:
            raise ValidationError("k_true must be >= 1")
        if self.n < 1 or self.m_per_batch < 1:
            raise ValidationError("n and m_per_batch must be >= 1")
        if not self.separation > 0:
            raise ValidationError("separation must be > 0")
        if not self.sigma > 0:
            raise ValidationError("sigma must be > 0")


def default_mask_cols(n: int) -> tuple[int, ...]:
    """Mask the trailing quarter of the features (at least one column)."""
    start = n - max(1, round(n / 4))
    return tuple(range(start, n))


def _min_pairwise(centers: np.ndarray) -> float:
    diff = centers[:, None, :] - centers[None, :, :]
    d = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def _simplex_coords(k: int, side: float, gen: np.random.Generator) -> np.ndarray:
    """Regular simplex vertices in R^(k-1), randomly oriented, pairwise ``side``."""
    m = np.eye(k) * (side / np.sqrt(2.0))
    m -= m.mean(axis=0)
    # Orthonormal basis of the hyperplane orthogonal to the all-ones direction.
    seedcols = np.concatenate([np.full((k, 1), 1.0 / np.sqrt(k)), np.eye(k)[:, : k - 1]], axis=1)
    w, _ = np.linalg.qr(seedcols)
    coords = m @ w[:, 1:]
    rot, _ = np.linalg.qr(gen.standard_normal((k - 1, k - 1)))
    return coords @ rot


def _even_frame(dims: int, n: int, gen: np.random.Generator) -> np.ndarray | None:
    """Orthonormal rows with identical per-coordinate energy dims/n.

    Rows come in cosine/sine pairs at distinct integer frequencies, whose
    squared entries sum to a constant; an alternating-sign row covers an odd
    leftover when n is even. Returns None when no such frame fits.
    """
    pairs, extra = divmod(dims, 2)
    max_freq = (n - 1) // 2
    if pairs > max_freq or (extra and n % 2 != 0):
        return None
    freqs = gen.choice(np.arange(1, max_freq + 1), size=pairs, replace=False)
    j = np.arange(n)
    rows = []
    for f in freqs:
        angle = 2.0 * np.pi * f * j / n + gen.uniform(0.0, 2.0 * np.pi)
        rows.append(np.sqrt(2.0 / n) * np.cos(angle))
        rows.append(np.sqrt(2.0 / n) * np.sin(angle))
    if extra:
        rows.append(((-1.0) ** j) / np.sqrt(n))
    return np.asarray(rows)


def _draw_centers(spec: MixtureSpec, gen: np.random.Generator) -> np.ndarray:
    """Component centers: a regular simplex embedded with even feature energy.

    Pairwise distances are _SIDE_FACTOR * separation * sigma before jitter,
    so the separation floor holds with margin and the WCSS elbow is unambiguous.
    The sinusoid frame spreads the center signal evenly over coordinates,
    keeping every feature (and hence any masked patch) informative; a random
    rotation of the raw simplex is the fallback when no frame fits.
    """
    k, n = spec.k_true, spec.n
    side = _SIDE_FACTOR * spec.separation * spec.sigma
    floor = spec.separation * spec.sigma
    jitter = 0.05 * floor
    for _ in range(_MAX_CENTER_TRIES):
        if k == 1:
            return spec.sigma * gen.standard_normal((1, n))
        if k <= n:
            coords = _simplex_coords(k, side, gen)
            frame = _even_frame(k - 1, n, gen)
            if frame is None:
                q, _ = np.linalg.qr(gen.standard_normal((n, k - 1)))
                frame = q.T
            centers = coords @ frame + jitter * gen.standard_normal((k, n))
        else:
            scale = side * np.sqrt(1.0 / (2.0 * n))
            centers = scale * gen.standard_normal((k, n))
        if _min_pairwise(centers) >= floor:
            return centers
    raise GenerationError(
        f"could not place {spec.k_true} centers at separation {spec.separation} "
        f"within {_MAX_CENTER_TRIES} tries"
    )


def generate_batch_pair(
    spec: MixtureSpec,
) -> tuple[DataMatrix, DataMatrix, np.ndarray, np.ndarray]:
    """Two batches drawn from the same mixture, with their component labels."""
    root = RngStream(spec.seed, "synth")
    centers = _draw_centers(spec, root.substream("centers").generator())
    names = tuple(f"f{j}" for j in range(spec.n))

    def one_batch(label: str) -> tuple[DataMatrix, np.ndarray]:
        gen = root.substream(label).generator()
        comp = gen.integers(spec.k_true, size=spec.m_per_batch)
        vals = centers[comp] + spec.sigma * gen.standard_normal((spec.m_per_batch, spec.n))
        return DataMatrix(vals, col_names=names), comp

    X1, labels1 = one_batch("batch1")
    X2, labels2 = one_batch("batch2")
    return X1, X2, labels1, labels2


def apply_patch_mask(
    X: DataMatrix, cols: tuple[int, ...] | list[int]
) -> tuple[DataMatrix, MaskSpec, DataMatrix]:
    """Zero the given columns; return the masked matrix, mask and extracted truth."""
    if not len(cols):
        raise ValidationError("mask column set must be non-empty")
    mask = MaskSpec(tuple(int(c) for c in cols))
    mask.validate_for(X)
    idx = mask.cols_array()
    masked_vals = X.values.copy()
    masked_vals[:, idx] = 0.0
    patch_names = (
        tuple(X.col_names[c] for c in mask.missing_cols) if X.col_names else None
    )
    truth_patch = DataMatrix(X.values[:, idx].copy(), col_names=patch_names)
    return DataMatrix(masked_vals, X.col_names, X.row_ids), mask, truth_patch
