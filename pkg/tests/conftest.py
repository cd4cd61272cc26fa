"""Shared fixtures: the synthetic benchmark data and imputation runs."""
from __future__ import annotations

import dataclasses
import time

import numpy as np
import pytest

from crot import (
    CrotConfig,
    MixtureSpec,
    RngStream,
    apply_patch_mask,
    crot_impute,
    default_mask_cols,
    generate_batch_pair,
    initialize_missing,
    kmeans_restarts,
    agreement_scores,
    recovery_scores,
)

# Benchmark settings used by the acceptance suite: library defaults except a
# smaller batch and an explicit epsilon matched to the benchmark's cost scale,
# so five seeded runs finish within the stated budgets.
BENCHMARK_CONFIG = CrotConfig(
    epsilon=3.0,
    iterations=150,
    batch_size=256,
    learning_rate=0.25,
    sinkhorn_tol=1e-4,
    k="auto",
    seed=0,
)

BENCHMARK_SEEDS = (0, 1, 2, 3, 4)


def make_benchmark_case(seed: int) -> dict:
    spec = MixtureSpec(seed=seed)
    X1, X2, labels1, labels2 = generate_batch_pair(spec)
    X2_masked, mask, truth_patch = apply_patch_mask(X2, default_mask_cols(spec.n))
    return {
        "seed": seed,
        "spec": spec,
        "X1": X1,
        "X2": X2,
        "labels1": labels1,
        "labels2": labels2,
        "X2_masked": X2_masked,
        "mask": mask,
        "truth_patch": truth_patch,
    }


def _evaluate(case: dict, run) -> dict:
    rec = recovery_scores(case["X2"], run.x2_imputed, case["mask"])
    model = kmeans_restarts(run.x2_imputed, case["spec"].k_true, RngStream(0, "eval"))
    agr = agreement_scores(case["labels2"], model.labels)
    return {"rmse": rec.rmse, "pcc": rec.pcc, "ari": agr.ari}


@pytest.fixture(scope="session")
def benchmark_runs():
    """Five seeded benchmark cases, imputed with alpha=1 and alpha=0."""
    out = []
    for seed in BENCHMARK_SEEDS:
        case = make_benchmark_case(seed)
        init = initialize_missing(
            case["X1"], case["X2_masked"], case["mask"], BENCHMARK_CONFIG.stream("init")
        )
        case["init"] = init
        case["init_scores"] = recovery_scores(case["X2"], init, case["mask"])
        for alpha, key in ((1.0, "a1"), (0.0, "a0")):
            cfg = dataclasses.replace(BENCHMARK_CONFIG, alpha=alpha)
            t0 = time.perf_counter()
            run = crot_impute(case["X1"], case["X2_masked"], case["mask"], cfg)
            elapsed = time.perf_counter() - t0
            case[f"run_{key}"] = run
            case[f"time_{key}"] = elapsed
            case[f"scores_{key}"] = _evaluate(case, run)
        out.append(case)
    return out


def median(values) -> float:
    return float(np.median(np.asarray(values, dtype=float)))
