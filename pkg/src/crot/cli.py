"""Batch command-line tool: simulate, impute, evaluate, bench.

Exit codes: 0 success, 2 parse failure, 3 validation failure (dimensions,
empty mask, infeasible spec), 4 numeric abort (partial report written).
Diagnostics go to stderr as JSON lines.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
import warnings
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, io
from .clustering import kmeans_restarts
from .core import CrotConfig, MaskSpec, NumericError, RngStream, ValidationError
from .imputer import NumericAbort, crot_impute
from .metrics import agreement_scores, recovery_scores
from .synth import GenerationError, MixtureSpec, apply_patch_mask, generate_batch_pair

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


def _diag(level: str, code: str, message: str, **extra) -> None:
    record = {"level": level, "code": code, "message": message}
    record.update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(record), file=sys.stderr)


@contextmanager
def _warnings_as_diags():
    with warnings.catch_warnings():
        warnings.simplefilter("always")

        def show(message, category, filename, lineno, file=None, line=None):
            _diag("warning", category.__name__, str(message))

        warnings.showwarning = show
        yield


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _check_no_overwrite(inputs: list[Path], outputs: list[Path]) -> None:
    resolved = {p.resolve() for p in inputs}
    for out in outputs:
        if out.resolve() in resolved:
            raise ValidationError(f"output path {out} would overwrite an input")


def _require_files(*paths: str) -> None:
    for p in paths:
        if not Path(p).is_file():
            raise io.ParseError("no such file", p)


def cmd_impute(
    x1_path: str, x2_path: str, mask_path: str, config_path: str, out_dir: str
) -> int:
    started = _utcnow()
    _require_files(x1_path, x2_path, mask_path, config_path)
    cfg = io.read_config(config_path)
    X1 = io.read_matrix_csv(x1_path)
    X2 = io.read_matrix_csv(x2_path)
    mask = io.read_mask_json(mask_path, X2.col_names)
    mask.validate_for(X2, require_nonempty=True)
    if X1.cols != X2.cols:
        raise ValidationError(f"feature counts differ: {X1.cols} vs {X2.cols}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    imputed_path = out / "x2_imputed.csv"
    report_path = out / "report.json"
    manifest_path = out / "manifest.json"
    inputs = [Path(p) for p in (x1_path, x2_path, mask_path, config_path)]
    _check_no_overwrite(inputs, [imputed_path, report_path, manifest_path])

    def write_manifest() -> None:
        doc = {
            "tool_version": __version__,
            "command": ["impute", x1_path, x2_path, mask_path, config_path, out_dir],
            "inputs": {
                "x1": x1_path,
                "x2": x2_path,
                "mask": mask_path,
                "config": config_path,
            },
            "out_dir": str(out),
            "started_at": started,
            "finished_at": _utcnow(),
        }
        with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    try:
        run = crot_impute(X1, X2, mask, cfg)
    except NumericAbort as exc:
        io.write_report(report_path, exc.partial, aborted=True)
        io.write_matrix_csv(imputed_path, exc.partial.x2_imputed)
        write_manifest()
        _diag("error", "numeric_abort", str(exc), report=str(report_path))
        return EXIT_NUMERIC
    io.write_matrix_csv(imputed_path, run.x2_imputed)
    io.write_report(report_path, run)
    write_manifest()
    return EXIT_OK


def cmd_simulate(spec_path: str, out_dir: str) -> int:
    _require_files(spec_path)
    spec, mask_cols = io.read_mixture_spec(spec_path)
    X1, X2, _, labels2 = generate_batch_pair(spec)
    X2_masked, mask, truth_patch = apply_patch_mask(X2, mask_cols)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _check_no_overwrite([Path(spec_path)], [out / "X1.csv"])
    io.write_matrix_csv(out / "X1.csv", X1)
    io.write_matrix_csv(out / "X2_masked.csv", X2_masked)
    io.write_mask_json(out / "mask.json", mask, X2.col_names)
    io.write_matrix_csv(out / "truth.csv", X2)
    io.write_labels_csv(out / "labels.csv", labels2)
    return EXIT_OK


def cmd_evaluate(
    truth_path: str,
    imputed_path: str,
    mask_path: str,
    labels_path: str | None = None,
    seed: int = 0,
) -> int:
    _require_files(truth_path, imputed_path, mask_path)
    if labels_path is not None:
        _require_files(labels_path)
    truth = io.read_matrix_csv(truth_path)
    imputed = io.read_matrix_csv(imputed_path)
    if truth.values.shape != imputed.values.shape:
        raise ValidationError(
            f"shape mismatch: {truth.values.shape} vs {imputed.values.shape}"
        )
    mask = io.read_mask_json(mask_path, truth.col_names)
    mask.validate_for(truth, require_nonempty=True)

    rec = recovery_scores(truth, imputed, mask)
    doc: dict = {"rmse": rec.rmse, "mae": rec.mae, "pcc": rec.pcc}
    if labels_path is not None:
        labels_true = io.read_labels_csv(labels_path)
        if labels_true.shape[0] != imputed.rows:
            raise ValidationError(
                f"{labels_true.shape[0]} labels for {imputed.rows} rows"
            )
        k = int(np.unique(labels_true).size)
        model = kmeans_restarts(
            imputed, min(k, imputed.rows), RngStream(seed, "evaluate-kmeans")
        )
        agr = agreement_scores(labels_true, model.labels)
        doc.update({"ari": agr.ari, "nmi": agr.nmi, "purity": agr.purity})
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_bench(
    sizes: list[int],
    config_path: str,
    batch_sizes: list[int] | None = None,
    features: int = 20,
) -> int:
    _require_files(config_path)
    if sizes != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise ValidationError("sizes must be strictly ascending")
    cfg = io.read_config(config_path)
    # Early stopping off: scaling rows must all pay for the same T iterations.
    cfg = dataclasses.replace(cfg, convergence_rel_tol=1e-300)
    bs_list = batch_sizes if batch_sizes else [cfg.batch_size]

    rows = []
    prev_seconds: float | None = None
    for size in sizes:
        for bs in bs_list:
            spec = MixtureSpec(
                k_true=3, n=features, m_per_batch=size,
                separation=8.0, sigma=1.0, seed=cfg.seed,
            )
            X1, X2, _, _ = generate_batch_pair(spec)
            from .synth import default_mask_cols

            X2_masked, mask, _ = apply_patch_mask(X2, default_mask_cols(features))
            run_cfg = dataclasses.replace(cfg, batch_size=bs)
            t0 = time.perf_counter()
            crot_impute(X1, X2_masked, mask, run_cfg)
            seconds = time.perf_counter() - t0
            ratio = None if prev_seconds is None else seconds / prev_seconds
            rows.append(
                {
                    "m1": size,
                    "batch_size": bs,
                    "iterations": cfg.iterations,
                    "seconds": seconds,
                    "ratio": ratio,
                }
            )
            prev_seconds = seconds
    print(json.dumps({"rows": rows}, indent=2))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crot",
        description="Cluster-regularized optimal-transport imputation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"crot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("impute", help="impute the masked columns of X2 from X1")
    p.add_argument("--x1", required=True, help="complete reference matrix CSV")
    p.add_argument("--x2", required=True, help="incomplete matrix CSV")
    p.add_argument("--mask", required=True, help="mask.json listing missing columns")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="generate a synthetic masked benchmark")
    p.add_argument("--spec", required=True, help="mixture spec file")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("evaluate", help="score an imputed matrix against the truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--imputed", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--labels", default=None, help="true labels CSV for clustering metrics")
    p.add_argument("--seed", type=int, default=0, help="k-means seed for clustering metrics")

    p = sub.add_parser("bench", help="measure wall-clock scaling")
    p.add_argument("--sizes", required=True, help="comma-separated ascending row counts")
    p.add_argument("--batch-sizes", default=None, help="comma-separated batch sizes")
    p.add_argument("--features", type=int, default=20)
    p.add_argument("--config", required=True)
    return parser


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with _warnings_as_diags():
            if args.command == "impute":
                return cmd_impute(args.x1, args.x2, args.mask, args.config, args.out)
            if args.command == "simulate":
                return cmd_simulate(args.spec, args.out)
            if args.command == "evaluate":
                return cmd_evaluate(
                    args.truth, args.imputed, args.mask, args.labels, args.seed
                )
            if args.command == "bench":
                return cmd_bench(
                    _parse_int_list(args.sizes),
                    args.config,
                    _parse_int_list(args.batch_sizes) if args.batch_sizes else None,
                    args.features,
                )
            raise AssertionError(args.command)  # pragma: no cover
    except io.ParseError as exc:
        _diag("error", "parse_error", str(exc), path=exc.path, line=exc.line, col=exc.col)
        return EXIT_PARSE
    except GenerationError as exc:
        _diag("error", "generation_error", str(exc))
        return EXIT_VALIDATION
    except ValidationError as exc:
        _diag("error", "validation_error", str(exc))
        return EXIT_VALIDATION
    except NumericError as exc:
        _diag("error", "numeric_error", str(exc))
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
