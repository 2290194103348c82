"""Command-line interface: estimate, simulate, benchmark."""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path
from typing import Sequence

from . import io
from .combine import REGULARIZERS, PROFILE_FOR_METHOD
from .covariance import build_T, build_sigma0, regularize_replicate_cov
from .errors import ClonalityError
from .estimators import chao_richness, epsilon_profile, pairwise_theta, theta_star
from .model import ReplicateStudy
from .simulate import (
    DEFAULT_CELLS,
    PopulationSpec,
    ReplicateSpec,
    run_experiment,
    simulate_study,
)

FULL_SCALE_CLONES = 200_000


def _parse_cells(text: str) -> tuple[int, ...]:
    try:
        cells = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--cells expects comma-separated integers, got {text!r}") from None
    if any(c < 1 for c in cells):
        raise argparse.ArgumentTypeError("--cells entries must be positive")
    return cells


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=("zipf", "pareto"), default="pareto")
    parser.add_argument("--clones", type=int, default=20_000, help="population richness")
    parser.add_argument("--zipf-r", type=float, default=0.7, help="power-law exponent in [0, 1]")
    parser.add_argument("--replicates", type=int, default=None, help="number of replicates")
    parser.add_argument(
        "--cells",
        type=_parse_cells,
        default=None,
        help="comma-separated cells per replicate (default: 1000 x 6, 10000 x 2)",
    )
    parser.add_argument(
        "--depth-jitter",
        action="store_true",
        help="scale each replicate's Poisson means by a random heavy-tailed depth factor",
    )


def _resolve_replicate_spec(args) -> ReplicateSpec:
    cells = args.cells
    if cells is None:
        n = args.replicates if args.replicates is not None else len(DEFAULT_CELLS)
        cells = DEFAULT_CELLS if n == len(DEFAULT_CELLS) else (1000,) * n
    elif args.replicates is not None and args.replicates != len(cells):
        raise ClonalityError(
            f"--replicates {args.replicates} disagrees with {len(cells)} --cells entries"
        )
    return ReplicateSpec(cell_counts=cells, depth_jitter=args.depth_jitter)


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    generated = int.from_bytes(os.urandom(4), "big")
    print(f"no --seed given; using generated seed {generated}", file=sys.stderr)
    return generated


def _regularizer_list(choice: str) -> tuple[str, ...]:
    return REGULARIZERS if choice == "all" else (choice,)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clonality", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate clonality from replicate count files")
    est.add_argument("--input", required=True, help="tsv directory or matrix file")
    est.add_argument("--format", choices=("tsv-dir", "matrix-tsv"), default="tsv-dir")
    est.add_argument("--regularizer", choices=REGULARIZERS + ("all",), default="all")
    est.add_argument("--no-chao-correction", action="store_true")
    est.add_argument("--no-bias-correction", action="store_true")
    est.add_argument("--output", default=None, help="report path (default: stdout)")
    est.add_argument("--dump-matrices", default=None, metavar="DIR", help="write covariance TSVs")

    sim = sub.add_parser("simulate", help="write one synthetic study as a tsv directory")
    _add_model_args(sim)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--output", required=True, help="directory for replicate TSVs and truth.json")

    bench = sub.add_parser("benchmark", help="Monte-Carlo estimator comparison")
    bench.add_argument("--runs", type=int, default=200)
    _add_model_args(bench)
    bench.add_argument("--regularizer", choices=REGULARIZERS + ("all",), default="all")
    bench.add_argument("--no-chao-correction", action="store_true")
    bench.add_argument("--no-bias-correction", action="store_true")
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--csv", default=None, help="per-run results table")
    bench.add_argument("--summary", default=None, help="JSON summary path (default: stdout)")
    bench.add_argument("--full-scale", action="store_true", help=f"use {FULL_SCALE_CLONES} clones")
    bench.add_argument("--workers", type=int, default=1)
    return parser


def _dump_matrices(study: ReplicateStudy, regularizers, chao_correction: bool, out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = pairwise_theta(study)
    tstar = theta_star(table)
    chao = chao_richness(study) if chao_correction else None
    for reg in regularizers:
        rep_cov = regularize_replicate_cov(study, tstar, chao, reg)
        _write_matrix(out / f"{reg}_replicate_cov.tsv", rep_cov, [str(i) for i in range(study.n)])
        if study.n < 4:
            continue
        profile = epsilon_profile(study, tstar, PROFILE_FOR_METHOD[reg], chao)
        sigma0 = build_sigma0(profile, study.n)
        labels = [f"{k}-{l}" for k, l in sigma0.pair_index]
        _write_matrix(out / f"{reg}_pair_cov.tsv", sigma0.matrix, labels)
        for kind in ("T1", "T2", "T3"):
            t = build_T(kind, sigma0, profile)
            _write_matrix(out / f"{reg}_{kind.lower()}.tsv", t.matrix, labels)


def _write_matrix(path: Path, matrix, labels: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\t".join([""] + labels) + "\n")
        for label, row in zip(labels, matrix):
            handle.write("\t".join([label] + [io.format_real(float(v)) for v in row]) + "\n")


def _cmd_estimate(args) -> int:
    study = io.parse_replicates(args.input, args.format)
    regularizers = _regularizer_list(args.regularizer)
    report = io.build_report(
        study,
        regularizers=regularizers,
        chao_correction=not args.no_chao_correction,
        bias_correction=not args.no_bias_correction,
        config={"input": str(args.input), "format": args.format},
    )
    if args.dump_matrices:
        _dump_matrices(study, regularizers, not args.no_chao_correction, args.dump_matrices)
        if report.per_regularizer:
            for reg, outcome in report.per_regularizer.items():
                if outcome.cov5 is not None:
                    _write_matrix(
                        Path(args.dump_matrices) / f"{reg}_cov5.tsv",
                        outcome.cov5,
                        ["theta0", "theta_star", "theta1", "theta2", "theta3"],
                    )
    if args.output:
        io.write_report(report, args.output)
    else:
        print(io.dumps_canonical(report.to_json_dict()))
    return 0


def _cmd_simulate(args) -> int:
    pop_spec = PopulationSpec(
        model=args.model, clones=args.clones, zipf_r=args.zipf_r
    )
    rep_spec = _resolve_replicate_spec(args)
    seed = _resolve_seed(args.seed)
    study, true_theta = simulate_study(pop_spec, rep_spec, seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(rep_spec.n))
    for k, rep in enumerate(study.replicates):
        path = out / f"replicate_{k + 1:0{width}d}.tsv"
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("clone_id\tcount\n")
            for clone in sorted(rep.counts):
                handle.write(f"{clone}\t{rep.counts[clone]}\n")
    truth = {
        "theta": true_theta,
        "model": args.model,
        "clones": args.clones,
        "zipf_r": args.zipf_r if args.model == "zipf" else None,
        "cells": list(rep_spec.cell_counts),
        "depth_jitter": rep_spec.depth_jitter,
        "seed": seed,
    }
    with open(out / "truth.json", "w", encoding="utf-8", newline="\n") as handle:
        handle.write(io.dumps_canonical(truth) + "\n")
    return 0


def _cmd_benchmark(args) -> int:
    clones = FULL_SCALE_CLONES if args.full_scale else args.clones
    pop_spec = PopulationSpec(model=args.model, clones=clones, zipf_r=args.zipf_r)
    rep_spec = _resolve_replicate_spec(args)
    seed = _resolve_seed(args.seed)
    regularizers = _regularizer_list(args.regularizer)
    result = run_experiment(
        pop_spec,
        rep_spec,
        runs=args.runs,
        regularizers=regularizers,
        seed=seed,
        workers=args.workers,
        chao_correction=not args.no_chao_correction,
        bias_correction=not args.no_bias_correction,
    )
    if args.csv:
        _write_benchmark_csv(result, args.csv)
    summary = {
        "mse": dict(result.mse),
        "ratio_vs_theta_star": dict(result.ratio),
        "diagnostics": dict(result.diagnostics),
        "seed": seed,
        "config": {
            "runs": args.runs,
            "model": args.model,
            "clones": clones,
            "zipf_r": args.zipf_r if args.model == "zipf" else None,
            "cells": list(rep_spec.cell_counts),
            "depth_jitter": rep_spec.depth_jitter,
            "regularizers": list(regularizers),
            "chao_correction": not args.no_chao_correction,
            "bias_correction": not args.no_bias_correction,
            "workers": args.workers,
        },
    }
    text = io.dumps_canonical(summary) + "\n"
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _write_benchmark_csv(result, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["run", "estimator", "regularizer", "true_theta", "estimate", "sq_error"])
        for rec in result.per_run:
            if rec.error is not None:
                writer.writerow([rec.run, "error", "", "", "", rec.error])
                continue
            for name in sorted(rec.estimates):
                reg = name.removeprefix("final_") if name.startswith("final_") else ""
                est = rec.estimates[name]
                sq = (est - rec.true_theta) ** 2
                writer.writerow(
                    [rec.run, name, reg, io.format_real(rec.true_theta),
                     io.format_real(est), io.format_real(sq)]
                )


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns 0 on success, 2 on usage errors, 1 on data errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_benchmark(args)
    except (ClonalityError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(cli_main())
