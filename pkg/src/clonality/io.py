"""File formats and report assembly.

Count data travels as TSV (one file per replicate, or one matrix file);
reports travel as JSON with sorted keys and 17-significant-digit reals, so
identical inputs produce byte-identical files on every platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .combine import REGULARIZERS, MixtureOutcome, clip_unit, inter_clonality
from .errors import (
    DuplicateCloneId,
    EmptyReplicate,
    MalformedLine,
    NegativeCount,
    TooFewReplicates,
)
from .estimators import chao_richness, naive_plugin, pairwise_theta, theta_star
from .model import ReplicateStudy, from_counts

FORMAT_VERSION = "1"

REPORT_NOTES = {
    "t3_matrix_convention": (
        "entries for pairs sharing no replicate are 0; pairs sharing one replicate use "
        "the minimum per-replicate error-norm estimate; diagonal entries use the pair's "
        "own error-norm sum"
    ),
    "t3_alternative_reading": (
        "a literal reading of the source formula would put a replicate index in the "
        "disjoint-pair case; treated as typographical and not implemented"
    ),
}


def _parse_count_line(line: str, path: str, lineno: int) -> tuple[str, int] | None:
    if not line.strip():
        return None
    fields = line.split("\t")
    if len(fields) != 2:
        raise MalformedLine(f"expected 2 tab-separated fields, got {len(fields)}", path, lineno)
    clone, raw = fields[0], fields[1].strip()
    if not clone:
        raise MalformedLine("empty clone id", path, lineno)
    try:
        count = int(raw)
    except ValueError:
        raise MalformedLine(f"count field {raw!r} is not an integer", path, lineno) from None
    if count < 0:
        raise NegativeCount(f"negative count {count} for clone {clone!r}", path, lineno)
    return clone, count


def _read_replicate_file(path: Path) -> dict[str, int]:
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\r\n")
            if lineno == 1 and line.strip():
                fields = line.split("\t")
                if len(fields) == 2:
                    try:
                        int(fields[1].strip())
                    except ValueError:
                        continue  # header row
            parsed = _parse_count_line(line, str(path), lineno)
            if parsed is None:
                continue
            clone, count = parsed
            if clone in counts:
                raise DuplicateCloneId(f"clone {clone!r} appears twice", str(path), lineno)
            counts[clone] = count
    if sum(counts.values()) == 0:
        raise EmptyReplicate(f"replicate file {path} has zero total reads")
    return counts


def _read_matrix_file(path: Path) -> list[dict[str, int]]:
    with open(path, encoding="utf-8") as handle:
        lines = [line.rstrip("\r\n") for line in handle]
    if not lines or not lines[0].strip():
        raise MalformedLine("missing header row", str(path), 1)
    header = lines[0].split("\t")
    n = len(header) - 1
    if n < 2:
        raise TooFewReplicates(f"matrix file {path} has {n} replicate columns, need at least 2")
    per_replicate: list[dict[str, int]] = [{} for _ in range(n)]
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != n + 1:
            raise MalformedLine(f"expected {n + 1} fields, got {len(fields)}", str(path), lineno)
        clone = fields[0]
        if not clone:
            raise MalformedLine("empty clone id", str(path), lineno)
        if clone in seen:
            raise DuplicateCloneId(f"clone {clone!r} appears twice", str(path), lineno)
        seen.add(clone)
        for k, raw in enumerate(fields[1:]):
            try:
                count = int(raw.strip())
            except ValueError:
                raise MalformedLine(f"count field {raw!r} is not an integer", str(path), lineno) from None
            if count < 0:
                raise NegativeCount(f"negative count {count} for clone {clone!r}", str(path), lineno)
            per_replicate[k][clone] = count
    for k, counts in enumerate(per_replicate):
        if sum(counts.values()) == 0:
            raise EmptyReplicate(f"replicate column {header[k + 1]!r} of {path} has zero total reads")
    return per_replicate


def parse_replicates(path, format: str = "tsv-dir") -> ReplicateStudy:
    """Load a replicate study from disk.

    ``tsv-dir`` reads every ``*.tsv`` file in the directory (lexicographic
    filename order = replicate order), each holding ``clone_id<TAB>count``
    rows with an optional header.  ``matrix-tsv`` reads a single file whose
    header names the replicates and whose rows are per-clone counts.
    """
    path = Path(path)
    if format == "tsv-dir":
        files = sorted(p for p in path.iterdir() if p.suffix == ".tsv")
        if len(files) < 2:
            raise TooFewReplicates(f"{path} holds {len(files)} .tsv files, need at least 2")
        return from_counts(_read_replicate_file(f) for f in files)
    if format == "matrix-tsv":
        return from_counts(_read_matrix_file(path))
    raise ValueError(f"unknown format {format!r}; expected tsv-dir or matrix-tsv")


def format_real(x: float) -> str:
    """Serialize a float with 17 significant digits (exact round-trip)."""
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite real {x!r}")
    text = format(float(x), ".17g")
    if "e" not in text and "." not in text:
        text += ".0"
    return text


def dumps_canonical(value, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, fixed float format, ASCII only."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_real(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = ",\n".join(inner + dumps_canonical(v, indent + 1) for v in value)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        items = ",\n".join(
            f"{inner}{json.dumps(str(k), ensure_ascii=True)}: {dumps_canonical(value[k], indent + 1)}"
            for k in sorted(value, key=str)
        )
        return "{\n" + items + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(value).__name__} canonically")


@dataclass(frozen=True)
class ClonalityReport:
    """Full estimation output: final estimate, components, and diagnostics."""

    final: float
    theta_star: float
    naive: float
    chao: float | None
    n: int
    distinct_clones: tuple[int, ...]
    total_reads: tuple[int, ...]
    per_regularizer: Mapping[str, MixtureOutcome]
    config: Mapping[str, object]

    def to_json_dict(self) -> dict:
        per_reg = {}
        for name, outcome in self.per_regularizer.items():
            quintet = outcome.quintet
            per_reg[name] = {
                "final": clip_unit(outcome.final),
                "quintet": {
                    slot: clip_unit(getattr(quintet, slot))
                    for slot in ("theta0", "theta_star", "theta1", "theta2", "theta3")
                },
                "corrected": list(outcome.corrected) if outcome.corrected is not None else None,
                "cov5": [[float(v) for v in row] for row in outcome.cov5] if outcome.cov5 is not None else None,
                "weights": list(outcome.weights) if outcome.weights is not None else None,
                "flags": dict(outcome.flags) | dict(quintet.flags),
            }
        return {
            "format_version": FORMAT_VERSION,
            "final": clip_unit(self.final),
            "theta_star": self.theta_star,
            "naive": self.naive,
            "chao_richness": self.chao,
            "n": self.n,
            "distinct_clones": list(self.distinct_clones),
            "total_reads": list(self.total_reads),
            "per_regularizer": per_reg,
            "config": dict(self.config),
            "notes": dict(REPORT_NOTES),
        }


#: Headline regularizer when several are requested: the raw-profile variant
#: falls back cleanly whenever its covariance model is not credible, which
#: makes it the most robust choice across population shapes.
PRIMARY_REGULARIZER = "shrink"


def build_report(
    study: ReplicateStudy,
    regularizers: Sequence[str] = REGULARIZERS,
    chao_correction: bool = True,
    bias_correction: bool = True,
    config: Mapping[str, object] | None = None,
) -> ClonalityReport:
    """Run the full pipeline on a study and assemble the report.

    The headline estimate comes from ``shrink`` when requested, else from the
    first requested regularizer; every requested one is reported in full.
    """
    table = pairwise_theta(study)
    tstar = theta_star(table)
    outcomes: dict[str, MixtureOutcome] = {}
    for reg in regularizers:
        _, outcome = inter_clonality(
            study, reg, chao_correction=chao_correction, bias_correction=bias_correction
        )
        outcomes[reg] = outcome
    if not outcomes:
        final = tstar
    elif PRIMARY_REGULARIZER in outcomes:
        final = outcomes[PRIMARY_REGULARIZER].final
    else:
        final = outcomes[next(iter(regularizers))].final
    effective_config = {
        "regularizers": list(regularizers),
        "chao_correction": chao_correction,
        "bias_correction": bias_correction,
    }
    if config:
        effective_config.update(config)
    return ClonalityReport(
        final=final,
        theta_star=tstar,
        naive=naive_plugin(study),
        chao=chao_richness(study) if study.n >= 2 else None,
        n=study.n,
        distinct_clones=tuple(rep.distinct_clones for rep in study.replicates),
        total_reads=tuple(rep.total_reads for rep in study.replicates),
        per_regularizer=outcomes,
        config=effective_config,
    )


def write_report(report: ClonalityReport, path) -> None:
    """Write a report as canonical JSON (byte-identical for identical inputs)."""
    text = dumps_canonical(report.to_json_dict()) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
