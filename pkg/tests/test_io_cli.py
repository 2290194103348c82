import json
from pathlib import Path

import pytest

from clonality import (
    DuplicateCloneId,
    EmptyReplicate,
    MalformedLine,
    NegativeCount,
    TooFewReplicates,
    build_report,
    from_counts,
    parse_replicates,
    write_report,
)
from clonality.cli import cli_main
from clonality.io import dumps_canonical, format_real
from clonality.simulate import PopulationSpec, ReplicateSpec, simulate_study


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def make_dir(tmp_path: Path, files: dict[str, str]) -> Path:
    d = tmp_path / "study"
    d.mkdir(parents=True)
    for name, text in files.items():
        write(d / name, text)
    return d


def test_parse_tsv_dir_round_trip(tmp_path):
    d = make_dir(tmp_path, {"r1.tsv": "a\t2\nb\t2\n", "r2.tsv": "a\t1\nc\t3\n"})
    study = parse_replicates(d, "tsv-dir")
    direct = from_counts([{"a": 2, "b": 2}, {"a": 1, "c": 3}])
    assert [r.counts for r in study.replicates] == [r.counts for r in direct.replicates]
    assert study.universe == direct.universe


def test_parse_tsv_dir_orders_files_lexicographically(tmp_path):
    d = make_dir(tmp_path, {"b.tsv": "x\t1\n", "a.tsv": "y\t2\n"})
    study = parse_replicates(d, "tsv-dir")
    assert study.replicates[0].counts == {"y": 2}
    assert study.replicates[1].counts == {"x": 1}


def test_parse_tsv_dir_header_and_crlf(tmp_path):
    d = make_dir(
        tmp_path,
        {"r1.tsv": "clone_id\tcount\r\na\t2\r\nb\t2\r\n", "r2.tsv": "a\t4\n"},
    )
    study = parse_replicates(d, "tsv-dir")
    assert study.replicates[0].counts == {"a": 2, "b": 2}


def test_parse_tsv_dir_ignores_non_tsv_files(tmp_path):
    d = make_dir(tmp_path, {"r1.tsv": "a\t1\n", "r2.tsv": "b\t1\n", "truth.json": "{}"})
    assert parse_replicates(d, "tsv-dir").n == 2


def test_parse_negative_count_reports_location(tmp_path):
    d = make_dir(tmp_path, {"r1.tsv": "a\t2\nx\t-1\n", "r2.tsv": "a\t1\n"})
    with pytest.raises(NegativeCount) as err:
        parse_replicates(d, "tsv-dir")
    assert "r1.tsv" in str(err.value) and ":2" in str(err.value)


def test_parse_duplicate_clone_not_summed(tmp_path):
    d = make_dir(tmp_path, {"r1.tsv": "a\t2\na\t3\n", "r2.tsv": "a\t1\n"})
    with pytest.raises(DuplicateCloneId):
        parse_replicates(d, "tsv-dir")


def test_parse_malformed_line(tmp_path):
    d = make_dir(tmp_path, {"r1.tsv": "a\t1\tzzz\n", "r2.tsv": "a\t1\n"})
    with pytest.raises(MalformedLine):
        parse_replicates(d, "tsv-dir")
    # a non-numeric second field on the FIRST line is a header, not an error
    d2 = make_dir(tmp_path / "x", {"r1.tsv": "a\t1\nb\tnope\n", "r2.tsv": "a\t1\n"})
    with pytest.raises(MalformedLine):
        parse_replicates(d2, "tsv-dir")


def test_parse_empty_replicate(tmp_path):
    d = make_dir(tmp_path, {"r1.tsv": "a\t0\n", "r2.tsv": "a\t1\n"})
    with pytest.raises(EmptyReplicate):
        parse_replicates(d, "tsv-dir")


def test_parse_requires_two_files(tmp_path):
    d = make_dir(tmp_path, {"r1.tsv": "a\t1\n"})
    with pytest.raises(TooFewReplicates):
        parse_replicates(d, "tsv-dir")


def test_parse_matrix_tsv(tmp_path):
    path = write(
        tmp_path / "m.tsv",
        "clone_id\trep1\trep2\na\t2\t1\nb\t2\t0\nc\t0\t3\n",
    )
    study = parse_replicates(path, "matrix-tsv")
    direct = from_counts([{"a": 2, "b": 2}, {"a": 1, "c": 3}])
    assert [r.counts for r in study.replicates] == [r.counts for r in direct.replicates]


def test_parse_matrix_tsv_errors(tmp_path):
    with pytest.raises(TooFewReplicates):
        parse_replicates(write(tmp_path / "one.tsv", "clone_id\trep1\na\t2\n"), "matrix-tsv")
    with pytest.raises(DuplicateCloneId):
        parse_replicates(
            write(tmp_path / "dup.tsv", "clone_id\tr1\tr2\na\t2\t1\na\t1\t1\n"), "matrix-tsv"
        )
    with pytest.raises(MalformedLine):
        parse_replicates(
            write(tmp_path / "bad.tsv", "clone_id\tr1\tr2\na\t2\n"), "matrix-tsv"
        )
    with pytest.raises(ValueError):
        parse_replicates(tmp_path, "parquet")


def test_format_real_round_trips_exactly():
    values = [0.1, 1 / 3, 2.0, 1e-300, 6.02e23, -0.25, 49 / 121, 5e-324]
    for v in values:
        assert float(format_real(v)) == v
    assert format_real(2.0) == "2.0"
    with pytest.raises(ValueError):
        format_real(float("nan"))


def test_dumps_canonical_sorts_keys_and_formats():
    text = dumps_canonical({"b": 1, "a": [1.5, None, True]})
    assert text.index('"a"') < text.index('"b"')
    assert "1.5" in text and "null" in text and "true" in text
    with pytest.raises(TypeError):
        dumps_canonical({"x": object()})


@pytest.fixture(scope="module")
def small_study():
    study, _ = simulate_study(
        PopulationSpec("zipf", 300, zipf_r=0.8), ReplicateSpec((150,) * 6), 31, 0
    )
    return study


def test_report_round_trip_exact(tmp_path, small_study):
    report = build_report(small_study)
    path = tmp_path / "report.json"
    write_report(report, path)
    parsed = json.loads(path.read_text())
    assert parsed["final"] == report.to_json_dict()["final"]
    assert parsed["theta_star"] == report.theta_star
    assert parsed["naive"] == report.naive
    for reg, entry in parsed["per_regularizer"].items():
        assert entry["quintet"]["theta_star"] == report.per_regularizer[reg].quintet.theta_star
    assert parsed["format_version"] == "1"


def test_report_bytes_stable(tmp_path, small_study):
    report = build_report(small_study)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_report(report, p1)
    write_report(build_report(small_study), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_report_missing_directory_raises(tmp_path, small_study):
    report = build_report(small_study)
    with pytest.raises(OSError):
        write_report(report, tmp_path / "nope" / "report.json")


def test_cli_simulate_estimate_pipeline_deterministic(tmp_path):
    sim_dir = tmp_path / "sim"
    args = [
        "simulate", "--model", "zipf", "--clones", "400", "--zipf-r", "0.9",
        "--cells", "200,200,200,200,200,200", "--seed", "7", "--output", str(sim_dir),
    ]
    assert cli_main(args) == 0
    truth = json.loads((sim_dir / "truth.json").read_text())
    assert truth["seed"] == 7 and 0 < truth["theta"] <= 1
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert cli_main(["estimate", "--input", str(sim_dir), "--output", str(out1)]) == 0
    assert cli_main(["estimate", "--input", str(sim_dir), "--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    report = json.loads(out1.read_text())
    assert report["n"] == 6
    assert 0.0 <= report["final"] <= 1.0


def test_cli_estimate_matches_in_memory_pipeline(tmp_path):
    sim_dir = tmp_path / "sim"
    assert cli_main([
        "simulate", "--model", "zipf", "--clones", "300", "--zipf-r", "0.5",
        "--cells", "150,150,150,150,150", "--seed", "3", "--output", str(sim_dir),
    ]) == 0
    out = tmp_path / "report.json"
    assert cli_main(["estimate", "--input", str(sim_dir), "--output", str(out)]) == 0
    from_files = json.loads(out.read_text())

    study, _ = simulate_study(
        PopulationSpec("zipf", 300, zipf_r=0.5), ReplicateSpec((150,) * 5), 3
    )
    in_memory = build_report(study).to_json_dict()
    for key in ("final", "theta_star", "naive", "chao_richness", "per_regularizer"):
        assert from_files[key] == in_memory[key], key


def test_cli_estimate_small_study_flags_fallback(tmp_path):
    d = make_dir(tmp_path, {
        "r1.tsv": "a\t5\nb\t3\n", "r2.tsv": "a\t4\nb\t2\n", "r3.tsv": "a\t1\nb\t1\n",
    })
    out = tmp_path / "r.json"
    assert cli_main(["estimate", "--input", str(d), "--output", str(out)]) == 0
    report = json.loads(out.read_text())
    flags = report["per_regularizer"]["shrink"]["flags"]
    assert flags["mixture"] == "fallback-too-few-replicates"
    assert report["final"] == report["theta_star"]


def test_cli_estimate_single_regularizer_and_dump(tmp_path):
    sim_dir = tmp_path / "sim"
    assert cli_main([
        "simulate", "--model", "zipf", "--clones", "200", "--zipf-r", "0.4",
        "--cells", "100,100,100,100,100", "--seed", "2", "--output", str(sim_dir),
    ]) == 0
    dump = tmp_path / "mats"
    out = tmp_path / "r.json"
    assert cli_main([
        "estimate", "--input", str(sim_dir), "--regularizer", "soft",
        "--no-chao-correction", "--output", str(out), "--dump-matrices", str(dump),
    ]) == 0
    report = json.loads(out.read_text())
    assert list(report["per_regularizer"]) == ["soft"]
    assert report["config"]["chao_correction"] is False
    names = {p.name for p in dump.iterdir()}
    assert {"soft_pair_cov.tsv", "soft_t1.tsv", "soft_t2.tsv", "soft_t3.tsv",
            "soft_replicate_cov.tsv", "soft_cov5.tsv"} <= names
    header = (dump / "soft_pair_cov.tsv").read_text().splitlines()[0]
    assert header.split("\t")[1] == "0-1"


def test_cli_benchmark_writes_csv_and_summary(tmp_path):
    csv_path, summary_path = tmp_path / "b.csv", tmp_path / "s.json"
    assert cli_main([
        "benchmark", "--runs", "3", "--model", "zipf", "--clones", "200",
        "--zipf-r", "0.6", "--cells", "150,150,150,150,150", "--seed", "11",
        "--csv", str(csv_path), "--summary", str(summary_path),
    ]) == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "run,estimator,regularizer,true_theta,estimate,sq_error"
    assert len(lines) == 1 + 3 * 5  # header + runs x (naive, theta_star, 3 finals)
    summary = json.loads(summary_path.read_text())
    assert summary["seed"] == 11
    assert summary["config"]["runs"] == 3
    assert "theta_star" in summary["mse"]
    assert summary["ratio_vs_theta_star"]["theta_star"] == 1.0


def test_cli_exit_codes(tmp_path):
    assert cli_main(["estimate", "--input", str(tmp_path / "missing")]) == 1
    assert cli_main(["estimate"]) == 2  # missing required --input
    assert cli_main(["--bogus"]) == 2
    assert cli_main(["benchmark", "--runs", "1", "--cells", "10,abc"]) == 2
    d = make_dir(tmp_path, {"r1.tsv": "a\t-3\n", "r2.tsv": "a\t1\n"})
    assert cli_main(["estimate", "--input", str(d)]) == 1


def test_cli_replicates_cells_consistency(tmp_path):
    assert cli_main([
        "simulate", "--replicates", "3", "--cells", "100,100", "--seed", "1",
        "--output", str(tmp_path / "x"),
    ]) == 1
