"""Command-line front end: bundle files, exit codes, report formats."""

import json
import subprocess
import sys

import pytest

from tanbun.cli import (
    BundleFileError, UsageError, main, parse_bundle_file,
)

LINE_DB = """\
# a one-line demo bundle
name = demo
base_dim = 1
total_dim = 2
base_box = -2..2
total_box = -2..2, -2..2
q = x0
xi = x0, 0
lambda = x0, 0, 0, x1
"""

LINE_VB = """\
name = demo-vector
kind = vector
base_dim = 1
total_dim = 2
base_box = -2..2
total_box = -2..2, -2..2
q = x0
xi = x0, 0
add = x0, x1 + x3
scalar = x1, x0*x2
"""


def _write(tmp_path, text, name="bundle.txt"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _json_run(capsys, argv):
    code = main(argv)
    doc = json.loads(capsys.readouterr().out)
    return code, doc


# --------------------------------------------------------------------------
# Bundle files


def test_bundle_file_happy_path():
    spec, overrides = parse_bundle_file(LINE_DB, "demo")
    assert spec.name == "demo"
    assert spec.base_dim == 1 and spec.total_dim == 2
    assert overrides == {}


def test_bundle_file_carries_run_overrides():
    spec, overrides = parse_bundle_file(
        LINE_DB + "samples = 17\nseed = 3\nsuite = pre\n", "demo")
    assert overrides == {"samples": 17, "seed": 3, "suite": "pre"}


def test_unknown_key_is_rejected_with_its_line():
    with pytest.raises(BundleFileError) as exc:
        parse_bundle_file(LINE_DB + "colour = green\n", "demo")
    assert "demo:10" in str(exc.value)


def test_duplicate_key_is_rejected():
    with pytest.raises(BundleFileError) as exc:
        parse_bundle_file(LINE_DB + "q = x0\n", "demo")
    assert "duplicate" in str(exc.value)


def test_box_width_must_match_dimension():
    bad = LINE_DB.replace("total_box = -2..2, -2..2", "total_box = -2..2")
    with pytest.raises(BundleFileError):
        parse_bundle_file(bad, "demo")


def test_map_arity_must_match_dimension():
    bad = LINE_DB.replace("q = x0", "q = x0, x1")
    with pytest.raises(BundleFileError):
        parse_bundle_file(bad, "demo")


def test_expression_errors_point_into_the_file():
    bad = LINE_DB.replace("q = x0", "q = x0 +")
    with pytest.raises(BundleFileError) as exc:
        parse_bundle_file(bad, "demo")
    assert "demo:7" in str(exc.value)


def test_vector_kind_requires_operations_and_forbids_a_lift():
    spec, _ = parse_bundle_file(LINE_VB, "demo")
    assert spec.scalar is not None
    with pytest.raises(BundleFileError):
        parse_bundle_file(LINE_VB + "lambda = x0, 0, 0, x1\n", "demo")
    with pytest.raises(BundleFileError):
        parse_bundle_file(LINE_VB.replace("scalar = x1, x0*x2\n", ""),
                          "demo")


def test_fraction_box_bounds_are_exact():
    spec, _ = parse_bundle_file(
        LINE_DB.replace("base_box = -2..2", "base_box = -1/3..1/3"),
        "demo")
    from fractions import Fraction
    assert spec.base_box.intervals[0][0] == Fraction(-1, 3)


# --------------------------------------------------------------------------
# check: exit codes and output


def test_check_passes_on_a_good_file(tmp_path, capsys):
    path = _write(tmp_path, LINE_DB)
    code = main(["check", path, "--samples", "30", "--suite", "rosicky"])
    out = capsys.readouterr().out
    assert code == 0
    assert "pass" in out


def test_check_fails_on_the_counterexample(capsys):
    code = main(["check", "bump_counterexample", "--samples", "40",
                 "--suite", "rosicky"])
    out = capsys.readouterr().out
    assert code == 1
    assert "rank" in out


def test_vector_file_runs_the_full_chain(tmp_path, capsys):
    path = _write(tmp_path, LINE_VB)
    code, doc = _json_run(capsys, ["check", path, "--samples", "25",
                                   "--format", "json"])
    assert code == 0
    assert [s["id"] for s in doc["suites"]] == [
        "pre", "rosicky", "addition", "cockett", "strong", "combined",
        "split", "vb"]


def test_missing_file_is_a_usage_error(capsys):
    code = main(["check", "/no/such/file.txt"])
    err = capsys.readouterr().err
    assert code == 3
    assert "file.txt" in err


def test_unknown_subcommand_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 3


def test_bad_flag_value_is_a_usage_error(capsys):
    assert main(["check", "trivial_1_1", "--depth", "9"]) == 3


# --------------------------------------------------------------------------
# JSON reports


def test_json_report_is_deterministic(tmp_path, capsys):
    path = _write(tmp_path, LINE_DB)
    argv = ["check", path, "--samples", "30", "--format", "json",
            "--suite", "rosicky"]
    code1, doc1 = _json_run(capsys, argv)
    code2, doc2 = _json_run(capsys, argv)
    assert code1 == code2 == 0
    doc1.pop("wall_clock_s"), doc2.pop("wall_clock_s")
    assert doc1 == doc2


def test_json_report_structure(tmp_path, capsys):
    path = _write(tmp_path, LINE_DB)
    code, doc = _json_run(capsys, ["check", path, "--samples", "30",
                                   "--suite", "pre", "--format", "json"])
    assert doc["schema"] == "tanbun-report/1"
    assert doc["source"].endswith("bundle.txt")
    assert len(doc["digest"]) == 64
    assert doc["samples"] == 30
    laws = doc["suites"][0]["laws"]
    assert [l["law"] for l in laws] == ["pre-1", "pre-2", "pre-3", "pre-4"]


def test_file_overrides_lose_to_flags(tmp_path, capsys):
    path = _write(tmp_path, LINE_DB + "samples = 99\nseed = 17\n")
    code, doc = _json_run(capsys, ["check", path, "--samples", "30",
                                   "--suite", "pre", "--format", "json"])
    assert doc["samples"] == 30  # flag wins
    assert doc["seed"] == 17    # file override survives


def test_seed_env_fallback(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("TANBUN_SEED", "123")
    path = _write(tmp_path, LINE_DB)
    code, doc = _json_run(capsys, ["check", path, "--samples", "25",
                                   "--suite", "pre", "--format", "json"])
    assert doc["seed"] == 123
    code, doc = _json_run(capsys, ["check", path, "--samples", "25",
                                   "--seed", "9", "--suite", "pre",
                                   "--format", "json"])
    assert doc["seed"] == 9


def test_force_marks_later_suites_untrusted(capsys):
    code, doc = _json_run(capsys, ["check", "bump_counterexample",
                                   "--samples", "30", "--force",
                                   "--format", "json"])
    assert code == 1
    trusted = {s["id"]: s["trusted"] for s in doc["suites"]}
    assert trusted["pre"] and trusted["rosicky"]
    assert not any(trusted[k] for k in ("addition", "cockett", "strong",
                                        "combined", "split", "vb"))


# --------------------------------------------------------------------------
# corpus and axioms subcommands


def test_corpus_list_prints_every_entry(capsys):
    assert main(["corpus", "list"]) == 0
    out = capsys.readouterr().out
    assert "trivial_1_1" in out and "mutant_flip_lift" in out


def test_corpus_run_exit_is_expectation_based(capsys):
    # An expected failure that does fail counts as success.
    assert main(["corpus", "run", "mutant_xi_shift"]) == 0
    out = capsys.readouterr().out
    assert "pre-3" in out


def test_corpus_run_unknown_name(capsys):
    assert main(["corpus", "run", "nonexistent"]) == 3


def test_axioms_subcommand(capsys):
    assert main(["axioms", "--dims", "1"]) == 0
    out = capsys.readouterr().out
    assert "flip-lift" in out


def test_installed_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "tanbun.cli", "corpus", "list"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "conjugated_1_1" in proc.stdout
