"""Tests for the command-line interface and its cache."""

import json
import os

import pytest
from click.testing import CliRunner

from maninforge.cli import (
    EXIT_OK,
    EXIT_REFUSED,
    _cuspidal_rank_estimate,
    _read_artifact,
    _write_artifact,
    main,
)


@pytest.fixture()
def runner(tmp_path, monkeypatch):
    monkeypatch.setenv("MANINFORGE_CACHE", str(tmp_path / "cache"))
    return CliRunner()


def test_space_command(runner):
    res = runner.invoke(main, ["space", "11"])
    assert res.exit_code == EXIT_OK
    assert "cuspidal rank 2" in res.output
    res = runner.invoke(main, ["space", "13"])
    assert "cuspidal rank 0" in res.output
    res = runner.invoke(main, ["space", "1"])
    assert "cuspidal rank 0" in res.output


def test_space_json(runner):
    res = runner.invoke(main, ["space", "26", "--json"])
    doc = json.loads(res.output)
    assert doc == {
        "level": 26,
        "p1_size": 42,
        "full_rank": 7,  # 2g + (cusps - 1)
        "cuspidal_rank": 4,
        "cusp_count": 4,
    }


def test_decompose_command(runner):
    res = runner.invoke(main, ["decompose", "11"])
    assert res.exit_code == EXIT_OK
    assert res.output.strip() == "11.0: dimension 1"
    res = runner.invoke(main, ["decompose", "12"])
    assert res.exit_code == EXIT_REFUSED


def test_invariants_command_json(runner):
    res = runner.invoke(main, ["invariants", "11", "--json"])
    assert res.exit_code == EXIT_OK
    doc = json.loads(res.output)
    assert doc["classes"][0]["deg"] == "1"
    assert doc["classes"][0]["cong"] == "1"


def test_invariants_flags(runner):
    res = runner.invoke(
        main, ["invariants", "57", "--json", "--class", "1", "--primes", "3"]
    )
    assert res.exit_code == EXIT_OK
    doc = json.loads(res.output)
    assert len(doc["classes"]) == 1
    assert doc["classes"][0]["label"] == "57.1"
    assert all(e["p"] == "3" for e in doc["classes"][0]["ideals"])


def test_certify_and_scan(runner):
    res = runner.invoke(main, ["certify", "37"])
    assert res.exit_code == EXIT_OK
    assert "pass" in res.output
    res = runner.invoke(main, ["scan", "11", "30"])
    assert res.exit_code == EXIT_OK
    assert "no anomalies" in res.output


def test_long_running_gate(runner):
    res = runner.invoke(main, ["invariants", "2089"])
    assert res.exit_code == EXIT_REFUSED
    assert "--long-running" in res.output


def test_rank_estimate_matches_spaces():
    from maninforge.modsym import build_space

    for n in [1, 11, 26, 37, 57, 60]:
        assert _cuspidal_rank_estimate(n) == build_space(n).cuspidal_rank


def test_cache_roundtrip_and_corruption(tmp_path):
    root = str(tmp_path)
    _write_artifact(root, 11, "op_test", "2 2\n1 0 0 1\n")
    assert _read_artifact(root, 11, "op_test") == "2 2\n1 0 0 1\n"
    # corrupt the payload: the hash check must reject it
    path = os.path.join(root, "11", "op_test.v1.txt")
    with open(path, "w") as fh:
        fh.write("2 2\n9 9 9 9\n")
    assert _read_artifact(root, 11, "op_test") is None
    assert _read_artifact(root, 11, "missing") is None


def test_cache_warm_run_is_bit_identical(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("MANINFORGE_CACHE", str(tmp_path / "c2"))
    first = runner.invoke(main, ["invariants", "26", "--json"])
    assert first.exit_code == EXIT_OK
    second = runner.invoke(main, ["invariants", "26", "--json"])
    assert second.output == first.output
