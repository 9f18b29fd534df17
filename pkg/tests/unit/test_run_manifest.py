#!/usr/bin/env python3
"""
Unit tests for run manifests.
"""

import json

import pytest

from errors import ParseError, SchemaError
from run_manifest import MANIFEST_NAME, RunManifest, load_manifest, save_manifest, verify_manifest


@pytest.fixture
def run_dir(tmp_path):
    source = tmp_path / "input.jsonl"
    source.write_text("input\n")
    out = tmp_path / "run"
    out.mkdir()
    (out / "weights.json").write_text("{}\n")
    manifest = RunManifest(command="bprw", argv=["bprw", "--seed", "3"], config={"bprw": {"alpha": 2.0}}, seed=3)
    manifest.add_input(source)
    manifest.add_output(out / "weights.json")
    save_manifest(manifest, out)
    return out, source


def test_manifest_round_trip(run_dir):
    out, source = run_dir
    manifest = load_manifest(out / MANIFEST_NAME)
    assert manifest.command == "bprw" and manifest.seed == 3
    assert manifest.format_version == "1.0"
    assert list(manifest.outputs) == ["weights.json"]
    assert str(source) in manifest.inputs


def test_manifest_is_deterministic(run_dir):
    out, _ = run_dir
    first = (out / MANIFEST_NAME).read_bytes()
    save_manifest(load_manifest(out / MANIFEST_NAME), out)
    assert (out / MANIFEST_NAME).read_bytes() == first
    assert "time" not in json.loads(first)


def test_verify_clean(run_dir):
    out, _ = run_dir
    assert verify_manifest(out / MANIFEST_NAME) == []


def test_verify_detects_changes(run_dir):
    out, source = run_dir
    (out / "weights.json").write_text('{"pi": []}\n')
    source.unlink()
    problems = verify_manifest(out / MANIFEST_NAME)
    assert any(p.startswith("changed:") and p.endswith("weights.json") for p in problems)
    assert any(p.startswith("missing:") for p in problems)


def test_malformed_manifest(tmp_path):
    path = tmp_path / MANIFEST_NAME
    path.write_text('{"command": "x"}')
    with pytest.raises(SchemaError):
        load_manifest(path)
    path.write_text("{oops")
    with pytest.raises(ParseError):
        load_manifest(path)
