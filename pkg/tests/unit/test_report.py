#!/usr/bin/env python3
"""
Unit tests for table formatting and the gikit-report script.
"""

import sys

import pytest

import report
from embedding_io import write_csv
from oracle_check import CheckResult
from run_manifest import RunManifest, save_manifest
from synth_trainer import ABLATION_COLUMNS, SPECIFICITY_COLUMNS, TRACE_COLUMNS
from table_formatter import (
    format_ablation_table,
    format_oracle_table,
    format_specificity_table,
    format_summary,
    format_weights_table,
)

ABLATION_ROW = {"name": "inc_vt", "final_loss": 12.5, "mean_var_image": 1e-5, "mean_var_text": 3e-4,
                "mask_satisfaction": 0.75, "retrieval_accuracy": 0.9, "steps": 200}


def run_report(monkeypatch, path):
    monkeypatch.setattr(sys, "argv", ["gikit-report", str(path)])
    report.main()


class TestFormatting:
    def test_oracle_table(self):
        table = format_oracle_table([CheckResult("loss_algebra", True, "max err 1e-12", 0.01),
                                     CheckResult("bprw_em", False, "3/20 off", 1.5)])
        assert "PASS" in table and "FAIL" in table
        assert "1/2 passed" in table

    def test_ablation_table_accepts_csv_strings(self):
        row = {k: str(v) for k, v in ABLATION_ROW.items()}
        assert "inc_vt" in format_ablation_table([row])

    def test_weights_table(self):
        table = format_weights_table({"cat": {"prompt_ids": ["cat/a", "cat/b"], "pi": [0.25, 0.75],
                                              "iterations": 7, "converged": True}})
        assert "cat/b" in table and "0.750000" in table and "Yes" in table

    def test_specificity_table(self):
        table = format_specificity_table([{"n_attributes": 1, "n_texts": 9, "mean_var_text": 2e-4},
                                          {"n_attributes": 3, "n_texts": 7, "mean_var_text": 5e-5}])
        assert "Text Variance by Specificity" in table
        assert "0.0002" in table and "5e-05" in table

    def test_summary(self):
        assert "Included fraction:" in format_summary({"Included fraction": 1.0}, "Hierarchy Inclusion")


class TestReportScript:
    def test_ablation_csv(self, tmp_path, monkeypatch, capsys):
        path = tmp_path / "ablation.csv"
        write_csv([ABLATION_ROW], ABLATION_COLUMNS, path)
        run_report(monkeypatch, path)
        assert "Ablation Summary" in capsys.readouterr().out

    def test_trace_csv(self, tmp_path, monkeypatch, capsys):
        path = tmp_path / "trace.csv"
        rows = [{"step": s, "total": t, "ppcl": t, "inc_vt": 0.0, "inc_mask": 0.0, "vib": 0.0}
                for s, t in enumerate([3.0, 2.0, 2.5, 1.0])]
        write_csv(rows, TRACE_COLUMNS, path)
        run_report(monkeypatch, path)
        out = capsys.readouterr().out
        assert "Training Trace" in out
        assert "Upticks:" in out

    def test_specificity_csv(self, tmp_path, monkeypatch, capsys):
        path = tmp_path / "specificity.csv"
        write_csv([{"n_attributes": 1, "n_texts": 4, "mean_var_text": 0.01}], SPECIFICITY_COLUMNS, path)
        run_report(monkeypatch, path)
        assert "Text Variance by Specificity" in capsys.readouterr().out

    def test_oracle_csv_without_timings(self, tmp_path, monkeypatch, capsys):
        path = tmp_path / "oracle_check.csv"
        write_csv([{"name": "loss_algebra", "passed": True, "detail": "ok"}], ["name", "passed", "detail"], path)
        run_report(monkeypatch, path)
        assert "1/1 passed" in capsys.readouterr().out

    def test_manifest(self, tmp_path, monkeypatch, capsys):
        (tmp_path / "hier_eval.json").write_text("{}\n")
        manifest = RunManifest(command="hier-eval", argv=["hier-eval"], config={}, seed=0)
        manifest.add_output(tmp_path / "hier_eval.json")
        path = save_manifest(manifest, tmp_path)
        (tmp_path / "hier_eval.json").write_text('{"fraction": 0.5}\n')
        run_report(monkeypatch, path)
        out = capsys.readouterr().out
        assert "Run Manifest" in out
        assert "changed:" in out

    def test_unrecognized_csv(self, tmp_path, monkeypatch):
        path = tmp_path / "other.csv"
        path.write_text("x,y\n1,2\n")
        with pytest.raises(SystemExit) as excinfo:
            run_report(monkeypatch, path)
        assert excinfo.value.code == 1

    def test_missing_file(self, tmp_path, monkeypatch):
        with pytest.raises(SystemExit):
            run_report(monkeypatch, tmp_path / "nope.csv")
