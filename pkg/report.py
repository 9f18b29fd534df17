#!/usr/bin/env python3
"""
Report printer for saved gikit artifacts.

Usage:
  gikit-report ablation.csv
  gikit-report trace.csv
  gikit-report specificity.csv
  gikit-report oracle_check.csv
  gikit-report manifest.json
"""

import json
import sys
from pathlib import Path
from typing import Any, Dict, List

from embedding_io import read_csv
from run_manifest import load_manifest, verify_manifest
from synth_trainer import ABLATION_COLUMNS, SPECIFICITY_COLUMNS, TRACE_COLUMNS
from table_formatter import format_ablation_table, format_oracle_table, format_specificity_table, format_summary


class _OracleRow:
    def __init__(self, row: Dict[str, str]):
        self.name = row['name']
        self.passed = row['passed'] == 'True'
        self.detail = row['detail']
        self.seconds = float(row.get('seconds') or 0.0)


def print_ablation(rows: List[Dict[str, Any]]) -> None:
    """Print the ablation table"""
    print(format_ablation_table(rows))


def print_specificity(rows: List[Dict[str, Any]]) -> None:
    print(format_specificity_table(rows))


def print_oracle(rows: List[Dict[str, str]]) -> None:
    print(format_oracle_table([_OracleRow(r) for r in rows]))


def print_trace_summary(rows: List[Dict[str, str]]) -> None:
    """Print first/last loss terms and how often the loss rose"""
    if not rows:
        print("Trace is empty.")
        return
    totals = [float(r['total']) for r in rows]
    upticks = sum(1 for prev, cur in zip(totals, totals[1:]) if cur > prev)
    summary = {
        'Steps': len(rows),
        'Initial loss': totals[0],
        'Final loss': totals[-1],
        'Upticks': upticks,
    }
    for term in ('ppcl', 'inc_vt', 'inc_mask', 'vib'):
        summary[f'Final {term}'] = float(rows[-1][term])
    print(format_summary(summary, "Training Trace"))


def print_manifest(path: Path) -> None:
    """Print a manifest summary and verify its digests"""
    manifest = load_manifest(path)
    problems = verify_manifest(path)
    print(format_summary({
        'Command': manifest.command,
        'Seed': manifest.seed,
        'Format version': manifest.format_version,
        'Inputs': len(manifest.inputs),
        'Outputs': len(manifest.outputs),
        'Digests verified': not problems,
    }, "Run Manifest"))
    for problem in problems:
        print(f"  ⚠️  {problem}")


def generate_report(path: Path) -> None:
    """Dispatch on the artifact type"""
    if path.suffix == '.json':
        print_manifest(path)
        return
    rows = read_csv(path)
    columns = list(rows[0].keys()) if rows else []
    if columns == ABLATION_COLUMNS:
        print_ablation(rows)
    elif columns == TRACE_COLUMNS:
        print_trace_summary(rows)
    elif columns == SPECIFICITY_COLUMNS:
        print_specificity(rows)
    elif columns[:2] == ['name', 'passed']:
        print_oracle(rows)
    else:
        print(f"Error: unrecognized report file '{path}'")
        sys.exit(1)


def main():
    """Main entry point"""
    if len(sys.argv) < 2:
        print("Usage: gikit-report <ablation.csv|trace.csv|specificity.csv|oracle_check.csv|manifest.json>")
        print("\nExample:")
        print("  gikit-report ~/.local/share/gikit/report/ablation.csv")
        sys.exit(1)

    path = Path(sys.argv[1])
    if not path.exists():
        print(f"Error: File '{path}' not found")
        sys.exit(1)
    try:
        generate_report(path)
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"Error reading {path}: {e}")
        sys.exit(1)

    print(f"\n✓ Report generated from {path}")


if __name__ == '__main__':
    main()
