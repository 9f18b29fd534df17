#!/usr/bin/env python3
"""
Shared table formatting utilities for gikit and report.py
"""

from typing import Any, Dict, List, Sequence


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "Yes" if value else "No"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def format_oracle_table(results: Sequence[Any], title: str = "Oracle Check") -> str:
    """
    Format oracle-check results.

    Args:
        results: Records with name, passed, detail and seconds attributes

    Returns:
        Formatted table as string
    """
    lines = []
    lines.append("\n" + "=" * 110)
    lines.append(title)
    lines.append("=" * 110)
    lines.append(f"{'Check':<26} {'Result':<8} {'Seconds':<9} {'Detail':<65}")
    lines.append("-" * 110)

    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name[:25]:<26} {status:<8} {r.seconds:<9.2f} {r.detail[:65]:<65}")

    lines.append("-" * 110)
    passed = sum(1 for r in results if r.passed)
    lines.append(f"{'TOTAL':<26} {passed}/{len(results)} passed")
    lines.append("=" * 110)

    return "\n".join(lines)


def format_ablation_table(rows: List[Dict[str, Any]], title: str = "Ablation Summary") -> str:
    """
    Format an ablation table.

    Args:
        rows: Dicts with keys name, final_loss, mean_var_image, mean_var_text,
            mask_satisfaction, retrieval_accuracy, steps

    Returns:
        Formatted table as string
    """
    lines = []
    lines.append("\n" + "=" * 110)
    lines.append(title)
    lines.append("=" * 110)
    lines.append(f"{'Config':<22} {'Final Loss':<13} {'Var Image':<13} {'Var Text':<13} "
                 f"{'Mask Incl':<11} {'Retrieval':<11} {'Steps':<8}")
    lines.append("-" * 110)

    for row in rows:
        name = str(row['name'])[:21]
        lines.append(
            f"{name:<22} {_fmt(float(row['final_loss'])):<13} {_fmt(float(row['mean_var_image'])):<13} "
            f"{_fmt(float(row['mean_var_text'])):<13} {_fmt(float(row['mask_satisfaction'])):<11} "
            f"{_fmt(float(row['retrieval_accuracy'])):<11} {row['steps']:<8}"
        )

    lines.append("=" * 110)

    return "\n".join(lines)


def format_specificity_table(rows: List[Dict[str, Any]], title: str = "Text Variance by Specificity") -> str:
    """Mean text variance per attribute count"""
    lines = []
    lines.append("\n" + "=" * 110)
    lines.append(title)
    lines.append("=" * 110)
    lines.append(f"{'Attributes':<12} {'Texts':<8} {'Mean Var Text':<15}")
    lines.append("-" * 110)

    for row in rows:
        lines.append(f"{row['n_attributes']:<12} {row['n_texts']:<8} {_fmt(float(row['mean_var_text'])):<15}")

    lines.append("=" * 110)

    return "\n".join(lines)


def format_weights_table(weights: Dict[str, Dict[str, Any]], title: str = "Prompt Weights") -> str:
    """
    Format BPRW output.

    Args:
        weights: class_id -> dict with prompt_ids, pi, iterations, converged
    """
    lines = []
    lines.append("\n" + "=" * 110)
    lines.append(title)
    lines.append("=" * 110)
    lines.append(f"{'Class':<20} {'Prompt':<40} {'Weight':<12} {'Iterations':<11} {'Converged':<10}")
    lines.append("-" * 110)

    for class_id, entry in weights.items():
        for n, (prompt_id, pi) in enumerate(zip(entry['prompt_ids'], entry['pi'])):
            iterations = entry['iterations'] if n == 0 else ""
            converged = _fmt(entry['converged']) if n == 0 else ""
            label = class_id[:19] if n == 0 else ""
            lines.append(f"{label:<20} {prompt_id[:39]:<40} {pi:<12.6f} {iterations:<11} {converged:<10}")

    lines.append("=" * 110)

    return "\n".join(lines)


def format_summary(values: Dict[str, Any], title: str) -> str:
    """Two-column key/value summary"""
    lines = []
    lines.append("\n" + "=" * 110)
    lines.append(title)
    lines.append("=" * 110)
    for key, value in values.items():
        lines.append(f"{key + ':':<28} {_fmt(value)}")
    lines.append("=" * 110)
    return "\n".join(lines)
