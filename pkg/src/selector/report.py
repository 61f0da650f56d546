"""JSON and Markdown reports for comparisons over selected suites."""

from __future__ import annotations

import json
import warnings
from pathlib import Path

from selector.datamodel import PerformanceTable
from selector.errors import StatisticalPreconditionWarning
from selector.stats import (
    FRIEDMAN_MIN_INSTANCES,
    Comparison,
    RobustnessReport,
    compare_on_suite,
    robustness_count,
)


def _comparison_json(c: Comparison) -> dict:
    return {
        "instances": [str(k) for k in c.ranking.instances],
        "mean_ranks": dict(zip(c.ranking.algorithms, c.ranking.mean_ranks.tolist())),
        "friedman": {
            "statistic": c.friedman.statistic,
            "df": c.friedman.df,
            "p_value": c.friedman.p_value,
        },
        "flags": c.flags,
        "pairs": [
            {"pair": list(o.pair), "p_value": o.p_value, "bit": o.bit} for o in c.outcomes
        ],
    }


def selection_section(name: str, report: RobustnessReport) -> dict:
    section = {
        "name": name,
        "parameters": report.parameters,
        "repetitions": report.repetitions,
        "suites": [_comparison_json(c) for c in report.comparisons],
    }
    if report.repetitions > 1:
        section["counts"] = [
            {"pair": list(p), "no_significance": report.counts[p], "out_of": report.repetitions}
            for p in report.pairs
        ]
    return section


def benchmark_partitions(perf: PerformanceTable) -> dict[str, list]:
    parts: dict[str, list] = {}
    for key in perf.keys:
        parts.setdefault(key.suite, []).append(key)
    return parts


def per_benchmark_section(perf: PerformanceTable, alpha: float) -> dict:
    """Compare on each benchmark family separately (families with >= 2 instances)."""
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StatisticalPreconditionWarning)
        for suite, keys in benchmark_partitions(perf).items():
            if len(keys) >= 2:
                out[suite] = _comparison_json(compare_on_suite(perf, keys, alpha))
    return out


def find_discrepancies(per_benchmark: dict, selections: list[dict]) -> list[dict]:
    """Pairs whose outcome differs between benchmark families.

    Each entry also carries the majority outcome over every selected suite, so
    a reader can see which side the selection-based analysis supports.
    """
    bits: dict[tuple, dict] = {}
    for suite, comp in per_benchmark.items():
        for p in comp["pairs"]:
            bits.setdefault(tuple(p["pair"]), {})[suite] = p["bit"]
    found = []
    for pair, by_suite in bits.items():
        if len(set(by_suite.values())) < 2:
            continue
        votes = [
            p["bit"]
            for sel in selections
            for s in sel["suites"]
            for p in s["pairs"]
            if tuple(p["pair"]) == pair
        ]
        entry = {"pair": list(pair), "per_benchmark": by_suite}
        if votes:
            entry["selected_no_significance"] = sum(votes)
            entry["selected_total"] = len(votes)
            entry["selected_consistent"] = len(set(votes)) == 1
        found.append(entry)
    return found


def build_report(perf: PerformanceTable, selections: dict[str, list], alpha: float,
                 config: dict, parameters: dict | None = None) -> dict:
    sections = []
    for name, suites in selections.items():
        params = dict((parameters or {}).get(name, {}))
        rep = robustness_count(perf, suites, alpha, parameters=params)
        sections.append(selection_section(name, rep))
    per_bench = per_benchmark_section(perf, alpha)
    discrepancies = find_discrepancies(per_bench, sections)
    return {
        "config": config,
        "alpha": alpha,
        "algorithms": perf.algorithms,
        "friedman_min_instances": FRIEDMAN_MIN_INSTANCES,
        "selections": sections,
        "per_benchmark": per_bench,
        "discrepancies": discrepancies,
        "discrepancy_flag": bool(discrepancies),
    }


def _pair_table(algorithms, cell_for) -> list[str]:
    cols = algorithms[:-1]
    lines = ["| | " + " | ".join(cols) + " |", "|---" * (len(cols) + 1) + "|"]
    for i, row_alg in enumerate(algorithms[1:], start=1):
        cells = [cell_for(col, row_alg) if j < i else "" for j, col in enumerate(cols)]
        lines.append(f"| {row_alg} | " + " | ".join(cells) + " |")
    return lines


def _lookup(pairs: list[dict], a: str, b: str, field: str):
    for p in pairs:
        if set(p["pair"]) == {a, b}:
            return p[field]
    return None


def render_markdown(report: dict) -> str:
    algs = report["algorithms"]
    lines = ["# Statistical comparison report", ""]
    lines.append(f"Significance level: {report['alpha']}. Cells read `p/bit` for a single "
                 "suite (bit 1 = no significant difference) and counts of suites with no "
                 "significant difference for repeated selections.")
    lines.append("")
    lines.append("```json")
    lines.append(json.dumps(report["config"], sort_keys=True))
    lines.append("```")
    for sec in report["selections"]:
        lines += ["", f"## {sec['name']}", ""]
        if "counts" in sec:
            lines.append(f"Suites: {sec['repetitions']}")
            lines.append("")
            lines += _pair_table(
                algs,
                lambda a, b, s=sec: str(_lookup(s["counts"], a, b, "no_significance")),
            )
        else:
            s = sec["suites"][0]
            lines.append(f"Instances: {len(s['instances'])}; Friedman p = "
                         f"{s['friedman']['p_value']:.4g}"
                         + (f" ({', '.join(s['flags'])})" if s["flags"] else ""))
            lines.append("")
            lines += _pair_table(
                algs,
                lambda a, b, s=s: f"{_lookup(s['pairs'], a, b, 'p_value'):.2f}/"
                                  f"{_lookup(s['pairs'], a, b, 'bit')}",
            )
    if report["per_benchmark"]:
        lines += ["", "## Per benchmark", ""]
        for suite, s in report["per_benchmark"].items():
            lines += [f"### {suite}", ""]
            lines += _pair_table(
                algs,
                lambda a, b, s=s: f"{_lookup(s['pairs'], a, b, 'p_value'):.2f}/"
                                  f"{_lookup(s['pairs'], a, b, 'bit')}",
            )
            lines.append("")
    if report["discrepancies"]:
        lines += ["", "## Discrepancies", ""]
        for d in report["discrepancies"]:
            per = ", ".join(f"{k}: {v}" for k, v in d["per_benchmark"].items())
            extra = ""
            if "selected_total" in d:
                extra = (f"; selected suites: {d['selected_no_significance']}/"
                         f"{d['selected_total']} no significance")
            lines.append(f"- {d['pair'][0]} vs {d['pair'][1]}: benchmarks disagree ({per}){extra}")
    return "\n".join(lines) + "\n"


def write_report(report: dict, directory) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    jp, mp = directory / "report.json", directory / "report.md"
    jp.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    mp.write_text(render_markdown(report), encoding="utf-8")
    return jp, mp
