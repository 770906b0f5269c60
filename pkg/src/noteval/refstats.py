"""Reference statistics for the packaged study corpus.

One table of the numbers the packaged corpus is calibrated to match,
plus a checker that replays the real pipeline (aggregation, agreement,
criteria correlations, metric correlation cells) over a corpus root and
reports every deviation.  tools/calibrate_study.py optimises against
these values; `python -m noteval.reproduction verify` re-checks them.

Metric cells are stored as displayed coefficients: similarity metrics
correlate negatively with the error criteria, and the report layer
flips their sign for readability (see reports.displayed_coefficient).
"""

from __future__ import annotations

from pathlib import Path
from typing import IO

GROUP_MEANS = {
    "human": {"time": 96.5, "incorrect": 1.3, "omission": 3.9, "length": 16.9},
    "generated": {"time": 136.4, "incorrect": 3.9, "omission": 6.6, "length": 21.5},
}
MEAN_TOL = 0.05
LENGTH_TOL = 0.5

AGREEMENT = {
    "time_alpha": 0.542,
    "incorrect_alpha": 0.541,
    "omission_alpha": 0.374,
    "incorrect_overlap": 0.431,
    "omission_overlap": 0.268,
}
AGREEMENT_TOL = 0.02

_PAIRS = (
    ("eval1", "eval2"),
    ("eval1", "eval3"),
    ("eval1", "eval4"),
    ("eval1", "eval5"),
    ("eval2", "eval3"),
    ("eval2", "eval4"),
    ("eval2", "eval5"),
    ("eval3", "eval4"),
    ("eval3", "eval5"),
    ("eval4", "eval5"),
)

# measure -> value per evaluator pair, in _PAIRS order
PAIRWISE = {
    "time_alpha": (
        0.444, 0.534, 0.660, 0.591, 0.408, 0.420, 0.634, 0.501, 0.520, 0.664,
    ),
    "incorrect_alpha": (
        0.573, 0.599, 0.624, 0.639, 0.413, 0.303, 0.717, 0.626, 0.512, 0.371,
    ),
    "incorrect_overlap": (
        0.369, 0.484, 0.471, 0.415, 0.386, 0.389, 0.401, 0.531, 0.433, 0.436,
    ),
    "omission_alpha": (
        0.124, 0.452, 0.538, 0.408, 0.232, -0.024, 0.543, 0.449, 0.495, 0.294,
    ),
    "omission_overlap": (
        0.240, 0.266, 0.282, 0.260, 0.240, 0.243, 0.270, 0.307, 0.269, 0.301,
    ),
}
PAIRWISE_TOL = 0.03

# criterion pair -> (pearson, spearman) at judgement level; every cell
# additionally carries p < 0.001
CRITERIA = {
    ("time", "incorrect"): (0.543, 0.599),
    ("time", "omission"): (0.769, 0.781),
    ("time", "combined"): (0.800, 0.829),
    ("time", "length"): (0.380, 0.413),
    ("incorrect", "omission"): (0.384, 0.467),
    ("incorrect", "length"): (0.537, 0.520),
    ("omission", "length"): (0.122, 0.183),
}
CRITERIA_TOL = 0.02

# Displayed Spearman cells for the fully specified metric families, in
# reports.METRIC_COLUMNS order: time x (human, edited, eval, avg, max),
# then (combined, incorrect, omission) x (avg, max).
METRIC_CELLS = {
    "ROUGE-1-F1": (0.334, 0.627, 0.160, 0.443, 0.550, 0.580, 0.704, 0.378, 0.505, 0.561, 0.651),
    "ROUGE-2-F1": (0.384, 0.653, 0.166, 0.551, 0.570, 0.694, 0.731, 0.501, 0.557, 0.641, 0.654),
    "ROUGE-3-F1": (0.366, 0.645, 0.117, 0.576, 0.565, 0.734, 0.731, 0.555, 0.568, 0.663, 0.646),
    "ROUGE-4-F1": (0.342, 0.632, 0.076, 0.575, 0.557, 0.745, 0.726, 0.581, 0.573, 0.661, 0.636),
    "ROUGE-L-Pr": (0.348, 0.471, 0.169, 0.366, 0.427, 0.500, 0.613, 0.607, 0.745, 0.306, 0.375),
    "ROUGE-L-Re": (0.409, 0.614, 0.300, 0.520, 0.551, 0.640, 0.680, 0.374, 0.416, 0.660, 0.688),
    "ROUGE-L-F1": (0.384, 0.646, 0.285, 0.538, 0.564, 0.661, 0.719, 0.479, 0.534, 0.610, 0.655),
    "CHRF": (0.341, 0.460, -0.075, 0.463, 0.438, 0.581, 0.560, 0.504, 0.484, 0.483, 0.462),
    "METEOR": (0.415, 0.667, 0.203, 0.529, 0.581, 0.674, 0.713, 0.429, 0.463, 0.668, 0.699),
    "BLEU": (0.382, 0.642, 0.098, 0.557, 0.565, 0.698, 0.702, 0.447, 0.453, 0.685, 0.686),
    "Levenshtein": (0.547, 0.780, 0.453, 0.600, 0.654, 0.650, 0.760, 0.566, 0.555, 0.531, 0.697),
    "WER": (0.239, 0.629, 0.059, 0.326, 0.550, 0.412, 0.704, 0.499, 0.535, 0.252, 0.631),
    "MER": (0.392, 0.635, 0.156, 0.565, 0.557, 0.703, 0.706, 0.500, 0.513, 0.659, 0.651),
    "WIL": (0.394, 0.649, 0.117, 0.590, 0.566, 0.747, 0.723, 0.578, 0.566, 0.668, 0.638),
}
METRIC_TOL = 0.05
# sentence segmentation differs from the original annotation tooling, so
# the synonym-sensitive cell gets extra slack
METRIC_TOL_WIDE = {("METEOR", ("time", "edited")): 0.08}

LEXICAL_EDIT_METRICS = tuple(METRIC_CELLS)

# similarity metrics whose displayed time-column value is negative; the
# sign check (raw coefficient negative against post-edit time) skips
# exactly these cells
SIGN_CHECK_EXEMPT = {
    ("CHRF", ("time", "eval")),
    ("SkipThoughts", ("time", "eval")),
    ("EmbeddingAverage", ("time", "eval")),
    ("GreedyMatching", ("time", "eval")),
}


def _check(
    lines: list[str], failures: list[str], name: str,
    value: float, target: float, tol: float,
) -> None:
    ok = abs(value - target) <= tol
    mark = "ok  " if ok else "FAIL"
    lines.append(f"{mark} {name:<46} {value:+.3f}  target {target:+.3f} +-{tol}")
    if not ok:
        failures.append(name)


def run(
    corpus_root: Path,
    sidecar_root: Path | None = None,
    out: IO[str] | None = None,
) -> list[str]:
    """Compare a corpus against every reference value; returns failures."""
    from .corpus import load_corpus
    from .reports import correlate
    from .scoring import score_all
    from .stats import agreement_summary, aggregate_judgements, judgement_rows

    records = load_corpus(corpus_root)
    aggregates = aggregate_judgements(records)
    rows = judgement_rows(records)
    lines: list[str] = []
    failures: list[str] = []

    by_role: dict[str, list] = {"human": [], "generated": []}
    for agg in aggregates:
        by_role[agg.role].append(agg)
    for role, targets in GROUP_MEANS.items():
        group = by_role[role]
        for key, target in targets.items():
            value = sum(getattr(r, key) for r in group) / len(group)
            tol = LENGTH_TOL if key == "length" else MEAN_TOL
            _check(lines, failures, f"mean {role} {key}", value, target, tol)

    summary = agreement_summary(records, ranking="consultation")
    for key, target in AGREEMENT.items():
        _check(lines, failures, f"agreement {key}", float(summary[key]), target, AGREEMENT_TOL)
    pairwise = summary["pairwise"]
    for measure, values in PAIRWISE.items():
        table = pairwise[measure]
        for pair, target in zip(_PAIRS, values):
            _check(
                lines, failures, f"pairwise {measure} {pair[0]}-{pair[1]}",
                table[pair], target, PAIRWISE_TOL,
            )

    metrics = list(LEXICAL_EDIT_METRICS)
    if sidecar_root is not None:
        from .scoring import METRICS

        metrics = [m.name for m in METRICS]
    score = score_all(records, sidecar_root=str(sidecar_root) if sidecar_root else None,
                      metrics=metrics)
    report = correlate(score, aggregates, judgements=rows)

    for (c1, c2), (r_pearson, r_spearman) in CRITERIA.items():
        for method, target in (("pearson", r_pearson), ("spearman", r_spearman)):
            cell = report.criteria[(c1, c2)][method]
            _check(lines, failures, f"criteria {c1}/{c2} {method}",
                   cell.coefficient, target, CRITERIA_TOL)
            if cell.p_value >= 0.001:
                failures.append(f"criteria {c1}/{c2} {method} p")
                lines.append(f"FAIL criteria {c1}/{c2} {method} p={cell.p_value:.2g}")

    for metric, values in METRIC_CELLS.items():
        for (criterion, reference), target in zip(report.columns, values):
            shown = report.displayed_coefficient("spearman", metric, criterion, reference)
            name = f"cell {metric} {criterion}_{reference}"
            if shown is None:
                failures.append(name)
                lines.append(f"FAIL {name} missing")
                continue
            tol = METRIC_TOL_WIDE.get((metric, (criterion, reference)), METRIC_TOL)
            _check(lines, failures, name, shown, target, tol)

    if sidecar_root is not None:
        embedding = [m.name for m in _embedding_metrics()]
        edited = {
            m: report.displayed_coefficient("spearman", m, "time", "edited")
            for m in embedding
        }
        ranked = sorted(embedding, key=lambda m: -(edited[m] or float("-inf")))
        ok = "BertScore" in ranked[:3]
        lines.append(("ok  " if ok else "FAIL") + " BertScore in top-3 embedding metrics (edited)")
        if not ok:
            failures.append("bertscore-top3")
        from .scoring import METRICS, HIGHER_BETTER

        for spec in METRICS:
            if spec.polarity != HIGHER_BETTER or spec.name == "NoteLength":
                continue
            for criterion, reference in report.columns:
                if criterion != "time":
                    continue
                if (spec.name, (criterion, reference)) in SIGN_CHECK_EXEMPT:
                    continue
                cell = report.metric_cell("spearman", spec.name, criterion, reference)
                if cell is not None and cell.coefficient >= 0:
                    failures.append(f"sign {spec.name} {criterion}_{reference}")
                    lines.append(
                        f"FAIL sign {spec.name} {criterion}_{reference} raw {cell.coefficient:+.3f}"
                    )

    if out is not None:
        for line in lines:
            print(line, file=out)
        print(f"{len(failures)} failures", file=out)
    return failures


def _embedding_metrics():
    from .scoring import METRICS

    return [m for m in METRICS if m.family == "embedding"]
