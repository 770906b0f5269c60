"""Agreement and correlation statistics.

Alpha fixtures below are hand-traced through the coincidence-matrix
definition; the random battery re-derives alpha with an independent
brute-force implementation that follows the textbook D_o/D_e form with
plain dicts and loops. Correlations are cross-checked against scipy.
"""

import logging
import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats as sps

from noteval.corpus import ConsultationRecord, ErrorSpan, JudgementRecord, NoteVersion
from noteval.stats import (
    CorrelationResult,
    ReliabilityMatrix,
    StatsError,
    aggregate_judgements,
    agreement_summary,
    average_ranks,
    count_matrix,
    group_means,
    judgement_rows,
    krippendorff_alpha,
    pairwise_alpha,
    pairwise_span_agreement,
    pearson,
    span_agreement_mean,
    spearman,
    time_rank_matrix,
    times_to_ranks,
)


def oracle_alpha(rows, level):
    """Brute-force alpha: observed/expected disagreement from first principles."""
    usable = [[v for v in row if v is not None] for row in rows]
    usable = [r for r in usable if len(r) >= 2]
    if not usable:
        return None
    counts = Counter(v for r in usable for v in r)
    domain = sorted(counts)
    n = sum(counts.values())

    def delta(a, b):
        if level == "interval":
            return (a - b) ** 2
        ia, ib = domain.index(a), domain.index(b)
        lo, hi = min(ia, ib), max(ia, ib)
        between = sum(counts[domain[g]] for g in range(lo, hi + 1))
        return (between - (counts[a] + counts[b]) / 2.0) ** 2

    d_obs = 0.0
    for r in usable:
        m = len(r)
        for i in range(m):
            for j in range(m):
                if i != j:
                    d_obs += delta(r[i], r[j]) / (m - 1)
    d_obs /= n
    d_exp = 0.0
    for a in domain:
        for b in domain:
            if a != b:
                d_exp += counts[a] * counts[b] * delta(a, b)
    d_exp /= n * (n - 1)
    if d_exp == 0.0:
        return 1.0 if d_obs == 0.0 else None
    return 1.0 - d_obs / d_exp


def matrix_from_rows(rows, level, raters=None):
    names = raters or [f"r{i}" for i in range(len(rows[0]))]
    return ReliabilityMatrix(
        raters=tuple(names),
        units=tuple(f"u{i}" for i in range(len(rows))),
        values=tuple(tuple(row) for row in rows),
        level=level,
    )


class TestReliabilityMatrix:
    def test_from_records_preserves_order(self):
        records = {
            "u2": {"b": 1.0, "a": 2.0},
            "u1": {"c": 3.0},
        }
        m = ReliabilityMatrix.from_records(records)
        assert m.units == ("u2", "u1")
        assert m.raters == ("b", "a", "c")
        assert m.values == ((1.0, 2.0, None), (None, None, 3.0))

    def test_explicit_rater_order(self):
        m = ReliabilityMatrix.from_records(
            {"u": {"a": 1.0, "b": 2.0}}, raters=["b", "a", "z"]
        )
        assert m.raters == ("b", "a", "z")
        assert m.values == ((2.0, 1.0, None),)

    def test_restrict(self):
        m = matrix_from_rows([[1.0, 2.0, 3.0], [4.0, None, 6.0]], "interval")
        sub = m.restrict(["r2", "r0"])
        assert sub.raters == ("r2", "r0")
        assert sub.values == ((3.0, 1.0), (6.0, 4.0))
        assert sub.level == "interval"

    def test_validation(self):
        with pytest.raises(StatsError):
            matrix_from_rows([[1.0, 2.0]], "nominal")
        with pytest.raises(StatsError):
            ReliabilityMatrix(
                raters=("a", "b"), units=("u1", "u2"), values=((1.0, 2.0),)
            )
        with pytest.raises(StatsError):
            matrix_from_rows([[1.0, float("nan")]], "interval")
        with pytest.raises(StatsError):
            matrix_from_rows([[1.0, 2.0, 3.0]], "interval", raters=["a", "b"])


class TestKrippendorffAlpha:
    # Hand trace: coincidences coin[3,4]=coin[4,3]=1, diagonal elsewhere;
    # marginals (2,2,3,1), n=8; observed=1, expected=63; 1 - 7/63 = 8/9.
    def test_interval_single_disagreement(self):
        m = matrix_from_rows(
            [[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [3.0, 4.0]], "interval"
        )
        assert krippendorff_alpha(m) == pytest.approx(8.0 / 9.0, abs=1e-12)

    # Swapped values in both units: observed=2, expected=4, n=4; 1 - 3*2/4.
    def test_interval_systematic_disagreement_goes_negative(self):
        m = matrix_from_rows([[0.0, 1.0], [1.0, 0.0]], "interval")
        assert krippendorff_alpha(m) == pytest.approx(-0.5, abs=1e-12)

    def test_perfect_agreement(self):
        m = matrix_from_rows([[1.0, 1.0], [2.0, 2.0]], "interval")
        assert krippendorff_alpha(m) == pytest.approx(1.0, abs=1e-12)

    # Ordinal deltas from cumulative marginals (2,1,3): delta(2,3)=4,
    # observed=4, expected=90, n=6; 1 - 5*4/90 = 7/9.
    def test_ordinal_hand_trace(self):
        m = matrix_from_rows([[1.0, 1.0], [2.0, 3.0], [3.0, 3.0]], "ordinal")
        assert krippendorff_alpha(m) == pytest.approx(7.0 / 9.0, abs=1e-12)

    # Missing cells: single-value units drop out entirely; marginals
    # (3,1,2), observed=1, expected=29, n=6; 1 - 5/29 = 24/29.
    def test_interval_with_missing_cells(self):
        m = matrix_from_rows(
            [
                [1.0, 2.0, None],
                [1.0, None, 1.0],
                [None, 3.0, 3.0],
                [4.0, None, None],
            ],
            "interval",
        )
        assert krippendorff_alpha(m) == pytest.approx(24.0 / 29.0, abs=1e-12)

    def test_no_pairable_values_raises(self):
        m = matrix_from_rows([[1.0, None], [None, 2.0]], "interval")
        with pytest.raises(StatsError, match="degenerate"):
            krippendorff_alpha(m)

    def test_single_value_domain_is_perfect(self):
        # Only one distinct value: zero expected and observed disagreement.
        m = matrix_from_rows([[2.0, 2.0, 2.0]], "interval")
        assert krippendorff_alpha(m) == 1.0

    @pytest.mark.parametrize("level", ["interval", "ordinal"])
    def test_matches_brute_force_on_random_matrices(self, level):
        rng = np.random.default_rng(31)
        checked = 0
        while checked < 30:
            n_units = int(rng.integers(2, 9))
            n_raters = int(rng.integers(2, 6))
            rows = []
            for _ in range(n_units):
                row = [
                    float(rng.integers(0, 4)) if rng.random() > 0.25 else None
                    for _ in range(n_raters)
                ]
                rows.append(row)
            expected = oracle_alpha(rows, level)
            if expected is None:
                continue
            m = matrix_from_rows(rows, level)
            assert krippendorff_alpha(m) == pytest.approx(expected, abs=1e-12)
            checked += 1

    def test_ordinal_equals_interval_for_two_point_domain(self):
        # With two distinct values the ordinal delta is a constant multiple
        # of the interval delta, so alpha coincides.
        rows = [[1.0, 1.0], [2.0, 2.0], [2.0, 1.0], [1.0, 2.0], [1.0, 1.0]]
        a_int = krippendorff_alpha(matrix_from_rows(rows, "interval"))
        a_ord = krippendorff_alpha(matrix_from_rows(rows, "ordinal"))
        assert a_int == pytest.approx(a_ord, abs=1e-12)


class TestPairwiseAlpha:
    def test_each_pair_on_its_own_submatrix(self):
        m = ReliabilityMatrix.from_records(
            {
                "u1": {"A": 1.0},
                "u2": {"B": 2.0},
                "u3": {"A": 2.0, "C": 3.0},
                "u4": {"B": 1.0, "C": 2.0},
            },
            level="interval",
        )
        out = pairwise_alpha(m)
        # A and B never co-rate a unit, so that pair is skipped.
        assert set(out) == {("A", "C"), ("B", "C")}
        assert out[("A", "C")] == pytest.approx(0.0, abs=1e-12)
        assert out[("B", "C")] == pytest.approx(0.0, abs=1e-12)

    def test_skip_logs_warning(self, caplog):
        m = ReliabilityMatrix.from_records(
            {"u1": {"A": 1.0}, "u2": {"B": 1.0}}, level="interval"
        )
        with caplog.at_level(logging.WARNING, logger="noteval.stats"):
            assert pairwise_alpha(m) == {}
        assert any("skipped" in r.message for r in caplog.records)


class TestRanks:
    def test_fastest_gets_rank_one(self):
        assert times_to_ranks([9.0, 7.0, 8.0, 5.0, 6.0]) == [5.0, 3.0, 4.0, 1.0, 2.0]

    def test_ties_share_average_position(self):
        assert average_ranks([1.0, 2.0, 2.0, 3.0]) == [1.0, 2.5, 2.5, 4.0]
        assert average_ranks([5.0, 5.0, 5.0]) == [2.0, 2.0, 2.0]

    def test_distinct_values_give_permutation(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            vals = rng.permutation(rng.integers(3, 12)).astype(float).tolist()
            ranks = average_ranks(vals)
            assert sorted(ranks) == list(range(1, len(vals) + 1))

    def test_rank_sum_invariant_under_ties(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            vals = rng.integers(0, 4, size=int(rng.integers(2, 10))).astype(float)
            ranks = average_ranks(vals.tolist())
            total = len(vals) * (len(vals) + 1) / 2
            assert sum(ranks) == pytest.approx(total, abs=1e-9)

    def test_matches_scipy_rankdata(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            vals = rng.integers(0, 6, size=int(rng.integers(2, 15))).astype(float)
            ours = average_ranks(vals.tolist())
            theirs = sps.rankdata(vals, method="average")
            assert np.allclose(ours, theirs)


class TestCorrelations:
    def test_reversal_with_one_cycle(self):
        r = spearman([1.0, 2.0, 3.0], [3.0, 1.0, 2.0])
        assert r.coefficient == pytest.approx(-0.5, abs=1e-12)
        assert r.method == "spearman"
        assert r.n == 3

    def test_perfect_line_p_zero(self):
        r = pearson([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0])
        assert r.coefficient == pytest.approx(1.0)
        assert r.p_value == 0.0
        assert r.significant()

    def test_pearson_matches_scipy(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            n = int(rng.integers(3, 40))
            x = rng.standard_normal(n)
            y = rng.standard_normal(n) + 0.5 * x
            ours = pearson(x.tolist(), y.tolist())
            ref_r, ref_p = sps.pearsonr(x, y)
            assert ours.coefficient == pytest.approx(float(ref_r), abs=1e-12)
            assert ours.p_value == pytest.approx(float(ref_p), abs=1e-9)

    def test_spearman_matches_scipy_with_ties(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            n = int(rng.integers(4, 40))
            x = rng.integers(0, 6, size=n).astype(float)
            y = rng.integers(0, 6, size=n).astype(float)
            try:
                ours = spearman(x.tolist(), y.tolist())
            except StatsError:
                assert len(set(x)) == 1 or len(set(y)) == 1
                continue
            ref_r, ref_p = sps.spearmanr(x, y)
            assert ours.coefficient == pytest.approx(float(ref_r), abs=1e-12)
            assert ours.p_value == pytest.approx(float(ref_p), abs=1e-9)

    def test_spearman_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(23)
        x = rng.standard_normal(25)
        y = rng.standard_normal(25)
        base = spearman(x.tolist(), y.tolist())
        warped = spearman((x**3).tolist(), (3.0 * y + 7.0).tolist())
        assert warped.coefficient == pytest.approx(base.coefficient, abs=1e-12)

    def test_degenerate_inputs(self):
        with pytest.raises(StatsError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(StatsError):
            pearson([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(StatsError):
            pearson([1.0, 2.0, 3.0], [1.0, 2.0])
        with pytest.raises(StatsError):
            pearson([1.0, 2.0, float("nan")], [1.0, 2.0, 3.0])

    def test_significance_threshold(self):
        r = CorrelationResult(coefficient=0.5, p_value=0.04, n=20, method="pearson")
        assert r.significant()
        assert not r.significant(0.01)


def span(text, kind="incorrect"):
    return ErrorSpan(text=text, kind=kind)


def make_records():
    """Two consultations, two evaluators, judgements on human+generated."""

    def consultation(cid, human_text, gen_text, judgements):
        notes = (
            NoteVersion(f"{cid}-h", "human", "clinician", human_text),
            NoteVersion(f"{cid}-g", "generated", "model-a", gen_text),
            NoteVersion(f"{cid}-e1", "eval", "e1", "Reference summary only."),
            NoteVersion(
                f"{cid}-ed1", "edited", "e1", "Edited text.", parent_note_id=f"{cid}-g"
            ),
        )
        return ConsultationRecord(
            consultation_id=cid,
            transcript=(),
            notes=notes,
            judgements=tuple(judgements),
        )

    c1 = consultation(
        "c1",
        "Patient reports mild headache.\nAdvised rest and fluids.",
        "Patient has a headache.\nHe was told to rest.",
        [
            JudgementRecord(
                "e1", "c1-h", 100.0,
                omission_spans=(span("advised rest", "omission"),),
            ),
            JudgementRecord(
                "e1", "c1-g", 200.0,
                incorrect_spans=(span("mild headache"),),
                omission_spans=(
                    span("advised rest", "omission"),
                    span("fluids", "omission"),
                ),
            ),
            JudgementRecord("e2", "c1-h", 150.0),
            JudgementRecord(
                "e2", "c1-g", 250.0,
                incorrect_spans=(span("headache"),),
                omission_spans=(span("rest advised", "omission"),),
            ),
        ],
    )
    c2 = consultation(
        "c2",
        "No fever reported.\nPlan discussed.",
        "Fever noted today.\nFollow up booked.",
        [
            JudgementRecord("e1", "c2-h", 120.0),
            JudgementRecord(
                "e1", "c2-g", 80.0, incorrect_spans=(span("fever noted"),)
            ),
            JudgementRecord(
                "e2", "c2-h", 90.0,
                omission_spans=(span("sleep advice", "omission"),),
            ),
            JudgementRecord(
                "e2", "c2-g", 95.0,
                incorrect_spans=(span("fever"), span("cough noted")),
            ),
        ],
    )
    return [c1, c2]


class TestTimeRankMatrix:
    def test_consultation_mode_ranks(self):
        matrix = time_rank_matrix(make_records(), ranking="consultation")
        assert matrix.level == "ordinal"
        assert matrix.raters == ("e1", "e2")
        assert matrix.units == ("c1/c1-h", "c1/c1-g", "c2/c2-h", "c2/c2-g")
        assert matrix.values == (
            (1.0, 1.0),
            (2.0, 2.0),
            (2.0, 1.0),
            (1.0, 2.0),
        )

    # Marginals (4,4), delta(1,2)=16: observed=32, expected=256, n=8.
    def test_consultation_mode_alpha(self):
        matrix = time_rank_matrix(make_records(), ranking="consultation")
        assert krippendorff_alpha(matrix) == pytest.approx(0.125, abs=1e-12)

    def test_global_mode_ranks(self):
        matrix = time_rank_matrix(make_records(), ranking="global")
        cells = {
            unit: dict(zip(matrix.raters, row))
            for unit, row in zip(matrix.units, matrix.values)
        }
        assert cells["c1/c1-h"] == {"e1": 2.0, "e2": 3.0}
        assert cells["c1/c1-g"] == {"e1": 4.0, "e2": 4.0}
        assert cells["c2/c2-h"] == {"e1": 3.0, "e2": 1.0}
        assert cells["c2/c2-g"] == {"e1": 1.0, "e2": 2.0}

    def test_incomplete_evaluator_dropped_per_consultation(self, caplog):
        records = make_records()
        extra = ConsultationRecord(
            consultation_id="c3",
            transcript=(),
            notes=(
                NoteVersion("c3-h", "human", "clinician", "Stable condition noted."),
                NoteVersion("c3-g", "generated", "model-a", "Condition is stable."),
            ),
            judgements=(
                JudgementRecord("e1", "c3-h", 10.0),
                JudgementRecord("e1", "c3-g", 20.0),
                JudgementRecord("e2", "c3-h", 5.0),
            ),
        )
        with caplog.at_level(logging.WARNING, logger="noteval.stats"):
            matrix = time_rank_matrix(records + [extra], ranking="consultation")
        assert any("ranking dropped" in r.message for r in caplog.records)
        cells = {
            unit: dict(zip(matrix.raters, row))
            for unit, row in zip(matrix.units, matrix.values)
        }
        assert cells["c3/c3-h"] == {"e1": 1.0, "e2": None}
        assert cells["c3/c3-g"] == {"e1": 2.0, "e2": None}

    def test_tied_times_share_rank(self):
        rec = ConsultationRecord(
            consultation_id="c9",
            transcript=(),
            notes=(
                NoteVersion("c9-h", "human", "clinician", "First note text."),
                NoteVersion("c9-g", "generated", "model-a", "Second note text."),
            ),
            judgements=(
                JudgementRecord("e1", "c9-h", 30.0),
                JudgementRecord("e1", "c9-g", 30.0),
                JudgementRecord("e2", "c9-h", 30.0),
                JudgementRecord("e2", "c9-g", 30.0),
            ),
        )
        matrix = time_rank_matrix([rec], ranking="consultation")
        assert matrix.values == ((1.5, 1.5), (1.5, 1.5))

    def test_unknown_mode(self):
        with pytest.raises(StatsError):
            time_rank_matrix(make_records(), ranking="weekly")


class TestCountMatrix:
    def test_incorrect_counts(self):
        matrix = count_matrix(make_records(), "incorrect")
        assert matrix.level == "interval"
        assert matrix.values == (
            (0.0, 0.0),
            (1.0, 1.0),
            (0.0, 0.0),
            (1.0, 2.0),
        )
        # Marginals (4,3,1): observed=1, expected=31, n=8.
        assert krippendorff_alpha(matrix) == pytest.approx(24.0 / 31.0, abs=1e-12)

    def test_omission_counts(self):
        matrix = count_matrix(make_records(), "omission")
        assert matrix.values == (
            (1.0, 0.0),
            (2.0, 1.0),
            (0.0, 1.0),
            (0.0, 0.0),
        )
        # Marginals (4,3,1): observed=3, expected=31, n=8.
        assert krippendorff_alpha(matrix) == pytest.approx(10.0 / 31.0, abs=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(StatsError):
            count_matrix(make_records(), "spelling")


class TestSpanAgreement:
    def test_incorrect_grand_mean(self):
        # Per-note pair scores: 1.0 (both empty), 2/3, 1.0, 0.8.
        value = span_agreement_mean(make_records(), "incorrect")
        assert value == pytest.approx((1.0 + 2.0 / 3.0 + 1.0 + 0.8) / 4.0, abs=1e-12)

    def test_omission_grand_mean(self):
        # Per-note pair scores: 0.0 (one side empty), 0.8, 0.0, 1.0.
        value = span_agreement_mean(make_records(), "omission")
        assert value == pytest.approx(0.45, abs=1e-12)

    def test_pairwise_breakdown(self):
        out = pairwise_span_agreement(make_records(), "incorrect")
        assert list(out) == [("e1", "e2")]
        assert out[("e1", "e2")] == pytest.approx(
            (1.0 + 2.0 / 3.0 + 1.0 + 0.8) / 4.0, abs=1e-12
        )

    def test_no_shared_notes_raises(self):
        rec = ConsultationRecord(
            consultation_id="c1",
            transcript=(),
            notes=(NoteVersion("n1", "human", "clinician", "Some text."),),
            judgements=(JudgementRecord("e1", "n1", 10.0),),
        )
        with pytest.raises(StatsError):
            span_agreement_mean([rec], "incorrect")


class TestJudgementTables:
    def test_judgement_rows(self):
        rows = judgement_rows(make_records())
        assert len(rows) == 8
        by_key = {(r.consultation_id, r.note_id, r.evaluator_id): r for r in rows}
        row = by_key[("c1", "c1-g", "e1")]
        assert row.role == "generated"
        assert row.time == 200.0
        assert row.incorrect == 1
        assert row.omission == 2
        assert row.combined == 3
        assert row.length == 2
        assert by_key[("c2", "c2-g", "e2")].combined == 2

    def test_aggregate_means(self):
        rows = {(r.consultation_id, r.note_id): r for r in aggregate_judgements(make_records())}
        assert len(rows) == 4
        agg = rows[("c1", "c1-g")]
        assert agg.time == pytest.approx(225.0)
        assert agg.incorrect == pytest.approx(1.0)
        assert agg.omission == pytest.approx(1.5)
        assert agg.combined == pytest.approx(2.5)
        assert agg.n_judgements == 2
        assert rows[("c2", "c2-g")].time == pytest.approx(87.5)
        assert rows[("c2", "c2-g")].combined == pytest.approx(1.5)

    def test_unjudged_note_skipped_with_warning(self, caplog):
        records = make_records()
        silent = ConsultationRecord(
            consultation_id="c4",
            transcript=(),
            notes=(
                NoteVersion("c4-h", "human", "clinician", "Routine review done."),
                NoteVersion("c4-g", "generated", "model-a", "Review completed."),
            ),
            judgements=(JudgementRecord("e1", "c4-h", 40.0),),
        )
        with caplog.at_level(logging.WARNING, logger="noteval.stats"):
            rows = aggregate_judgements(records + [silent])
        assert any("no judgements" in r.message for r in caplog.records)
        keys = {(r.consultation_id, r.note_id) for r in rows}
        assert ("c4", "c4-h") in keys
        assert ("c4", "c4-g") not in keys

    def test_group_means(self):
        means = group_means(aggregate_judgements(make_records()))
        assert set(means) == {"human", "generated"}
        assert means["human"]["time"] == pytest.approx(115.0)
        assert means["human"]["incorrect"] == pytest.approx(0.0)
        assert means["human"]["omission"] == pytest.approx(0.5)
        assert means["generated"]["time"] == pytest.approx(156.25)
        assert means["generated"]["incorrect"] == pytest.approx(1.25)
        assert means["generated"]["omission"] == pytest.approx(0.75)
        assert means["generated"]["combined"] == pytest.approx(2.0)
        assert means["human"]["notes"] == 2.0


class TestAgreementSummary:
    def test_headline_numbers(self):
        summary = agreement_summary(make_records())
        assert summary["ranking"] == "consultation"
        assert summary["time_alpha"] == pytest.approx(0.125, abs=1e-12)
        assert summary["incorrect_alpha"] == pytest.approx(24.0 / 31.0, abs=1e-12)
        assert summary["omission_alpha"] == pytest.approx(10.0 / 31.0, abs=1e-12)
        assert summary["incorrect_overlap"] == pytest.approx(
            (1.0 + 2.0 / 3.0 + 1.0 + 0.8) / 4.0, abs=1e-12
        )
        assert summary["omission_overlap"] == pytest.approx(0.45, abs=1e-12)
        pairwise = summary["pairwise"]
        assert set(pairwise) == {
            "time_alpha",
            "incorrect_alpha",
            "omission_alpha",
            "incorrect_overlap",
            "omission_overlap",
        }
        for table in pairwise.values():
            assert list(table) == [("e1", "e2")]

    def test_two_rater_pairwise_equals_headline(self):
        summary = agreement_summary(make_records())
        pairwise = summary["pairwise"]
        assert pairwise["time_alpha"][("e1", "e2")] == pytest.approx(
            summary["time_alpha"], abs=1e-12
        )
        assert pairwise["incorrect_overlap"][("e1", "e2")] == pytest.approx(
            summary["incorrect_overlap"], abs=1e-12
        )
