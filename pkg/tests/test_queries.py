from __future__ import annotations

from fractions import Fraction

import pytest

from dropscope.metrics import FailureKind
from dropscope.model import NOT_INFORMED, CohortScope, EnrollmentResult, Situation, TdaReferences, YearFlow, CohortFlow
from dropscope.queries import (
    CrMode,
    FilterSet,
    OTHERS_LABEL,
    RankOrder,
    RateOrder,
    apply_filter,
    attendance_bands,
    category_breakdown,
    course_situation_ranking,
    cr_bands,
    discipline_failure_ranking,
    failure_histogram,
    situation_counts,
    tda_histogram,
)
from helpers import make_profile, make_row, make_snapshot


def dropout(student_id, **overrides):
    return make_profile(student_id=student_id, situation=Situation.DROPOUT, **overrides)


class TestFilters:
    def test_conjunction_of_constraints(self):
        snapshot = make_snapshot(
            students=[
                dropout("S1", income_band="1-3 MW", course_id="C01"),
                dropout("S2", income_band="1-3 MW", course_id="C02"),
                dropout("S3", income_band="3-5 MW", course_id="C01"),
            ]
        )
        both = FilterSet(course_id="C01", income_band="1-3 MW")
        assert [p.student_id for p in apply_filter(snapshot, both)] == ["S1"]

    def test_adding_a_constraint_never_grows_the_match(self):
        snapshot = make_snapshot(
            students=[
                dropout(f"S{i}", birth_city="Vitoria" if i % 2 else "Serra", entry_year=2010 + i % 3)
                for i in range(12)
            ]
        )
        loose = FilterSet(birth_city="Vitoria")
        tight = FilterSet(birth_city="Vitoria", entry_year=2011)
        matched_loose = {p.student_id for p in apply_filter(snapshot, loose)}
        matched_tight = {p.student_id for p in apply_filter(snapshot, tight)}
        assert matched_tight <= matched_loose

    def test_empty_filter_matches_everyone(self):
        snapshot = make_snapshot(students=[dropout("S1"), dropout("S2")])
        assert FilterSet().is_empty()
        assert len(apply_filter(snapshot, FilterSet())) == 2

    def test_missing_entry_year_never_matches_a_year_filter(self):
        snapshot = make_snapshot(students=[dropout("S1", entry_year=None)])
        assert apply_filter(snapshot, FilterSet(entry_year=2010)) == []


class TestSituationCounts:
    def test_partition_with_deceased_excluded(self):
        snapshot = make_snapshot(
            students=[
                make_profile(student_id="S1", situation=Situation.GRADUATED),
                make_profile(student_id="S2", situation=Situation.GRADUATED),
                dropout("S3"),
                make_profile(student_id="S4", situation=Situation.IN_PROGRESS),
                make_profile(student_id="S5", situation=Situation.DECEASED),
            ]
        )
        result = situation_counts(snapshot)
        by_label = {entry.label: entry.count for entry in result.entries}
        assert by_label == {"graduated": 2, "dropout": 1, "in_progress": 1}
        assert result.excluded_undefined == 1
        assert result.total == 5
        assert sum(by_label.values()) + result.excluded_undefined == result.total

    def test_all_zero_orders_lexicographically(self):
        result = situation_counts(make_snapshot())
        assert [entry.label for entry in result.entries] == [
            "dropout",
            "graduated",
            "in_progress",
        ]
        assert result.payload()["entries"][0]["percent"] == 0.0

    def test_order_is_count_desc_then_label(self):
        snapshot = make_snapshot(
            students=[
                make_profile(student_id="S1", situation=Situation.GRADUATED),
                dropout("S2"),
                make_profile(student_id="S3", situation=Situation.IN_PROGRESS),
                make_profile(student_id="S4", situation=Situation.IN_PROGRESS),
            ]
        )
        labels = [entry.label for entry in situation_counts(snapshot).entries]
        assert labels == ["in_progress", "dropout", "graduated"]

    def test_percent_rounds_half_up_at_one_decimal(self):
        students = [dropout("S0")]
        students += [
            make_profile(student_id=f"S{i}", situation=Situation.GRADUATED)
            for i in range(1, 16)
        ]
        payload = situation_counts(make_snapshot(students=students)).payload()
        shares = {entry["label"]: entry["percent"] for entry in payload["entries"]}
        assert shares["dropout"] == 6.3  # 100/16 = 6.25 rounds up, not to even
        assert shares["graduated"] == 93.8


class TestCourseRanking:
    def make(self):
        students = []
        for i in range(5):
            students.append(dropout(f"A{i}", course_id="C01"))
            students.append(dropout(f"B{i}", course_id="C02"))
        students += [dropout("X0", course_id="C03"), dropout("X1", course_id="C03")]
        students.append(make_profile(student_id="G1", course_id="C04", situation=Situation.GRADUATED))
        return make_snapshot(students=students)

    def test_top_breaks_ties_lexicographically(self):
        ranking = course_situation_ranking(self.make(), Situation.DROPOUT, RankOrder.TOP, limit=2)
        assert [(e.course_id, e.count) for e in ranking.entries] == [("C01", 5), ("C02", 5)]

    def test_bottom_includes_zero_count_courses(self):
        ranking = course_situation_ranking(self.make(), Situation.DROPOUT, RankOrder.BOTTOM, limit=2)
        assert [(e.course_id, e.count) for e in ranking.entries] == [("C04", 0), ("C03", 2)]

    def test_limit_capped_at_course_count(self):
        ranking = course_situation_ranking(self.make(), Situation.DROPOUT, RankOrder.TOP, limit=50)
        assert len(ranking.entries) == 4

    def test_deceased_cannot_be_ranked(self):
        with pytest.raises(ValueError, match="cannot be ranked"):
            course_situation_ranking(self.make(), Situation.DECEASED)

    def test_limit_below_one_rejected(self):
        with pytest.raises(ValueError, match="at least 1"):
            course_situation_ranking(self.make(), Situation.DROPOUT, limit=0)


class TestAttendanceBands:
    def make(self):
        values = {
            "S1": Fraction(95),
            "S2": Fraction(90),  # boundary: belongs to the middle band
            "S3": Fraction(75),  # boundary: belongs to the middle band
            "S4": Fraction("74.9"),
        }
        students = [dropout(sid) for sid in values]
        students.append(dropout("S5"))  # no rows: undefined mean
        students.append(make_profile(student_id="S6", situation=Situation.GRADUATED))
        rows = [
            make_row(student_id=sid, attendance_pct=value) for sid, value in values.items()
        ]
        return make_snapshot(students=students, rows=rows)

    def test_boundaries_and_exclusions(self):
        result = attendance_bands(self.make())
        by_label = {entry.label: entry.count for entry in result.entries}
        assert by_label == {"above_90": 1, "from_75_to_90": 2, "below_75": 1}
        assert result.excluded_undefined == 1
        assert result.total == 5  # graduated student never enters

    def test_course_scope_narrows_population(self):
        snapshot = make_snapshot(
            students=[dropout("S1", course_id="C01"), dropout("S2", course_id="C02")],
            rows=[
                make_row(student_id="S1", course_id="C01", attendance_pct=Fraction(99)),
                make_row(student_id="S2", course_id="C02", attendance_pct=Fraction(10)),
            ],
        )
        result = attendance_bands(snapshot, course="C01")
        by_label = {entry.label: entry.count for entry in result.entries}
        assert by_label == {"above_90": 1, "from_75_to_90": 0, "below_75": 0}

    def test_mean_attendance_is_unweighted_by_credits(self):
        snapshot = make_snapshot(
            students=[dropout("S1")],
            rows=[
                make_row(student_id="S1", discipline_id="D01", credits=1, attendance_pct=Fraction(100)),
                make_row(student_id="S1", discipline_id="D02", credits=12, attendance_pct=Fraction(80)),
            ],
        )
        result = attendance_bands(snapshot)
        by_label = {entry.label: entry.count for entry in result.entries}
        assert by_label["from_75_to_90"] == 1  # mean 90, regardless of credit spread


class TestCrBands:
    def make(self):
        grades = {
            "S1": Fraction("4.99"),
            "S2": Fraction(5),  # boundary: middle band
            "S3": Fraction("6.99"),
            "S4": Fraction(7),  # boundary: top band
        }
        students = [dropout(sid) for sid in grades]
        students.append(dropout("S5"))  # no rows: undefined coefficient
        rows = [make_row(student_id=sid, grade=grade) for sid, grade in grades.items()]
        return make_snapshot(students=students, rows=rows)

    def test_boundaries_and_exclusions(self):
        result = cr_bands(self.make())
        by_label = {entry.label: entry.count for entry in result.entries}
        assert by_label == {"below_5": 1, "from_5_to_7": 2, "at_least_7": 1}
        assert result.excluded_undefined == 1

    def test_mode_changes_nothing_in_the_numbers(self):
        snapshot = self.make()
        assert cr_bands(snapshot, mode=CrMode.ABSOLUTE).payload() == cr_bands(
            snapshot, mode=CrMode.PERCENT
        ).payload()

    def test_coefficient_weights_by_credits(self):
        snapshot = make_snapshot(
            students=[dropout("S1")],
            rows=[
                make_row(student_id="S1", discipline_id="D01", credits=8, grade=Fraction(4)),
                make_row(student_id="S1", discipline_id="D02", credits=2, grade=Fraction(10)),
            ],
        )
        result = cr_bands(snapshot)
        by_label = {entry.label: entry.count for entry in result.entries}
        assert by_label["from_5_to_7"] == 1  # (32 + 20) / 10 = 5.2


class TestFailureHistogram:
    def make(self):
        students = [dropout("S1"), dropout("S2")]
        rows = [
            make_row(student_id="S1", discipline_id="D01", result=EnrollmentResult.FAILED_BY_GRADE),
            make_row(student_id="S1", discipline_id="D02", result=EnrollmentResult.FAILED_BY_GRADE),
            make_row(student_id="S1", discipline_id="D03", result=EnrollmentResult.FAILED_BY_FREQUENCY),
            make_row(student_id="S2", discipline_id="D01"),
        ]
        return make_snapshot(students=students, rows=rows)

    def test_bins_are_contiguous_with_zero_gaps(self):
        result = failure_histogram(self.make())
        assert [(b.failures, b.students) for b in result.bins] == [(0, 1), (1, 0), (2, 0), (3, 1)]

    def test_kind_selects_the_failure_flavor(self):
        snapshot = self.make()
        grade = failure_histogram(snapshot, kind=FailureKind.GRADE)
        assert [(b.failures, b.students) for b in grade.bins] == [(0, 1), (1, 0), (2, 1)]
        frequency = failure_histogram(snapshot, kind=FailureKind.FREQUENCY)
        assert [(b.failures, b.students) for b in frequency.bins] == [(0, 1), (1, 1)]

    def test_all_clean_students_collapse_to_a_single_bin(self):
        snapshot = make_snapshot(
            students=[dropout("S1"), dropout("S2")],
            rows=[make_row(student_id="S1"), make_row(student_id="S2")],
        )
        result = failure_histogram(snapshot)
        assert [(b.failures, b.students) for b in result.bins] == [(0, 2)]

    def test_empty_scope_has_no_bins(self):
        result = failure_histogram(self.make(), course="C99")
        assert result.bins == ()
        assert result.payload() == {"bins": []}


class TestCategoryBreakdown:
    def test_seven_values_truncate_to_five_plus_others(self):
        students = []
        sizes = {"v1": 7, "v2": 6, "v3": 5, "v4": 4, "v5": 3, "v6": 2, "v7": 1}
        serial = 0
        for value, size in sizes.items():
            for _ in range(size):
                students.append(dropout(f"S{serial}", income_band=value))
                serial += 1
        result = category_breakdown(make_snapshot(students=students), "socioeconomic", "income_band")
        labels = [entry.label for entry in result.entries]
        assert labels == ["v1", "v2", "v3", "v4", "v5", OTHERS_LABEL]
        assert result.entries[-1].count == 3  # v6 + v7 pooled
        assert sum(entry.count for entry in result.entries) == result.total == 28
        assert result.excluded_undefined == 0

    def test_few_values_need_no_pooling(self):
        students = [dropout(f"S{i}", quota_type=f"q{i % 4}") for i in range(8)]
        result = category_breakdown(make_snapshot(students=students), "academic", "quota_type")
        assert len(result.entries) == 4
        assert OTHERS_LABEL not in [entry.label for entry in result.entries]

    def test_not_informed_is_an_ordinary_category(self):
        students = [
            dropout("S1", birth_city=NOT_INFORMED),
            dropout("S2", birth_city=NOT_INFORMED),
            dropout("S3", birth_city="Serra"),
        ]
        result = category_breakdown(make_snapshot(students=students), "geographic", "birth_city")
        assert [entry.label for entry in result.entries] == [NOT_INFORMED, "Serra"]
        assert result.excluded_undefined == 0

    def test_tied_counts_order_lexicographically(self):
        students = [dropout("S1", housing="b"), dropout("S2", housing="a")]
        result = category_breakdown(make_snapshot(students=students), "socioeconomic", "housing")
        assert [entry.label for entry in result.entries] == ["a", "b"]

    def test_unknown_group_or_index_rejected(self):
        snapshot = make_snapshot(students=[dropout("S1")])
        with pytest.raises(ValueError, match="unknown category group"):
            category_breakdown(snapshot, "medical", "income_band")
        with pytest.raises(ValueError, match="not part of group"):
            category_breakdown(snapshot, "socioeconomic", "birth_city")


def discipline_snapshot():
    """Three qualifying disciplines plus one below the enrollment floor.

    (C01, D01): 15 enrollments, 3 failures (rate 20)
    (C01, D02): 14 enrollments, 14 failures (below floor, invisible)
    (C01, D03): 20 enrollments, 5 failures (rate 25)
    (C02, D01): 16 enrollments, 4 failures (rate 25, same id other course)
    """
    students = []
    rows = []
    serial = 0

    def add(course_id, discipline_id, enrolled, failures):
        nonlocal serial
        for i in range(enrolled):
            sid = f"S{serial:04d}"
            serial += 1
            students.append(dropout(sid, course_id=course_id))
            result = (
                EnrollmentResult.FAILED_BY_GRADE if i < failures else EnrollmentResult.APPROVED
            )
            rows.append(
                make_row(
                    student_id=sid,
                    course_id=course_id,
                    discipline_id=discipline_id,
                    result=result,
                )
            )

    add("C01", "D01", 15, 3)
    add("C01", "D02", 14, 14)
    add("C01", "D03", 20, 5)
    add("C02", "D01", 16, 4)
    return make_snapshot(students=students, rows=rows)


class TestDisciplineRanking:
    def test_enrollment_floor_hides_small_disciplines(self):
        ranking = discipline_failure_ranking(discipline_snapshot())
        keys = {(e.course_id, e.discipline_id) for e in ranking.entries}
        assert ("C01", "D02") not in keys  # 14 enrollments and a 100% rate, still out
        assert len(keys) == 3

    def test_rate_ties_break_by_enrollment_then_name(self):
        ranking = discipline_failure_ranking(discipline_snapshot(), order=RateOrder.HIGHEST)
        assert [(e.course_id, e.discipline_id) for e in ranking.entries] == [
            ("C01", "D03"),  # rate 25, 20 enrolled
            ("C02", "D01"),  # rate 25, 16 enrolled
            ("C01", "D01"),  # rate 20
        ]

    def test_lowest_order_reverses_the_rate_sort(self):
        ranking = discipline_failure_ranking(discipline_snapshot(), order=RateOrder.LOWEST)
        assert [(e.course_id, e.discipline_id) for e in ranking.entries] == [
            ("C01", "D01"),
            ("C01", "D03"),
            ("C02", "D01"),
        ]

    def test_same_discipline_id_ranks_per_course(self):
        ranking = discipline_failure_ranking(discipline_snapshot())
        d01 = [e for e in ranking.entries if e.discipline_id == "D01"]
        assert {(e.course_id, e.enrolled_count) for e in d01} == {("C01", 15), ("C02", 16)}

    def test_references_only_average_qualifying_disciplines(self):
        ranking = discipline_failure_ranking(discipline_snapshot(), course="C01")
        assert ranking.institution_avg_rate == Fraction(70, 3)  # (20 + 25 + 25) / 3
        assert ranking.course_avg_rate == Fraction(45, 2)  # (20 + 25) / 2
        assert ranking.payload()["references"] == {
            "institution_avg_rate": 23.3,
            "course_avg_rate": 22.5,
        }

    def test_course_scope_keeps_institution_wide_reference(self):
        unscoped = discipline_failure_ranking(discipline_snapshot())
        scoped = discipline_failure_ranking(discipline_snapshot(), course="C02")
        assert scoped.institution_avg_rate == unscoped.institution_avg_rate
        assert unscoped.course_avg_rate is None

    def test_no_qualifying_disciplines_yield_empty_references(self):
        snapshot = make_snapshot(
            students=[dropout("S1")], rows=[make_row(student_id="S1")]
        )
        ranking = discipline_failure_ranking(snapshot)
        assert ranking.entries == ()
        assert ranking.institution_avg_rate is None

    @pytest.mark.parametrize("limit", [4, 21, 0, -3])
    def test_limit_outside_window_rejected(self, limit):
        with pytest.raises(ValueError, match="between 5 and 20"):
            discipline_failure_ranking(discipline_snapshot(), limit=limit)

    def test_limit_window_edges_accepted(self):
        for limit in (5, 20):
            ranking = discipline_failure_ranking(discipline_snapshot(), limit=limit)
            assert len(ranking.entries) == 3


def flows(*triples):
    return tuple(YearFlow(*t) for t in triples)


def cohort(course_name, scope, entrants, per_year, entry_year=2010):
    return CohortFlow(
        course_name=course_name,
        scope=scope,
        entry_year=entry_year,
        entrants=entrants,
        per_year=per_year,
    )


class TestTdaHistogram:
    def make(self, references=None):
        cohorts = [
            cohort("analytics", CohortScope.INSTITUTION, 100, flows((10, 5, 1), (20, 14, 1))),
            cohort("analytics", CohortScope.NATIONAL, 50, flows((5, 5, 0))),
            cohort("botany", CohortScope.INSTITUTION, 2, flows((0, 0, 2))),
        ]
        return make_snapshot(cohorts=cohorts, references=references)

    def test_final_rates_pair_scopes_per_course(self):
        payload = tda_histogram(self.make()).payload()
        assert payload["entries"] == [
            {"course_name": "analytics", "institution_tda": 50.0, "national_tda": 20.0}
        ]

    def test_undefined_cohort_is_omitted_and_warned(self):
        result = tda_histogram(self.make())
        assert len(result.warnings) == 1
        assert "botany" in result.warnings[0]
        assert "year 1" in result.warnings[0]
        assert all(entry.course_name != "botany" for entry in result.entries)

    def test_derived_national_average_beats_configured_reference(self):
        references = TdaReferences(national_avg=Fraction(99), state_avg=Fraction("52.3"))
        result = tda_histogram(self.make(references))
        assert result.national_avg == Fraction(20)
        assert result.state_avg == Fraction("52.3")
        assert result.institution_avg == Fraction(50)

    def test_configured_national_average_fills_the_gap(self):
        cohorts = [cohort("analytics", CohortScope.INSTITUTION, 100, flows((10, 0, 0)))]
        references = TdaReferences(national_avg=Fraction("56.5"))
        result = tda_histogram(make_snapshot(cohorts=cohorts, references=references))
        assert result.national_avg == Fraction("56.5")
        assert result.payload()["references"]["national_avg"] == 56.5

    def test_no_cohort_data_warns_and_keeps_references(self):
        references = TdaReferences(national_avg=Fraction(56), state_avg=Fraction(52))
        result = tda_histogram(make_snapshot(references=references))
        assert result.entries == ()
        assert result.institution_avg is None
        assert result.national_avg == Fraction(56)
        assert "no cohort data available" in result.warnings

    def test_entries_sort_by_course_name(self):
        cohorts = [
            cohort("zoology", CohortScope.INSTITUTION, 40, flows((4, 0, 0))),
            cohort("algebra", CohortScope.INSTITUTION, 40, flows((8, 0, 0))),
        ]
        result = tda_histogram(make_snapshot(cohorts=cohorts))
        assert [entry.course_name for entry in result.entries] == ["algebra", "zoology"]
        assert result.entries[0].national is None
