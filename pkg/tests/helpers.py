"""Shared builders for tests: tiny CSV sources and in-memory snapshots."""

from __future__ import annotations

import io
from fractions import Fraction

from dropscope.ingest import build_snapshot
from dropscope.model import (
    ACTIVITY_COLUMNS,
    EnrollmentResult,
    EnrollmentRow,
    IngestReport,
    Snapshot,
    Situation,
    StudentProfile,
    TdaReferences,
)

DEFAULT_CELLS = {
    "student_id": "S0001",
    "course_id": "C01",
    "discipline_id": "D01",
    "year": "2012",
    "term": "1",
    "grade": "7.0",
    "credits": "4",
    "attendance_pct": "88.0",
    "result": "approved",
    "entry_year": "2010",
    "situation": "dropout",
    "income_band": "1-3 MW",
    "birth_city": "Vitoria",
    "birth_state": "ES",
    "nationality": "brazilian",
    "quota_type": "none",
    "high_school_type": "public",
    "admission_form": "entrance_exam",
    "housing": "family",
    "employment": "unemployed",
    "university_aid": "none",
    "study_plan": "none",
}

COHORT_HEADER = "course_name,scope,entry_year,year_index,withdrawals,transfers,deaths,entrants"


def activity_csv(rows: list[dict]) -> str:
    lines = [",".join(ACTIVITY_COLUMNS)]
    for overrides in rows:
        cells = {**DEFAULT_CELLS, **overrides}
        lines.append(",".join(cells[column] for column in ACTIVITY_COLUMNS))
    return "\n".join(lines) + "\n"


def cohort_csv(rows: list[str] = ()) -> str:
    return "\n".join([COHORT_HEADER, *rows]) + "\n"


def snapshot_from(
    activity_text: str,
    cohort_text: str | None = None,
    *,
    mapping=None,
    references=None,
    version: int = 1,
) -> Snapshot:
    return build_snapshot(
        io.BytesIO(activity_text.encode("utf-8")),
        io.BytesIO((cohort_text or cohort_csv()).encode("utf-8")),
        mapping=mapping,
        references=references,
        version=version,
    )


def make_row(**overrides) -> EnrollmentRow:
    values = dict(
        student_id="S0001",
        course_id="C01",
        discipline_id="D01",
        year=2012,
        term=1,
        grade=Fraction(7),
        credits=4,
        attendance_pct=Fraction(88),
        result=EnrollmentResult.APPROVED,
        entry_year="2010",
        situation_raw="dropout",
        income_band="1-3 MW",
        birth_city="Vitoria",
        birth_state="ES",
        nationality="brazilian",
        quota_type="none",
        high_school_type="public",
        admission_form="entrance_exam",
        housing="family",
        employment="unemployed",
        university_aid="none",
        study_plan="none",
    )
    values.update(overrides)
    return EnrollmentRow(**values)


def make_profile(**overrides) -> StudentProfile:
    values = dict(
        student_id="S0001",
        course_id="C01",
        entry_year=2010,
        situation=Situation.DROPOUT,
        income_band="1-3 MW",
        birth_city="Vitoria",
        birth_state="ES",
        nationality="brazilian",
        quota_type="none",
        high_school_type="public",
        admission_form="entrance_exam",
        housing="family",
        employment="unemployed",
        university_aid="none",
        study_plan="none",
    )
    values.update(overrides)
    return StudentProfile(**values)


def empty_report() -> IngestReport:
    return IngestReport(
        rows_read=0,
        rows_kept=0,
        rows_deduplicated=0,
        rows_rejected=0,
        rejected_rows=(),
        students_built=0,
        missing_field_counts={},
    )


def make_snapshot(
    students=(),
    rows=(),
    cohorts=(),
    references: TdaReferences | None = None,
    version: int = 1,
) -> Snapshot:
    return Snapshot(
        rows=tuple(rows),
        students=tuple(students),
        cohorts=tuple(cohorts),
        ingest_report=empty_report(),
        issues=(),
        tda_references=references or TdaReferences(),
        version=version,
    )


def engine_oracle_mismatches(snapshot: Snapshot, manifest: dict) -> list[str]:
    """Run every query operation against both implementations.

    Returns one entry per payload that differs, empty when the engine and the
    brute-force manifest oracle agree on everything.
    """
    from dropscope import fixtures as oracle
    from dropscope.metrics import FailureKind
    from dropscope.model import NOT_INFORMED
    from dropscope.queries import (
        FilterSet,
        RankOrder,
        RateOrder,
        attendance_bands,
        category_breakdown,
        course_situation_ranking,
        cr_bands,
        discipline_failure_ranking,
        failure_histogram,
        situation_counts,
        tda_histogram,
        CATEGORY_GROUPS,
    )

    mismatches: list[str] = []

    def check(name: str, engine_payload, oracle_payload) -> None:
        if engine_payload != oracle_payload:
            mismatches.append(f"{name}: engine={engine_payload!r} oracle={oracle_payload!r}")

    students = manifest["students"]
    courses = snapshot.course_ids()
    course_scopes = [None, *courses]

    filter_cases: list[dict] = [{}]
    if courses:
        filter_cases.append({"course_id": courses[0]})
    years = sorted({s["entry_year"] for s in students if s["entry_year"] is not None})
    if years:
        filter_cases.append({"entry_year": years[0]})
    incomes = sorted(
        {s["attributes"]["income_band"] for s in students} - {NOT_INFORMED}
    )
    if incomes:
        filter_cases.append({"income_band": incomes[0]})
    if courses and incomes:
        filter_cases.append({"course_id": courses[-1], "income_band": incomes[-1]})
    for case in filter_cases:
        check(
            f"situations filters={case}",
            situation_counts(snapshot, FilterSet(**case)).payload(),
            oracle.oracle_situation_counts(manifest, case),
        )

    for situation in ("graduated", "in_progress", "dropout"):
        for order in ("top", "bottom"):
            for limit in (3, max(1, len(courses))):
                check(
                    f"course-ranking {situation}/{order}/{limit}",
                    course_situation_ranking(
                        snapshot, Situation(situation), RankOrder(order), limit
                    ).payload(),
                    oracle.oracle_course_ranking(manifest, situation, order, limit),
                )

    for course in course_scopes:
        check(
            f"attendance-bands course={course}",
            attendance_bands(snapshot, course).payload(),
            oracle.oracle_attendance_bands(manifest, course),
        )
        check(
            f"cr-bands course={course}",
            cr_bands(snapshot, course).payload(),
            oracle.oracle_cr_bands(manifest, course),
        )
        for kind in ("all", "grade", "frequency"):
            check(
                f"failure-histogram course={course} kind={kind}",
                failure_histogram(snapshot, course, FailureKind(kind)).payload(),
                oracle.oracle_failure_histogram(manifest, course, kind),
            )
        for group, indexes in CATEGORY_GROUPS.items():
            for index in indexes:
                check(
                    f"categories {group}/{index} course={course}",
                    category_breakdown(snapshot, group, index, course).payload(),
                    oracle.oracle_category_breakdown(manifest, index, course),
                )
        for order in ("highest", "lowest"):
            for limit in (5, 10, 20):
                check(
                    f"disciplines {order}/{limit} course={course}",
                    discipline_failure_ranking(
                        snapshot, course, RateOrder(order), limit
                    ).payload(),
                    oracle.oracle_discipline_ranking(manifest, course, order, limit),
                )

    check("tda-histogram", tda_histogram(snapshot).payload(), oracle.oracle_tda_histogram(manifest))
    return mismatches
