"""Domain model shared by the ingest, metrics, query and service layers.

Values that feed ratio metrics (grades, attendance, the cohort flow counts)
are kept exact: grades and attendance are parsed into ``fractions.Fraction``
and every derived ratio stays rational until the serialization layer rounds
it to the 1-decimal presentation form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

#: Sentinel stored for attribute values that were absent in the source data.
NOT_INFORMED = "NOT_INFORMED"


class Situation(enum.Enum):
    """Consolidated academic situation of a student in a course."""

    GRADUATED = "graduated"
    IN_PROGRESS = "in_progress"
    DROPOUT = "dropout"
    DECEASED = "deceased"


class EnrollmentResult(enum.Enum):
    """Outcome of one student/discipline/term enrollment."""

    APPROVED = "approved"
    FAILED_BY_GRADE = "failed_by_grade"
    FAILED_BY_FREQUENCY = "failed_by_frequency"
    OTHER = "other"


class CohortScope(enum.Enum):
    """Whether a cohort flow describes the local course or its national average."""

    INSTITUTION = "institution"
    NATIONAL = "national"


#: Canonical activity-table column order. Source files may use different
#: header names; a mapping config translates them to these.
ACTIVITY_COLUMNS = (
    "student_id",
    "course_id",
    "discipline_id",
    "year",
    "term",
    "grade",
    "credits",
    "attendance_pct",
    "result",
    "entry_year",
    "situation",
    "income_band",
    "birth_city",
    "birth_state",
    "nationality",
    "quota_type",
    "high_school_type",
    "admission_form",
    "housing",
    "employment",
    "university_aid",
    "study_plan",
)

#: Per-student attribute columns, mapped to their EnrollmentRow field names.
#: These repeat on every row of a student and get reconciled into a profile.
ATTRIBUTE_FIELDS = {
    "entry_year": "entry_year",
    "situation": "situation_raw",
    "income_band": "income_band",
    "birth_city": "birth_city",
    "birth_state": "birth_state",
    "nationality": "nationality",
    "quota_type": "quota_type",
    "high_school_type": "high_school_type",
    "admission_form": "admission_form",
    "housing": "housing",
    "employment": "employment",
    "university_aid": "university_aid",
    "study_plan": "study_plan",
}

#: Categorical profile attributes (everything reconciled except entry_year
#: and the raw situation, which map to typed profile fields).
CATEGORY_ATTRIBUTES = (
    "income_band",
    "birth_city",
    "birth_state",
    "nationality",
    "quota_type",
    "high_school_type",
    "admission_form",
    "housing",
    "employment",
    "university_aid",
    "study_plan",
)


@dataclass(frozen=True)
class EnrollmentRow:
    """One student/discipline/term record from the activity table."""

    student_id: str
    course_id: str
    discipline_id: str
    year: int
    term: int
    grade: Fraction
    credits: int
    attendance_pct: Fraction
    result: EnrollmentResult
    entry_year: str
    situation_raw: str
    income_band: str
    birth_city: str
    birth_state: str
    nationality: str
    quota_type: str
    high_school_type: str
    admission_form: str
    housing: str
    employment: str
    university_aid: str
    study_plan: str

    def key(self) -> tuple[str, str, str, int, int]:
        """Identity used for duplicate-key detection after exact dedup."""
        return (self.student_id, self.course_id, self.discipline_id, self.year, self.term)

    def attribute(self, column: str) -> str:
        """Return the raw attribute value for a canonical column name."""
        return getattr(self, ATTRIBUTE_FIELDS[column])


@dataclass(frozen=True)
class StudentProfile:
    """Reconciled per-student view of the attributes repeated on activity rows."""

    student_id: str
    course_id: str
    entry_year: int | None
    situation: Situation
    income_band: str
    birth_city: str
    birth_state: str
    nationality: str
    quota_type: str
    high_school_type: str
    admission_form: str
    housing: str
    employment: str
    university_aid: str
    study_plan: str

    def attribute(self, name: str) -> str:
        """Return a categorical attribute by its canonical column name."""
        if name not in CATEGORY_ATTRIBUTES:
            raise KeyError(f"not a categorical attribute: {name!r}")
        return getattr(self, name)


class YearFlow(NamedTuple):
    """Cohort movement during one follow-up year."""

    withdrawals: int
    transfers: int
    deaths: int


@dataclass(frozen=True)
class CohortFlow:
    """Entry cohort of a course plus its year-by-year exits.

    ``per_year[0]`` is the first follow-up year. The parser guarantees
    non-negative counts and that cumulative exits never exceed ``entrants``.
    """

    course_name: str
    scope: CohortScope
    entry_year: int
    entrants: int
    per_year: tuple[YearFlow, ...]


@dataclass(frozen=True)
class RejectedRow:
    """Rejected activity line; ``line`` is 0 for post-parse rejections."""

    line: int
    reason: str


@dataclass(frozen=True)
class CohortReject:
    """A cohort group (or unparseable cohort line) dropped during ingest."""

    course_name: str
    scope: str
    reason: str


@dataclass(frozen=True)
class ProfileIssue:
    """Something worth surfacing from profile reconciliation.

    ``kind`` is ``"attribute_conflict"`` when a student's rows disagreed on an
    attribute (the majority value was kept), or ``"unmapped_situation"`` when
    the student's situation value has no configured mapping (the student and
    all of their rows were dropped).
    """

    kind: str
    student_id: str
    course_id: str
    attribute: str
    chosen: str
    observed: tuple[str, ...]


@dataclass(frozen=True)
class IngestReport:
    """Accounting for one ingest run.

    Invariant: ``rows_read == rows_kept + rows_deduplicated + rows_rejected``.
    """

    rows_read: int
    rows_kept: int
    rows_deduplicated: int
    rows_rejected: int
    rejected_rows: tuple[RejectedRow, ...]
    students_built: int
    missing_field_counts: dict[str, int]
    cohorts_read: int = 0
    cohorts_kept: int = 0
    cohort_rejects: tuple[CohortReject, ...] = ()

    def summary(self) -> str:
        """One-line accounting summary, used in response headers and logs."""
        return (
            f"read={self.rows_read} kept={self.rows_kept} "
            f"dedup={self.rows_deduplicated} rejected={self.rows_rejected} "
            f"students={self.students_built}"
        )


@dataclass(frozen=True)
class TdaReferences:
    """Reference percentages that cannot always be derived from the data.

    The national average is derivable whenever national-scope cohorts were
    ingested; the state average always comes from companion metadata.
    """

    national_avg: Fraction | None = None
    state_avg: Fraction | None = None


@dataclass(frozen=True)
class Snapshot:
    """Immutable, fully validated dataset the query layer reads from.

    Every row's ``(student_id, course_id)`` pair has a profile in
    ``students``. Consumers never mutate a snapshot; reloads build a new one
    and swap it in whole.
    """

    rows: tuple[EnrollmentRow, ...]
    students: tuple[StudentProfile, ...]
    cohorts: tuple[CohortFlow, ...]
    ingest_report: IngestReport
    issues: tuple[ProfileIssue, ...]
    tda_references: TdaReferences
    version: int
    _rows_by_student: dict[tuple[str, str], tuple[EnrollmentRow, ...]] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        grouped: dict[tuple[str, str], list[EnrollmentRow]] = {}
        for row in self.rows:
            grouped.setdefault((row.student_id, row.course_id), []).append(row)
        index = {key: tuple(rows) for key, rows in grouped.items()}
        object.__setattr__(self, "_rows_by_student", index)
        known = {(p.student_id, p.course_id) for p in self.students}
        orphaned = set(index) - known
        if orphaned:
            sid, cid = sorted(orphaned)[0]
            raise ValueError(
                f"snapshot rows reference a student without a profile: "
                f"student_id={sid!r} course_id={cid!r}"
            )

    def rows_for(self, student_id: str, course_id: str) -> tuple[EnrollmentRow, ...]:
        """All activity rows of one student in one course (may be empty)."""
        return self._rows_by_student.get((student_id, course_id), ())

    def course_ids(self) -> list[str]:
        """Sorted distinct course ids present among student profiles."""
        return sorted({p.course_id for p in self.students})


def round1(value: Fraction) -> float:
    """Round an exact ratio to 1 decimal, half away from zero upward.

    This is the single rounding rule for every percentage the system renders;
    ``round()`` is avoided because banker's rounding would turn 12.25 into
    12.2 instead of 12.3.
    """
    return math.floor(value * 10 + Fraction(1, 2)) / 10
