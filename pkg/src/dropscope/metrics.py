"""Pure metric kernels: accumulated withdrawal series, credit-weighted
performance coefficient, attendance averaging and failure counting.

Nothing here knows about filters, snapshots or serving. All ratios are
returned as exact ``Fraction`` values; presentation rounding belongs to the
callers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from dropscope.model import CohortFlow, CohortScope, EnrollmentResult, EnrollmentRow, round1


class TdaUndefinedError(ValueError):
    """Raised when the withdrawal-rate denominator hits zero.

    The denominator for year T is ``entrants - cumulative deaths``; once every
    entrant has died the rate stops being meaningful and the caller must know
    at which follow-up year that happened.
    """

    def __init__(self, year_index: int, course_name: str = "") -> None:
        self.year_index = year_index
        self.course_name = course_name
        where = f" for course {course_name!r}" if course_name else ""
        super().__init__(f"denominator zero at year {year_index}{where}")


@dataclass(frozen=True)
class TdaSeries:
    """Accumulated withdrawal rate of one cohort, year by year.

    ``values[i]`` is ``100 * numerators[i] / denominators[i]`` where the
    numerator accumulates withdrawals plus transfers through year ``i + 1``
    and the denominator is entrants minus accumulated deaths.
    """

    course_name: str
    scope: CohortScope
    entry_year: int
    entrants: int
    numerators: tuple[int, ...]
    denominators: tuple[int, ...]
    values: tuple[Fraction, ...]

    @property
    def final(self) -> Fraction:
        """Rate at the end of the follow-up window."""
        return self.values[-1]

    def rendered(self) -> tuple[float, ...]:
        """Presentation form: each year's rate at 1 decimal."""
        return tuple(round1(v) for v in self.values)


def compute_tda_series(cohort: CohortFlow) -> TdaSeries:
    """Accumulated withdrawal rate for every follow-up year of a cohort.

    Raises:
        TdaUndefinedError: if entrants minus cumulative deaths reaches zero
            at any year. The series is never truncated silently.
    """
    if not cohort.per_year:
        raise ValueError(f"cohort {cohort.course_name!r} has no follow-up years")
    exits = 0
    deaths = 0
    numerators: list[int] = []
    denominators: list[int] = []
    values: list[Fraction] = []
    for index, flow in enumerate(cohort.per_year, start=1):
        exits += flow.withdrawals + flow.transfers
        deaths += flow.deaths
        denominator = cohort.entrants - deaths
        if denominator <= 0:
            raise TdaUndefinedError(index, cohort.course_name)
        numerators.append(exits)
        denominators.append(denominator)
        values.append(Fraction(100 * exits, denominator))
    return TdaSeries(
        course_name=cohort.course_name,
        scope=cohort.scope,
        entry_year=cohort.entry_year,
        entrants=cohort.entrants,
        numerators=tuple(numerators),
        denominators=tuple(denominators),
        values=tuple(values),
    )


def compute_cr(rows: Iterable[EnrollmentRow]) -> Fraction | None:
    """Credit-weighted mean grade over the given rows.

    Returns None (undefined) when there are no rows. Credits are at least 1
    per validated row, so a non-empty input always has a positive weight sum.
    """
    weighted = Fraction(0)
    total_credits = 0
    empty = True
    for row in rows:
        weighted += row.grade * row.credits
        total_credits += row.credits
        empty = False
    if empty:
        return None
    return weighted / total_credits


def compute_attendance_mean(rows: Iterable[EnrollmentRow]) -> Fraction | None:
    """Unweighted mean of attendance percentages; None when there are no rows."""
    total = Fraction(0)
    count = 0
    for row in rows:
        total += row.attendance_pct
        count += 1
    if count == 0:
        return None
    return total / count


class FailureKind(enum.Enum):
    """Which enrollment failures to count."""

    ALL = "all"
    GRADE = "grade"
    FREQUENCY = "frequency"


_FAILURE_RESULTS = {
    FailureKind.ALL: {EnrollmentResult.FAILED_BY_GRADE, EnrollmentResult.FAILED_BY_FREQUENCY},
    FailureKind.GRADE: {EnrollmentResult.FAILED_BY_GRADE},
    FailureKind.FREQUENCY: {EnrollmentResult.FAILED_BY_FREQUENCY},
}


def count_failures(rows: Iterable[EnrollmentRow], kind: FailureKind = FailureKind.ALL) -> int:
    """Number of rows whose result is a failure of the requested kind."""
    wanted = _FAILURE_RESULTS[kind]
    return sum(1 for row in rows if row.result in wanted)


@dataclass(frozen=True)
class StudentAcademics:
    """Per-student academic aggregates used by several distributions."""

    cr: Fraction | None
    mean_attendance_pct: Fraction | None
    failures_by_grade: int
    failures_by_frequency: int

    @property
    def failures_total(self) -> int:
        return self.failures_by_grade + self.failures_by_frequency


def compute_student_academics(rows: Sequence[EnrollmentRow]) -> StudentAcademics:
    """All per-student academic aggregates in one pass over the rows."""
    return StudentAcademics(
        cr=compute_cr(rows),
        mean_attendance_pct=compute_attendance_mean(rows),
        failures_by_grade=count_failures(rows, FailureKind.GRADE),
        failures_by_frequency=count_failures(rows, FailureKind.FREQUENCY),
    )
