"""Filtered aggregations over a snapshot.

Every operation takes the snapshot explicitly, holds no state and rounds
nothing internally: counts stay integers and ratios stay ``Fraction`` until
``payload()`` produces the wire form (counts as ints, percents at 1 decimal).

Deceased students never enter a dropout-related aggregation; where they would
have been counted they surface in ``excluded_undefined`` instead.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from dropscope.metrics import (
    FailureKind,
    TdaUndefinedError,
    compute_student_academics,
    compute_tda_series,
)
from dropscope.model import CohortScope, Situation, Snapshot, StudentProfile, round1

#: Attribute groups for the category breakdown, keyed by group name.
CATEGORY_GROUPS: dict[str, tuple[str, ...]] = {
    "socioeconomic": ("income_band", "university_aid", "housing", "employment"),
    "geographic": ("birth_city", "birth_state", "nationality"),
    "academic": ("quota_type", "study_plan", "high_school_type", "admission_form"),
}

#: Label under which truncated categories are pooled.
OTHERS_LABEL = "Others"

ATTENDANCE_ABOVE_90 = "above_90"
ATTENDANCE_75_TO_90 = "from_75_to_90"
ATTENDANCE_BELOW_75 = "below_75"

CR_BELOW_5 = "below_5"
CR_5_TO_7 = "from_5_to_7"
CR_AT_LEAST_7 = "at_least_7"

RANKABLE_SITUATIONS = (Situation.GRADUATED, Situation.IN_PROGRESS, Situation.DROPOUT)

#: A discipline needs at least this many enrollments to be ranked at all.
MIN_RANKED_ENROLLMENT = 15

RANKING_LIMIT_MIN = 5
RANKING_LIMIT_MAX = 20


class RankOrder(enum.Enum):
    TOP = "top"
    BOTTOM = "bottom"


class RateOrder(enum.Enum):
    HIGHEST = "highest"
    LOWEST = "lowest"


class CrMode(enum.Enum):
    """Presentation hint for the performance-coefficient bands.

    The payload always carries both counts and percents; the mode only tells
    a client which of the two to foreground.
    """

    ABSOLUTE = "absolute"
    PERCENT = "percent"


@dataclass(frozen=True)
class FilterSet:
    """Conjunction of optional equality constraints over student profiles."""

    course_id: str | None = None
    entry_year: int | None = None
    income_band: str | None = None
    birth_city: str | None = None
    quota_type: str | None = None
    high_school_type: str | None = None

    def is_empty(self) -> bool:
        return all(
            value is None
            for value in (
                self.course_id,
                self.entry_year,
                self.income_band,
                self.birth_city,
                self.quota_type,
                self.high_school_type,
            )
        )

    def matches(self, profile: StudentProfile) -> bool:
        if self.course_id is not None and profile.course_id != self.course_id:
            return False
        if self.entry_year is not None and profile.entry_year != self.entry_year:
            return False
        if self.income_band is not None and profile.income_band != self.income_band:
            return False
        if self.birth_city is not None and profile.birth_city != self.birth_city:
            return False
        if self.quota_type is not None and profile.quota_type != self.quota_type:
            return False
        if self.high_school_type is not None and profile.high_school_type != self.high_school_type:
            return False
        return True


@dataclass(frozen=True)
class DistributionEntry:
    label: str
    count: int
    percent: Fraction

    def payload(self) -> dict:
        return {"label": self.label, "count": self.count, "percent": round1(self.percent)}


@dataclass(frozen=True)
class Distribution:
    """Labeled counts plus their share of the counted population.

    ``total`` counts every student considered, including the
    ``excluded_undefined`` ones that had no defined value to be bucketed by,
    so ``sum(counts) + excluded_undefined == total``. Percents are shares of
    the counted (non-excluded) population.
    """

    entries: tuple[DistributionEntry, ...]
    total: int
    excluded_undefined: int

    def payload(self) -> dict:
        return {
            "entries": [entry.payload() for entry in self.entries],
            "total": self.total,
            "excluded_undefined": self.excluded_undefined,
        }


def _make_distribution(
    counts: list[tuple[str, int]],
    excluded: int,
    *,
    presorted: bool = False,
) -> Distribution:
    counted = sum(count for _, count in counts)
    if not presorted:
        counts = sorted(counts, key=lambda item: (-item[1], item[0]))
    entries = tuple(
        DistributionEntry(
            label=label,
            count=count,
            percent=Fraction(100 * count, counted) if counted else Fraction(0),
        )
        for label, count in counts
    )
    return Distribution(entries=entries, total=counted + excluded, excluded_undefined=excluded)


def apply_filter(snapshot: Snapshot, filters: FilterSet) -> list[StudentProfile]:
    """All profiles matching the filter, in snapshot order. Deceased students
    match too; each aggregation decides how to treat them."""
    return [profile for profile in snapshot.students if filters.matches(profile)]


def situation_counts(snapshot: Snapshot, filters: FilterSet | None = None) -> Distribution:
    """How many matching students graduated, are in progress, or dropped out.

    Deceased students matching the filter are reported in
    ``excluded_undefined`` rather than as a fourth bucket.
    """
    filters = filters or FilterSet()
    counts = {situation.value: 0 for situation in RANKABLE_SITUATIONS}
    excluded = 0
    for profile in apply_filter(snapshot, filters):
        if profile.situation is Situation.DECEASED:
            excluded += 1
        else:
            counts[profile.situation.value] += 1
    return _make_distribution(list(counts.items()), excluded)


@dataclass(frozen=True)
class CourseCount:
    course_id: str
    count: int

    def payload(self) -> dict:
        return {"course_id": self.course_id, "count": self.count}


@dataclass(frozen=True)
class CourseRanking:
    entries: tuple[CourseCount, ...]

    def payload(self) -> dict:
        return {"entries": [entry.payload() for entry in self.entries]}


def course_situation_ranking(
    snapshot: Snapshot,
    situation: Situation,
    order: RankOrder = RankOrder.TOP,
    limit: int = 15,
) -> CourseRanking:
    """Courses ranked by how many non-deceased students are in a situation.

    Every course present among the profiles participates, including those
    with a zero count. Ties break lexicographically by course id. ``limit``
    is capped at the number of courses.
    """
    if situation not in RANKABLE_SITUATIONS:
        raise ValueError(f"situation {situation.value!r} cannot be ranked")
    if limit < 1:
        raise ValueError("limit must be at least 1")
    counts = {course_id: 0 for course_id in snapshot.course_ids()}
    for profile in snapshot.students:
        if profile.situation is situation:
            counts[profile.course_id] += 1
    reverse = order is RankOrder.TOP
    if reverse:
        ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    else:
        ordered = sorted(counts.items(), key=lambda item: (item[1], item[0]))
    entries = tuple(CourseCount(course_id, count) for course_id, count in ordered[:limit])
    return CourseRanking(entries=entries)


@dataclass(frozen=True)
class TdaCourseEntry:
    course_name: str
    institution: Fraction | None
    national: Fraction | None

    def payload(self) -> dict:
        return {
            "course_name": self.course_name,
            "institution_tda": None if self.institution is None else round1(self.institution),
            "national_tda": None if self.national is None else round1(self.national),
        }


@dataclass(frozen=True)
class TdaHistogram:
    entries: tuple[TdaCourseEntry, ...]
    institution_avg: Fraction | None
    national_avg: Fraction | None
    state_avg: Fraction | None
    warnings: tuple[str, ...]

    def payload(self) -> dict:
        return {
            "entries": [entry.payload() for entry in self.entries],
            "references": {
                "institution_avg": None if self.institution_avg is None else round1(self.institution_avg),
                "national_avg": None if self.national_avg is None else round1(self.national_avg),
                "state_avg": None if self.state_avg is None else round1(self.state_avg),
            },
            "warnings": list(self.warnings),
        }


def _mean(values: list[Fraction]) -> Fraction | None:
    if not values:
        return None
    return sum(values, Fraction(0)) / len(values)


def tda_histogram(snapshot: Snapshot) -> TdaHistogram:
    """Final accumulated withdrawal rate per course, both scopes side by side.

    A cohort whose rate is undefined (denominator reaches zero) is left out
    of the entries and of the averages, and named in ``warnings``. The
    institution average is always derived from the data; the national average
    is derived when national-scope cohorts exist and otherwise falls back to
    the configured reference, as does the state average (which has no
    derivable source here).
    """
    finals: dict[tuple[str, CohortScope], Fraction] = {}
    warnings: list[str] = []
    if not snapshot.cohorts:
        warnings.append("no cohort data available")
    for cohort in snapshot.cohorts:
        try:
            series = compute_tda_series(cohort)
        except TdaUndefinedError as exc:
            warnings.append(
                f"course {cohort.course_name!r} ({cohort.scope.value}): "
                f"denominator zero at year {exc.year_index}; omitted"
            )
            continue
        finals[(cohort.course_name, cohort.scope)] = series.final

    names = sorted({name for name, _ in finals})
    entries = tuple(
        TdaCourseEntry(
            course_name=name,
            institution=finals.get((name, CohortScope.INSTITUTION)),
            national=finals.get((name, CohortScope.NATIONAL)),
        )
        for name in names
    )
    institution_values = [
        value for (_, scope), value in finals.items() if scope is CohortScope.INSTITUTION
    ]
    national_values = [
        value for (_, scope), value in finals.items() if scope is CohortScope.NATIONAL
    ]
    national_avg = _mean(national_values)
    if national_avg is None:
        national_avg = snapshot.tda_references.national_avg
    return TdaHistogram(
        entries=entries,
        institution_avg=_mean(institution_values),
        national_avg=national_avg,
        state_avg=snapshot.tda_references.state_avg,
        warnings=tuple(warnings),
    )


def _dropout_students(snapshot: Snapshot, course: str | None) -> list[StudentProfile]:
    return [
        profile
        for profile in snapshot.students
        if profile.situation is Situation.DROPOUT
        and (course is None or profile.course_id == course)
    ]


def attendance_bands(snapshot: Snapshot, course: str | None = None) -> Distribution:
    """Dropout students bucketed by their mean attendance percentage.

    Bands: above 90, from 75 to 90 inclusive, below 75. Students without any
    activity rows have no mean and land in ``excluded_undefined``.
    """
    counts = {ATTENDANCE_ABOVE_90: 0, ATTENDANCE_75_TO_90: 0, ATTENDANCE_BELOW_75: 0}
    excluded = 0
    for profile in _dropout_students(snapshot, course):
        mean = compute_student_academics(
            snapshot.rows_for(profile.student_id, profile.course_id)
        ).mean_attendance_pct
        if mean is None:
            excluded += 1
        elif mean > 90:
            counts[ATTENDANCE_ABOVE_90] += 1
        elif mean >= 75:
            counts[ATTENDANCE_75_TO_90] += 1
        else:
            counts[ATTENDANCE_BELOW_75] += 1
    return _make_distribution(list(counts.items()), excluded)


def cr_bands(
    snapshot: Snapshot, course: str | None = None, mode: CrMode = CrMode.ABSOLUTE
) -> Distribution:
    """Dropout students bucketed by performance coefficient.

    Bands: below 5, from 5 up to (excluding) 7, and 7 or more. Students with
    no rows have an undefined coefficient and are excluded. ``mode`` does not
    change the numbers; see :class:`CrMode`.
    """
    del mode
    counts = {CR_BELOW_5: 0, CR_5_TO_7: 0, CR_AT_LEAST_7: 0}
    excluded = 0
    for profile in _dropout_students(snapshot, course):
        cr = compute_student_academics(
            snapshot.rows_for(profile.student_id, profile.course_id)
        ).cr
        if cr is None:
            excluded += 1
        elif cr < 5:
            counts[CR_BELOW_5] += 1
        elif cr < 7:
            counts[CR_5_TO_7] += 1
        else:
            counts[CR_AT_LEAST_7] += 1
    return _make_distribution(list(counts.items()), excluded)


@dataclass(frozen=True)
class HistogramBin:
    failures: int
    students: int

    def payload(self) -> dict:
        return {"failures": self.failures, "students": self.students}


@dataclass(frozen=True)
class FailureHistogram:
    bins: tuple[HistogramBin, ...]

    def payload(self) -> dict:
        return {"bins": [bin.payload() for bin in self.bins]}


def failure_histogram(
    snapshot: Snapshot, course: str | None = None, kind: FailureKind = FailureKind.ALL
) -> FailureHistogram:
    """Dropout students grouped by how many enrollments they failed.

    Bins run contiguously from 0 to the maximum observed count, zero-count
    bins included. No dropout students in scope means no bins.
    """
    per_student: list[int] = []
    for profile in _dropout_students(snapshot, course):
        academics = compute_student_academics(
            snapshot.rows_for(profile.student_id, profile.course_id)
        )
        if kind is FailureKind.GRADE:
            per_student.append(academics.failures_by_grade)
        elif kind is FailureKind.FREQUENCY:
            per_student.append(academics.failures_by_frequency)
        else:
            per_student.append(academics.failures_total)
    if not per_student:
        return FailureHistogram(bins=())
    counter = Counter(per_student)
    bins = tuple(
        HistogramBin(failures=k, students=counter.get(k, 0))
        for k in range(max(counter) + 1)
    )
    return FailureHistogram(bins=bins)


def category_breakdown(
    snapshot: Snapshot, group: str, index: str, course: str | None = None
) -> Distribution:
    """Dropout students broken down by one categorical attribute.

    The five most frequent categories are kept (ties lexicographic) and the
    rest pool into a final ``Others`` entry. ``NOT_INFORMED`` is an ordinary,
    fully visible category; nothing is excluded here.
    """
    if group not in CATEGORY_GROUPS:
        raise ValueError(f"unknown category group {group!r}")
    if index not in CATEGORY_GROUPS[group]:
        raise ValueError(f"index {index!r} is not part of group {group!r}")
    counter = Counter(
        profile.attribute(index) for profile in _dropout_students(snapshot, course)
    )
    ordered = sorted(counter.items(), key=lambda item: (-item[1], item[0]))
    top = ordered[:5]
    rest = ordered[5:]
    if rest:
        top.append((OTHERS_LABEL, sum(count for _, count in rest)))
    return _make_distribution(top, 0, presorted=True)


@dataclass(frozen=True)
class DisciplineStats:
    course_id: str
    discipline_id: str
    enrolled_count: int
    failure_count: int

    @property
    def failure_rate(self) -> Fraction:
        return Fraction(100 * self.failure_count, self.enrolled_count)

    def payload(self) -> dict:
        return {
            "course_id": self.course_id,
            "discipline_id": self.discipline_id,
            "enrolled_count": self.enrolled_count,
            "failure_count": self.failure_count,
            "failure_rate": round1(self.failure_rate),
        }


@dataclass(frozen=True)
class DisciplineRanking:
    entries: tuple[DisciplineStats, ...]
    institution_avg_rate: Fraction | None
    course_avg_rate: Fraction | None

    def payload(self) -> dict:
        return {
            "entries": [entry.payload() for entry in self.entries],
            "references": {
                "institution_avg_rate": None
                if self.institution_avg_rate is None
                else round1(self.institution_avg_rate),
                "course_avg_rate": None
                if self.course_avg_rate is None
                else round1(self.course_avg_rate),
            },
        }


def discipline_failure_ranking(
    snapshot: Snapshot,
    course: str | None = None,
    order: RateOrder = RateOrder.HIGHEST,
    limit: int = 10,
) -> DisciplineRanking:
    """Disciplines ranked by failure rate over all their enrollments.

    A discipline is identified by ``(course_id, discipline_id)``; the same
    discipline code under two courses ranks independently. Only disciplines
    with at least ``MIN_RANKED_ENROLLMENT`` enrollments qualify, everywhere:
    in the entries and in both reference averages. Ties break by higher
    enrollment, then lexicographically.

    Raises:
        ValueError: if ``limit`` is outside [5, 20].
    """
    if not RANKING_LIMIT_MIN <= limit <= RANKING_LIMIT_MAX:
        raise ValueError(
            f"limit must be between {RANKING_LIMIT_MIN} and {RANKING_LIMIT_MAX}"
        )
    enrolled: Counter[tuple[str, str]] = Counter()
    failed: Counter[tuple[str, str]] = Counter()
    failing = {"failed_by_grade", "failed_by_frequency"}
    for row in snapshot.rows:
        key = (row.course_id, row.discipline_id)
        enrolled[key] += 1
        if row.result.value in failing:
            failed[key] += 1
    qualifying = [
        DisciplineStats(
            course_id=course_id,
            discipline_id=discipline_id,
            enrolled_count=count,
            failure_count=failed.get((course_id, discipline_id), 0),
        )
        for (course_id, discipline_id), count in enrolled.items()
        if count >= MIN_RANKED_ENROLLMENT
    ]
    in_scope = [
        stats for stats in qualifying if course is None or stats.course_id == course
    ]
    reverse = order is RateOrder.HIGHEST
    in_scope.sort(
        key=lambda stats: (
            -stats.failure_rate if reverse else stats.failure_rate,
            -stats.enrolled_count,
            stats.course_id,
            stats.discipline_id,
        )
    )
    institution_avg = _mean([stats.failure_rate for stats in qualifying])
    course_avg = (
        _mean([stats.failure_rate for stats in qualifying if stats.course_id == course])
        if course is not None
        else None
    )
    return DisciplineRanking(
        entries=tuple(in_scope[:limit]),
        institution_avg_rate=institution_avg,
        course_avg_rate=course_avg,
    )
