"""Parsing, validation and cleaning for the two tabular dataset families.

The activity table holds one row per student/discipline/term enrollment with
the student's attributes repeated on every row. The cohort table holds entry
cohorts with year-by-year withdrawal, transfer and death counts. Both arrive
as comma-delimited text; spreadsheet sources must be exported to CSV first.

Parsing is strict where the metrics depend on it (numeric ranges, result
vocabulary, duplicate keys) and forgiving where real exports are messy
(unknown extra columns are ignored, missing attribute values become the
``NOT_INFORMED`` sentinel).
"""

from __future__ import annotations

import io
import threading
from collections import Counter
from csv import reader as csv_reader
from dataclasses import dataclass, replace
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable

from dropscope.model import (
    ACTIVITY_COLUMNS,
    ATTRIBUTE_FIELDS,
    NOT_INFORMED,
    CohortFlow,
    CohortReject,
    CohortScope,
    EnrollmentResult,
    EnrollmentRow,
    IngestReport,
    ProfileIssue,
    RejectedRow,
    Snapshot,
    Situation,
    StudentProfile,
    TdaReferences,
    YearFlow,
)

COHORT_COLUMNS = (
    "course_name",
    "scope",
    "entry_year",
    "year_index",
    "withdrawals",
    "transfers",
    "deaths",
    "entrants",
)

#: Source tokens (lowercased) treated as an absent attribute value.
MISSING_TOKENS = frozenset({"", "-", "na", "null"})

_RESULT_TOKENS = {member.value: member for member in EnrollmentResult}
_SCOPE_TOKENS = {member.value: member for member in CohortScope}

#: Built-in raw-situation vocabulary. Institutions with other export wording
#: extend or override this through the mapping config (``situation.`` keys).
#: Transfers out of the institution count as dropout here by default.
DEFAULT_SITUATION_MAP: dict[str, Situation] = {
    "graduated": Situation.GRADUATED,
    "concluded": Situation.GRADUATED,
    "enrolled": Situation.IN_PROGRESS,
    "active": Situation.IN_PROGRESS,
    "in_progress": Situation.IN_PROGRESS,
    "deceased": Situation.DECEASED,
    "dropout": Situation.DROPOUT,
    "withdrawn": Situation.DROPOUT,
    "abandoned": Situation.DROPOUT,
    "disconnected": Situation.DROPOUT,
    "transferred": Situation.DROPOUT,
}


class IngestError(Exception):
    """Fatal ingest problem: bad header, unreadable file, broken config."""


@dataclass(frozen=True)
class MappingConfig:
    """Rename rules for source headers plus situation vocabulary overrides."""

    columns: dict[str, str]
    situations: dict[str, Situation]

    @classmethod
    def default(cls) -> "MappingConfig":
        return cls(columns={}, situations=dict(DEFAULT_SITUATION_MAP))


def load_mapping_config(path: str | Path) -> MappingConfig:
    """Read a key=value mapping file.

    Plain ``source_header=canonical_column`` lines rename activity columns.
    Lines of the form ``situation.<raw>=<graduated|in_progress|dropout|deceased>``
    extend or override the built-in situation vocabulary. ``#`` starts a
    comment and blank lines are skipped.
    """
    columns: dict[str, str] = {}
    situations = dict(DEFAULT_SITUATION_MAP)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read mapping config {path}: {exc}") from exc
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise IngestError(f"mapping config line {line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key.startswith("situation."):
            raw = key[len("situation."):].strip().lower()
            try:
                situations[raw] = Situation(value.lower())
            except ValueError:
                raise IngestError(
                    f"mapping config line {line_no}: unknown situation class {value!r}"
                ) from None
        else:
            if value not in ACTIVITY_COLUMNS:
                raise IngestError(
                    f"mapping config line {line_no}: {value!r} is not a canonical column"
                )
            columns[key] = value
    return MappingConfig(columns=columns, situations=situations)


# ---------------------------------------------------------------------------
# activity table
# ---------------------------------------------------------------------------


def _text_stream(source: IO[bytes] | IO[str]) -> IO[str]:
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def _parse_decimal(raw: str) -> Fraction | None:
    try:
        value = Decimal(raw)
    except InvalidOperation:
        return None
    if not value.is_finite():
        return None
    return Fraction(value)


def _parse_int(raw: str) -> int | None:
    try:
        return int(raw, 10)
    except ValueError:
        return None


def _normalize_category(raw: str) -> str:
    value = raw.strip()
    if value.lower() in MISSING_TOKENS:
        return NOT_INFORMED
    return value


class _RowError(Exception):
    def __init__(self, reason: str) -> None:
        self.reason = reason
        super().__init__(reason)


def _build_row(get) -> EnrollmentRow:
    student_id = get("student_id").strip()
    course_id = get("course_id").strip()
    discipline_id = get("discipline_id").strip()
    for name, value in (
        ("student_id", student_id),
        ("course_id", course_id),
        ("discipline_id", discipline_id),
    ):
        if not value:
            raise _RowError(f"missing {name}")

    raw_year = get("year").strip()
    year = _parse_int(raw_year)
    if year is None:
        raise _RowError(f"invalid year {raw_year!r}")

    raw_term = get("term").strip()
    term = _parse_int(raw_term)
    if term is None or term not in (1, 2):
        raise _RowError("term must be 1 or 2")

    raw_grade = get("grade").strip()
    grade = _parse_decimal(raw_grade)
    if grade is None:
        raise _RowError(f"invalid grade {raw_grade!r}")
    if not Fraction(0) <= grade <= Fraction(10):
        raise _RowError("grade out of range [0,10]")

    raw_credits = get("credits").strip()
    credits = _parse_int(raw_credits)
    if credits is None:
        raise _RowError(f"invalid credits {raw_credits!r}")
    if credits < 1:
        raise _RowError("credits must be at least 1")

    raw_attendance = get("attendance_pct").strip()
    attendance = _parse_decimal(raw_attendance)
    if attendance is None:
        raise _RowError(f"invalid attendance_pct {raw_attendance!r}")
    if not Fraction(0) <= attendance <= Fraction(100):
        raise _RowError("attendance_pct out of range [0,100]")

    raw_result = get("result").strip().lower()
    result = _RESULT_TOKENS.get(raw_result)
    if result is None:
        raise _RowError(f"unknown result value {get('result').strip()!r}")

    entry_year = _normalize_category(get("entry_year"))
    if entry_year != NOT_INFORMED and _parse_int(entry_year) is None:
        raise _RowError(f"invalid entry_year {get('entry_year').strip()!r}")

    return EnrollmentRow(
        student_id=student_id,
        course_id=course_id,
        discipline_id=discipline_id,
        year=year,
        term=term,
        grade=grade,
        credits=credits,
        attendance_pct=attendance,
        result=result,
        entry_year=entry_year,
        situation_raw=_normalize_category(get("situation")),
        income_band=_normalize_category(get("income_band")),
        birth_city=_normalize_category(get("birth_city")),
        birth_state=_normalize_category(get("birth_state")),
        nationality=_normalize_category(get("nationality")),
        quota_type=_normalize_category(get("quota_type")),
        high_school_type=_normalize_category(get("high_school_type")),
        admission_form=_normalize_category(get("admission_form")),
        housing=_normalize_category(get("housing")),
        employment=_normalize_category(get("employment")),
        university_aid=_normalize_category(get("university_aid")),
        study_plan=_normalize_category(get("study_plan")),
    )


def _missing_counts(rows: Iterable[EnrollmentRow]) -> dict[str, int]:
    counts = {column: 0 for column in ATTRIBUTE_FIELDS}
    for row in rows:
        for column in ATTRIBUTE_FIELDS:
            if row.attribute(column) == NOT_INFORMED:
                counts[column] += 1
    return counts


def parse_activity_table(
    source: IO[bytes] | IO[str], mapping: MappingConfig | None = None
) -> tuple[list[EnrollmentRow], IngestReport]:
    """Parse and clean the activity table.

    Returns the kept rows plus an accounting report. Exact duplicate rows are
    collapsed (first occurrence wins); rows that repeat the
    ``(student_id, course_id, discipline_id, year, term)`` key with different
    content are rejected as conflicts so the key stays unique. Malformed rows
    are rejected individually with a reason and never abort the run.

    Raises:
        IngestError: when the header is missing required columns (after
            applying the mapping) or a canonical column appears twice.
    """
    mapping = mapping or MappingConfig.default()
    text = _text_stream(source)
    reader = csv_reader(text)
    header = next(reader, None)
    if header is None:
        raise IngestError("activity table is empty: no header row")
    canonical = [mapping.columns.get(cell.strip(), cell.strip()) for cell in header]
    positions: dict[str, int] = {}
    for index, name in enumerate(canonical):
        if name in ACTIVITY_COLUMNS:
            if name in positions:
                raise IngestError(f"duplicate activity column {name!r}")
            positions[name] = index
    missing = [name for name in ACTIVITY_COLUMNS if name not in positions]
    if missing:
        raise IngestError(f"activity table is missing required column(s): {', '.join(missing)}")

    width = len(header)
    kept: list[EnrollmentRow] = []
    rejected: list[RejectedRow] = []
    seen_rows: set[EnrollmentRow] = set()
    seen_keys: set[tuple[str, str, str, int, int]] = set()
    rows_read = 0
    deduplicated = 0

    for values in reader:
        if not values:
            continue
        rows_read += 1
        line = reader.line_num
        if len(values) != width:
            rejected.append(RejectedRow(line, f"expected {width} fields, got {len(values)}"))
            continue
        try:
            row = _build_row(lambda name: values[positions[name]])
        except _RowError as exc:
            rejected.append(RejectedRow(line, exc.reason))
            continue
        if row in seen_rows:
            deduplicated += 1
            continue
        key = row.key()
        if key in seen_keys:
            rejected.append(
                RejectedRow(
                    line,
                    "conflicting duplicate for key "
                    f"(student_id={key[0]}, course_id={key[1]}, "
                    f"discipline_id={key[2]}, year={key[3]}, term={key[4]})",
                )
            )
            continue
        seen_rows.add(row)
        seen_keys.add(key)
        kept.append(row)

    report = IngestReport(
        rows_read=rows_read,
        rows_kept=len(kept),
        rows_deduplicated=deduplicated,
        rows_rejected=len(rejected),
        rejected_rows=tuple(rejected),
        students_built=0,
        missing_field_counts=_missing_counts(kept),
    )
    return kept, report


# ---------------------------------------------------------------------------
# profile reconciliation
# ---------------------------------------------------------------------------


def _majority(values: list[str]) -> str:
    counts = Counter(values)
    return min(counts, key=lambda value: (-counts[value], value))


def build_profiles(
    rows: Iterable[EnrollmentRow], situation_map: dict[str, Situation] | None = None
) -> tuple[list[StudentProfile], list[ProfileIssue]]:
    """Reconcile repeated per-row attributes into one profile per student.

    Disagreeing values resolve to the most frequent one (ties to the
    lexicographically smallest) and are logged as issues. A student whose
    reconciled situation has no mapping is dropped and logged; callers must
    then discard that student's rows as well.
    """
    situation_map = situation_map or DEFAULT_SITUATION_MAP
    grouped: dict[tuple[str, str], list[EnrollmentRow]] = {}
    for row in rows:
        grouped.setdefault((row.student_id, row.course_id), []).append(row)

    profiles: list[StudentProfile] = []
    issues: list[ProfileIssue] = []
    for (student_id, course_id), student_rows in grouped.items():
        resolved: dict[str, str] = {}
        for column in ATTRIBUTE_FIELDS:
            values = [row.attribute(column) for row in student_rows]
            chosen = _majority(values)
            resolved[column] = chosen
            distinct = sorted(set(values))
            if len(distinct) > 1:
                issues.append(
                    ProfileIssue(
                        kind="attribute_conflict",
                        student_id=student_id,
                        course_id=course_id,
                        attribute=column,
                        chosen=chosen,
                        observed=tuple(distinct),
                    )
                )
        raw_situation = resolved["situation"]
        situation = situation_map.get(raw_situation.lower())
        if situation is None:
            issues.append(
                ProfileIssue(
                    kind="unmapped_situation",
                    student_id=student_id,
                    course_id=course_id,
                    attribute="situation",
                    chosen=raw_situation,
                    observed=tuple(sorted({row.situation_raw for row in student_rows})),
                )
            )
            continue
        entry_year = resolved["entry_year"]
        profiles.append(
            StudentProfile(
                student_id=student_id,
                course_id=course_id,
                entry_year=None if entry_year == NOT_INFORMED else int(entry_year),
                situation=situation,
                income_band=resolved["income_band"],
                birth_city=resolved["birth_city"],
                birth_state=resolved["birth_state"],
                nationality=resolved["nationality"],
                quota_type=resolved["quota_type"],
                high_school_type=resolved["high_school_type"],
                admission_form=resolved["admission_form"],
                housing=resolved["housing"],
                employment=resolved["employment"],
                university_aid=resolved["university_aid"],
                study_plan=resolved["study_plan"],
            )
        )
    return profiles, issues


# ---------------------------------------------------------------------------
# cohort table
# ---------------------------------------------------------------------------


def parse_cohort_table(
    source: IO[bytes] | IO[str],
) -> tuple[list[CohortFlow], list[CohortReject]]:
    """Parse cohort flows, one record per ``(course_name, scope)`` group.

    Group-level validation: consistent entry year and entrants, year indexes
    running 1..T without gaps or repeats, non-negative counts, and cumulative
    exits (withdrawals + transfers + deaths) never exceeding entrants. Any
    violation rejects the whole group with a reason; other groups are kept.

    Raises:
        IngestError: when the header is missing required columns.
    """
    text = _text_stream(source)
    reader = csv_reader(text)
    header = next(reader, None)
    if header is None:
        raise IngestError("cohort table is empty: no header row")
    names = [cell.strip() for cell in header]
    positions = {name: index for index, name in enumerate(names) if name in COHORT_COLUMNS}
    missing = [name for name in COHORT_COLUMNS if name not in positions]
    if missing:
        raise IngestError(f"cohort table is missing required column(s): {', '.join(missing)}")

    width = len(header)
    groups: dict[tuple[str, str], list[dict]] = {}
    order: list[tuple[str, str]] = []
    rejects: list[CohortReject] = []
    failed: dict[tuple[str, str], str] = {}

    def fail(key: tuple[str, str], reason: str) -> None:
        if key not in failed:
            failed[key] = reason

    for values in reader:
        if not values:
            continue
        line = reader.line_num
        if len(values) != width:
            rejects.append(
                CohortReject("?", "?", f"line {line}: expected {width} fields, got {len(values)}")
            )
            continue
        course_name = values[positions["course_name"]].strip()
        scope_raw = values[positions["scope"]].strip().lower()
        if not course_name or scope_raw not in _SCOPE_TOKENS:
            rejects.append(
                CohortReject(
                    course_name or "?",
                    values[positions["scope"]].strip() or "?",
                    f"line {line}: missing course_name or unknown scope",
                )
            )
            continue
        key = (course_name, scope_raw)
        if key not in groups:
            groups[key] = []
            order.append(key)
        record: dict = {"line": line}
        for column in ("entry_year", "year_index", "withdrawals", "transfers", "deaths", "entrants"):
            parsed = _parse_int(values[positions[column]].strip())
            if parsed is None:
                fail(key, f"line {line}: invalid {column} {values[positions[column]].strip()!r}")
                break
            if column != "entry_year" and parsed < 0:
                fail(key, f"line {line}: negative {column}")
                break
            record[column] = parsed
        else:
            groups[key].append(record)

    cohorts: list[CohortFlow] = []
    for key in order:
        course_name, scope_raw = key
        if key in failed:
            rejects.append(CohortReject(course_name, scope_raw, failed[key]))
            continue
        records = groups[key]
        entry_years = {record["entry_year"] for record in records}
        entrants_seen = {record["entrants"] for record in records}
        if len(entry_years) != 1 or len(entrants_seen) != 1:
            rejects.append(
                CohortReject(course_name, scope_raw, "inconsistent entry_year or entrants")
            )
            continue
        entrants = entrants_seen.pop()
        indexes = sorted(record["year_index"] for record in records)
        if indexes != list(range(1, len(records) + 1)):
            rejects.append(
                CohortReject(
                    course_name, scope_raw, "year_index must run 1..T without gaps or repeats"
                )
            )
            continue
        records.sort(key=lambda record: record["year_index"])
        flows = tuple(
            YearFlow(record["withdrawals"], record["transfers"], record["deaths"])
            for record in records
        )
        running = 0
        bad_prefix = None
        for index, flow in enumerate(flows, start=1):
            running += flow.withdrawals + flow.transfers + flow.deaths
            if running > entrants:
                bad_prefix = index
                break
        if bad_prefix is not None:
            rejects.append(
                CohortReject(
                    course_name,
                    scope_raw,
                    f"cumulative exits exceed entrants at year {bad_prefix}",
                )
            )
            continue
        cohorts.append(
            CohortFlow(
                course_name=course_name,
                scope=CohortScope(scope_raw),
                entry_year=entry_years.pop(),
                entrants=entrants,
                per_year=flows,
            )
        )
    return cohorts, rejects


def read_tda_references(cohort_path: str | Path) -> TdaReferences:
    """Load reference rates from the cohort file's companion metadata.

    The companion file is ``<cohort_path>.meta`` with ``key=value`` lines;
    recognized keys are ``national_avg_tda`` and ``state_avg_tda``. A missing
    companion file simply yields empty references.
    """
    meta_path = Path(str(cohort_path) + ".meta")
    if not meta_path.exists():
        return TdaReferences()
    national: Fraction | None = None
    state: Fraction | None = None
    for line_no, raw_line in enumerate(meta_path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        parsed = _parse_decimal(value.strip())
        if key in ("national_avg_tda", "state_avg_tda") and parsed is None:
            raise IngestError(f"{meta_path.name} line {line_no}: invalid value {value.strip()!r}")
        if key == "national_avg_tda":
            national = parsed
        elif key == "state_avg_tda":
            state = parsed
    return TdaReferences(national_avg=national, state_avg=state)


# ---------------------------------------------------------------------------
# snapshot assembly
# ---------------------------------------------------------------------------


def build_snapshot(
    activity: IO[bytes] | IO[str],
    cohort: IO[bytes] | IO[str],
    *,
    mapping: MappingConfig | None = None,
    references: TdaReferences | None = None,
    version: int = 1,
) -> Snapshot:
    """Assemble a validated snapshot from the two source streams.

    Students whose situation cannot be mapped are dropped along with their
    rows; those rows move into the rejected bucket (line 0) so the accounting
    invariant ``read == kept + dedup + rejected`` keeps holding over the final
    snapshot.
    """
    mapping = mapping or MappingConfig.default()
    rows, report = parse_activity_table(activity, mapping)
    cohorts, cohort_rejects = parse_cohort_table(cohort)
    profiles, issues = build_profiles(rows, mapping.situations)

    keyed = {(profile.student_id, profile.course_id) for profile in profiles}
    final_rows: list[EnrollmentRow] = []
    moved: list[RejectedRow] = []
    for row in rows:
        if (row.student_id, row.course_id) in keyed:
            final_rows.append(row)
        else:
            moved.append(
                RejectedRow(
                    0,
                    f"unmapped situation {row.situation_raw!r} "
                    f"(student_id={row.student_id}, course_id={row.course_id})",
                )
            )

    report = replace(
        report,
        rows_kept=len(final_rows),
        rows_rejected=report.rows_rejected + len(moved),
        rejected_rows=report.rejected_rows + tuple(moved),
        students_built=len(profiles),
        missing_field_counts=_missing_counts(final_rows),
        cohorts_read=len(cohorts) + len(cohort_rejects),
        cohorts_kept=len(cohorts),
        cohort_rejects=tuple(cohort_rejects),
    )
    return Snapshot(
        rows=tuple(final_rows),
        students=tuple(profiles),
        cohorts=tuple(cohorts),
        ingest_report=report,
        issues=tuple(issues),
        tda_references=references or TdaReferences(),
        version=version,
    )


def load_snapshot(
    activity_path: str | Path,
    cohort_path: str | Path,
    mapping_path: str | Path | None = None,
    *,
    version: int = 1,
) -> Snapshot:
    """File-path convenience wrapper around :func:`build_snapshot`."""
    mapping = load_mapping_config(mapping_path) if mapping_path else None
    references = read_tda_references(cohort_path)
    try:
        with open(activity_path, "rb") as activity, open(cohort_path, "rb") as cohort:
            return build_snapshot(
                activity, cohort, mapping=mapping, references=references, version=version
            )
    except OSError as exc:
        raise IngestError(f"cannot read dataset: {exc}") from exc


class SnapshotStore:
    """Holds the current snapshot and swaps in replacements atomically.

    Readers grab :attr:`current` without locking; a reload builds the new
    snapshot completely before the single reference assignment, so every
    in-flight query sees either the old version or the new one, never a mix.
    A failed reload leaves the current snapshot untouched.
    """

    def __init__(
        self,
        activity_path: str | Path,
        cohort_path: str | Path,
        mapping_path: str | Path | None = None,
    ) -> None:
        self._activity_path = activity_path
        self._cohort_path = cohort_path
        self._mapping_path = mapping_path
        self._lock = threading.Lock()
        self._snapshot = load_snapshot(activity_path, cohort_path, mapping_path, version=1)

    @property
    def current(self) -> Snapshot:
        return self._snapshot

    def reload(self) -> Snapshot:
        """Re-read the sources; raises IngestError and keeps the old snapshot
        if anything about the new data is fatally wrong."""
        with self._lock:
            snapshot = load_snapshot(
                self._activity_path,
                self._cohort_path,
                self._mapping_path,
                version=self._snapshot.version + 1,
            )
            self._snapshot = snapshot
            return snapshot
