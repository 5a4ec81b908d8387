"""Deterministic synthetic datasets with ground truth attached.

The generator writes an activity CSV (including deliberately corrupted and
duplicated lines), a cohort CSV with companion metadata, and a manifest that
records what the numbers must come out to. Everything in the manifest is
computed here with plain loops over the generated records, on purpose: this
module never imports the metric or query code, so comparing engine output
against the manifest is a genuine two-route check, not the same code twice.

The same seed always produces byte-identical files.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from pathlib import Path

from dropscope.model import ACTIVITY_COLUMNS, NOT_INFORMED

#: Raw situation spellings written to the activity file, per situation class.
#: All of them are covered by the built-in situation vocabulary.
SITUATION_SPELLINGS = {
    "graduated": ("graduated", "concluded"),
    "in_progress": ("enrolled", "active"),
    "dropout": ("dropout", "withdrawn", "abandoned", "transferred"),
    "deceased": ("deceased",),
}

DEFAULT_SITUATION_MIX = (
    ("graduated", 0.28),
    ("in_progress", 0.30),
    ("dropout", 0.34),
    ("deceased", 0.08),
)

#: (attribute, values, probability that the value is missing in the source).
DEFAULT_VOCABULARIES = (
    ("income_band", ("0-1 MW", "1-3 MW", "3-5 MW", "5-10 MW", "10+ MW"), 0.55),
    ("birth_city", ("Vitoria", "Serra", "Vila Velha", "Cariacica", "Linhares", "Colatina"), 0.10),
    ("birth_state", ("ES", "MG", "RJ", "SP", "BA"), 0.08),
    ("nationality", ("brazilian", "foreign"), 0.05),
    ("quota_type", ("none", "public_school", "racial", "income", "disability"), 0.12),
    ("high_school_type", ("public", "private", "mixed"), 0.10),
    ("admission_form", ("entrance_exam", "unified_selection", "transfer_in", "degree_holder"), 0.06),
    ("housing", ("family", "rented", "university_residence", "own"), 0.15),
    ("employment", ("unemployed", "part_time", "full_time", "internship"), 0.15),
    ("university_aid", ("none", "food_grant", "housing_grant", "full_grant"), 0.12),
    ("study_plan", ("none", "tutoring", "reinforcement"), 0.20),
)

_MISSING_SPELLINGS = ("", "-", "NA", "null")

#: Corruption kinds cycled through by the generator, with the broken column.
CORRUPTION_KINDS = (
    "grade_range",
    "grade_invalid",
    "term_invalid",
    "credits_zero",
    "attendance_range",
    "result_unknown",
    "missing_student",
    "year_invalid",
)


@dataclass(frozen=True)
class FixtureSpec:
    """Size and shape knobs for one generated dataset."""

    seed: int = 1
    students: int = 45
    courses: int = 5
    disciplines_per_course: int = 8
    corruption_rate: float = 0.03
    duplicate_rate: float = 0.05
    cohort_years: int = 6
    situation_mix: tuple[tuple[str, float], ...] = DEFAULT_SITUATION_MIX
    vocabularies: tuple[tuple[str, tuple[str, ...], float], ...] = DEFAULT_VOCABULARIES


@dataclass(frozen=True)
class GeneratedFixture:
    activity_path: Path
    cohort_path: Path
    manifest_path: Path
    manifest: dict


def _pick_weighted(rng: random.Random, weighted: tuple[tuple[str, float], ...]) -> str:
    total = sum(weight for _, weight in weighted)
    point = rng.random() * total
    running = 0.0
    for value, weight in weighted:
        running += weight
        if point < running:
            return value
    return weighted[-1][0]


def _fraction_pair(value: Fraction) -> list[int]:
    return [value.numerator, value.denominator]


def generate_fixture(spec: FixtureSpec, out_dir: str | Path) -> GeneratedFixture:
    """Write activity.csv, cohort.csv (+ .meta) and manifest.json to out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)

    course_ids = [f"C{i:02d}" for i in range(1, spec.courses + 1)]
    course_names = {course_id: f"course-{course_id[1:]}" for course_id in course_ids}
    disciplines = [f"D{i:02d}" for i in range(1, spec.disciplines_per_course + 1)]

    students: list[dict] = []
    valid_lines: list[str] = []

    for number in range(1, spec.students + 1):
        student_id = f"S{number:04d}"
        course_id = rng.choice(course_ids)
        entry_year = rng.randint(2008, 2014)
        situation = _pick_weighted(rng, spec.situation_mix)
        situation_raw = rng.choice(SITUATION_SPELLINGS[situation])

        attributes: dict[str, str] = {}
        written: dict[str, str] = {}
        for attribute, values, missing_probability in spec.vocabularies:
            if rng.random() < missing_probability:
                attributes[attribute] = NOT_INFORMED
                written[attribute] = rng.choice(_MISSING_SPELLINGS)
            else:
                chosen = rng.choice(values)
                attributes[attribute] = chosen
                written[attribute] = chosen

        row_count = rng.randint(3, 10)
        combos = [
            (discipline, year, term)
            for discipline in disciplines
            for year in range(entry_year, entry_year + 5)
            for term in (1, 2)
        ]
        picked = rng.sample(combos, row_count)

        weighted_grade_sum = 0
        credit_sum = 0
        attendance_sum = 0
        failures_grade = 0
        failures_frequency = 0
        for discipline_id, year, term in picked:
            credits = rng.randint(1, 6)
            if situation == "dropout":
                grade_tenths = rng.randint(0, 85)
                attendance_tenths = rng.randint(300, 1000)
            elif situation == "graduated":
                grade_tenths = rng.randint(40, 100)
                attendance_tenths = rng.randint(700, 1000)
            else:
                grade_tenths = rng.randint(20, 100)
                attendance_tenths = rng.randint(500, 1000)
            if attendance_tenths < 750:
                result = "failed_by_frequency"
                failures_frequency += 1
            elif grade_tenths < 50:
                result = "failed_by_grade"
                failures_grade += 1
            elif rng.random() < 0.06:
                result = "other"
            else:
                result = "approved"
            weighted_grade_sum += grade_tenths * credits
            credit_sum += credits
            attendance_sum += attendance_tenths
            cells = {
                "student_id": student_id,
                "course_id": course_id,
                "discipline_id": discipline_id,
                "year": str(year),
                "term": str(term),
                "grade": f"{grade_tenths / 10:.1f}",
                "credits": str(credits),
                "attendance_pct": f"{attendance_tenths / 10:.1f}",
                "result": result,
                "entry_year": str(entry_year),
                "situation": situation_raw,
                **written,
            }
            valid_lines.append(",".join(cells[column] for column in ACTIVITY_COLUMNS))

        students.append(
            {
                "student_id": student_id,
                "course_id": course_id,
                "entry_year": entry_year,
                "situation": situation,
                "attributes": attributes,
                "cr": _fraction_pair(Fraction(weighted_grade_sum, 10 * credit_sum)),
                "attendance_mean": _fraction_pair(Fraction(attendance_sum, 10 * row_count)),
                "failures_grade": failures_grade,
                "failures_frequency": failures_frequency,
                "rows": row_count,
            }
        )

    # Discipline-level ground truth over the unique valid rows written above.
    discipline_stats: dict[tuple[str, str], dict[str, int]] = {}
    for line in valid_lines:
        cells = dict(zip(ACTIVITY_COLUMNS, line.split(",")))
        key = (cells["course_id"], cells["discipline_id"])
        stats = discipline_stats.setdefault(
            key, {"enrolled": 0, "failures_all": 0, "failures_grade": 0, "failures_frequency": 0}
        )
        stats["enrolled"] += 1
        if cells["result"] == "failed_by_grade":
            stats["failures_all"] += 1
            stats["failures_grade"] += 1
        elif cells["result"] == "failed_by_frequency":
            stats["failures_all"] += 1
            stats["failures_frequency"] += 1

    corrupt_count = int(round(spec.corruption_rate * len(valid_lines)))
    corrupt_lines: list[tuple[str, str]] = []
    for index in range(corrupt_count):
        kind = CORRUPTION_KINDS[index % len(CORRUPTION_KINDS)]
        cells = {
            "student_id": f"SX{index:03d}",
            "course_id": rng.choice(course_ids),
            "discipline_id": rng.choice(disciplines),
            "year": str(rng.randint(2010, 2016)),
            "term": str(rng.randint(1, 2)),
            "grade": f"{rng.randint(0, 100) / 10:.1f}",
            "credits": str(rng.randint(1, 6)),
            "attendance_pct": f"{rng.randint(0, 1000) / 10:.1f}",
            "result": "approved",
            "entry_year": str(rng.randint(2008, 2014)),
            "situation": "enrolled",
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
        if kind == "grade_range":
            cells["grade"] = "11.0"
        elif kind == "grade_invalid":
            cells["grade"] = "abc"
        elif kind == "term_invalid":
            cells["term"] = "3"
        elif kind == "credits_zero":
            cells["credits"] = "0"
        elif kind == "attendance_range":
            cells["attendance_pct"] = "150.0"
        elif kind == "result_unknown":
            cells["result"] = "banana"
        elif kind == "missing_student":
            cells["student_id"] = ""
        elif kind == "year_invalid":
            cells["year"] = "20x5"
        corrupt_lines.append((kind, ",".join(cells[column] for column in ACTIVITY_COLUMNS)))

    duplicate_count = min(
        int(round(spec.duplicate_rate * len(valid_lines))), len(valid_lines)
    )
    duplicate_lines = [
        valid_lines[index]
        for index in sorted(rng.sample(range(len(valid_lines)), duplicate_count))
    ]

    tagged: list[tuple[str, str]] = (
        [("valid", line) for line in valid_lines]
        + [(f"corrupt:{kind}", line) for kind, line in corrupt_lines]
        + [("duplicate", line) for line in duplicate_lines]
    )
    rng.shuffle(tagged)
    corrupted_records = [
        {"line": position + 2, "kind": tag.split(":", 1)[1]}
        for position, (tag, _) in enumerate(tagged)
        if tag.startswith("corrupt:")
    ]

    activity_path = out / "activity.csv"
    header = ",".join(ACTIVITY_COLUMNS)
    activity_path.write_text(
        "\n".join([header] + [line for _, line in tagged]) + "\n", encoding="utf-8"
    )

    # Cohort flows: one institution-scope and one national-scope record per
    # course, with margins that keep every prefix valid and every denominator
    # positive.
    cohorts: list[dict] = []
    cohort_rows: list[str] = []
    for course_id in course_ids:
        for scope in ("institution", "national"):
            entrants = rng.randint(80, 200)
            remaining = entrants - 5
            per_year: list[list[int]] = []
            for _ in range(spec.cohort_years):
                deaths = min(rng.randint(0, 2), remaining)
                remaining -= deaths
                withdrawals = min(rng.randint(0, 14), remaining)
                remaining -= withdrawals
                transfers = min(rng.randint(0, 7), remaining)
                remaining -= transfers
                per_year.append([withdrawals, transfers, deaths])
            exits = 0
            deaths_total = 0
            numerators: list[int] = []
            denominators: list[int] = []
            for withdrawals, transfers, deaths in per_year:
                exits += withdrawals + transfers
                deaths_total += deaths
                numerators.append(exits)
                denominators.append(entrants - deaths_total)
            name = course_names[course_id]
            cohorts.append(
                {
                    "course_name": name,
                    "scope": scope,
                    "entry_year": 2010,
                    "entrants": entrants,
                    "per_year": per_year,
                    "tda_num": numerators,
                    "tda_den": denominators,
                }
            )
            for year_index, (withdrawals, transfers, deaths) in enumerate(per_year, start=1):
                cohort_rows.append(
                    f"{name},{scope},2010,{year_index},{withdrawals},{transfers},{deaths},{entrants}"
                )

    cohort_path = out / "cohort.csv"
    cohort_path.write_text(
        "course_name,scope,entry_year,year_index,withdrawals,transfers,deaths,entrants\n"
        + "\n".join(cohort_rows)
        + "\n",
        encoding="utf-8",
    )
    state_avg = f"{rng.randint(350, 650) / 10:.1f}"
    Path(str(cohort_path) + ".meta").write_text(
        f"state_avg_tda={state_avg}\n", encoding="utf-8"
    )

    manifest = {
        "spec": {
            "seed": spec.seed,
            "students": spec.students,
            "courses": spec.courses,
            "disciplines_per_course": spec.disciplines_per_course,
            "corruption_rate": spec.corruption_rate,
            "duplicate_rate": spec.duplicate_rate,
            "cohort_years": spec.cohort_years,
        },
        "activity": {
            "rows_written": len(tagged),
            "valid_unique": len(valid_lines),
            "duplicates": duplicate_count,
            "corrupted": sorted(corrupted_records, key=lambda record: record["line"]),
        },
        "students": sorted(students, key=lambda student: student["student_id"]),
        "disciplines": [
            {"course_id": course_id, "discipline_id": discipline_id, **stats}
            for (course_id, discipline_id), stats in sorted(discipline_stats.items())
        ],
        "cohorts": sorted(cohorts, key=lambda c: (c["course_name"], c["scope"])),
        "references": {"state_avg_tda": state_avg},
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return GeneratedFixture(
        activity_path=activity_path,
        cohort_path=cohort_path,
        manifest_path=manifest_path,
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# brute-force expectations over a manifest
#
# These mirror the documented aggregation contracts with independent code so
# tests can compare the query engine against them. Shapes match the payload
# forms byte for byte.
# ---------------------------------------------------------------------------


def _round_ratio(numerator: int, denominator: int) -> float:
    """100 * numerator / denominator at 1 decimal, half up."""
    if denominator == 0:
        return 0.0
    with localcontext() as context:
        context.prec = 50
        value = Decimal(100 * numerator) / Decimal(denominator)
        return float(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _round_fraction(value: Fraction) -> float:
    with localcontext() as context:
        context.prec = 50
        decimal_value = Decimal(value.numerator) / Decimal(value.denominator)
        return float(decimal_value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _distribution_payload(
    counts: list[tuple[str, int]], excluded: int, presorted: bool = False
) -> dict:
    if not presorted:
        counts = sorted(counts, key=lambda item: (-item[1], item[0]))
    counted = sum(count for _, count in counts)
    return {
        "entries": [
            {
                "label": label,
                "count": count,
                "percent": _round_ratio(count, counted) if counted else 0.0,
            }
            for label, count in counts
        ],
        "total": counted + excluded,
        "excluded_undefined": excluded,
    }


def _matches(student: dict, filters: dict) -> bool:
    for key, wanted in filters.items():
        if wanted is None:
            continue
        if key == "course_id":
            actual = student["course_id"]
        elif key == "entry_year":
            actual = student["entry_year"]
        else:
            actual = student["attributes"][key]
        if actual != wanted:
            return False
    return True


def oracle_situation_counts(manifest: dict, filters: dict | None = None) -> dict:
    filters = filters or {}
    counts = {"graduated": 0, "in_progress": 0, "dropout": 0}
    excluded = 0
    for student in manifest["students"]:
        if not _matches(student, filters):
            continue
        if student["situation"] == "deceased":
            excluded += 1
        else:
            counts[student["situation"]] += 1
    return _distribution_payload(list(counts.items()), excluded)


def oracle_course_ranking(
    manifest: dict, situation: str, order: str = "top", limit: int = 15
) -> dict:
    counts: dict[str, int] = {}
    for student in manifest["students"]:
        counts.setdefault(student["course_id"], 0)
        if student["situation"] == situation:
            counts[student["course_id"]] += 1
    if order == "top":
        ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    else:
        ordered = sorted(counts.items(), key=lambda item: (item[1], item[0]))
    return {
        "entries": [
            {"course_id": course_id, "count": count} for course_id, count in ordered[:limit]
        ]
    }


def _dropouts(manifest: dict, course: str | None) -> list[dict]:
    return [
        student
        for student in manifest["students"]
        if student["situation"] == "dropout"
        and (course is None or student["course_id"] == course)
    ]


def oracle_attendance_bands(manifest: dict, course: str | None = None) -> dict:
    counts = {"above_90": 0, "from_75_to_90": 0, "below_75": 0}
    excluded = 0
    for student in _dropouts(manifest, course):
        pair = student["attendance_mean"]
        if pair is None:
            excluded += 1
            continue
        mean = Fraction(pair[0], pair[1])
        if mean > 90:
            counts["above_90"] += 1
        elif mean >= 75:
            counts["from_75_to_90"] += 1
        else:
            counts["below_75"] += 1
    return _distribution_payload(list(counts.items()), excluded)


def oracle_cr_bands(manifest: dict, course: str | None = None) -> dict:
    counts = {"below_5": 0, "from_5_to_7": 0, "at_least_7": 0}
    excluded = 0
    for student in _dropouts(manifest, course):
        pair = student["cr"]
        if pair is None:
            excluded += 1
            continue
        cr = Fraction(pair[0], pair[1])
        if cr < 5:
            counts["below_5"] += 1
        elif cr < 7:
            counts["from_5_to_7"] += 1
        else:
            counts["at_least_7"] += 1
    return _distribution_payload(list(counts.items()), excluded)


def oracle_failure_histogram(
    manifest: dict, course: str | None = None, kind: str = "all"
) -> dict:
    values: list[int] = []
    for student in _dropouts(manifest, course):
        if kind == "grade":
            values.append(student["failures_grade"])
        elif kind == "frequency":
            values.append(student["failures_frequency"])
        else:
            values.append(student["failures_grade"] + student["failures_frequency"])
    if not values:
        return {"bins": []}
    top = max(values)
    return {
        "bins": [
            {"failures": k, "students": sum(1 for value in values if value == k)}
            for k in range(top + 1)
        ]
    }


def oracle_category_breakdown(manifest: dict, index: str, course: str | None = None) -> dict:
    counts: dict[str, int] = {}
    for student in _dropouts(manifest, course):
        value = student["attributes"][index]
        counts[value] = counts.get(value, 0) + 1
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    top = ordered[:5]
    rest = ordered[5:]
    if rest:
        top.append(("Others", sum(count for _, count in rest)))
    return _distribution_payload(top, 0, presorted=True)


def oracle_discipline_ranking(
    manifest: dict, course: str | None = None, order: str = "highest", limit: int = 10
) -> dict:
    qualifying = [
        record for record in manifest["disciplines"] if record["enrolled"] >= 15
    ]
    rates = {
        (record["course_id"], record["discipline_id"]): Fraction(
            100 * record["failures_all"], record["enrolled"]
        )
        for record in qualifying
    }
    in_scope = [
        record
        for record in qualifying
        if course is None or record["course_id"] == course
    ]
    reverse = order == "highest"

    def sort_key(record: dict):
        rate = rates[(record["course_id"], record["discipline_id"])]
        return (
            -rate if reverse else rate,
            -record["enrolled"],
            record["course_id"],
            record["discipline_id"],
        )

    in_scope.sort(key=sort_key)

    def reference(records: list[dict]) -> float | None:
        if not records:
            return None
        total = sum(
            (rates[(record["course_id"], record["discipline_id"])] for record in records),
            Fraction(0),
        )
        return _round_fraction(total / len(records))

    return {
        "entries": [
            {
                "course_id": record["course_id"],
                "discipline_id": record["discipline_id"],
                "enrolled_count": record["enrolled"],
                "failure_count": record["failures_all"],
                "failure_rate": _round_fraction(
                    rates[(record["course_id"], record["discipline_id"])]
                ),
            }
            for record in in_scope[:limit]
        ],
        "references": {
            "institution_avg_rate": reference(qualifying),
            "course_avg_rate": reference(
                [record for record in qualifying if record["course_id"] == course]
            )
            if course is not None
            else None,
        },
    }


def oracle_tda_histogram(manifest: dict) -> dict:
    finals: dict[tuple[str, str], Fraction] = {}
    for cohort in manifest["cohorts"]:
        value = Fraction(100 * cohort["tda_num"][-1], cohort["tda_den"][-1])
        finals[(cohort["course_name"], cohort["scope"])] = value
    names = sorted({name for name, _ in finals})
    entries = []
    for name in names:
        institution = finals.get((name, "institution"))
        national = finals.get((name, "national"))
        entries.append(
            {
                "course_name": name,
                "institution_tda": None if institution is None else _round_fraction(institution),
                "national_tda": None if national is None else _round_fraction(national),
            }
        )

    def scope_mean(scope: str) -> float | None:
        values = [value for (_, s), value in finals.items() if s == scope]
        if not values:
            return None
        return _round_fraction(sum(values, Fraction(0)) / len(values))

    state = manifest["references"].get("state_avg_tda")
    return {
        "entries": entries,
        "references": {
            "institution_avg": scope_mean("institution"),
            "national_avg": scope_mean("national"),
            "state_avg": None if state is None else _round_fraction(Fraction(Decimal(state))),
        },
        "warnings": [],
    }
