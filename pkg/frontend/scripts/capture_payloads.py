"""Capture API payloads from a seeded fixture for the dashboard tests.

The dashboard test suite asserts that rendered numbers equal the fields of
real response bodies, so the fixtures under tests/fixtures/ are recorded
from the running service rather than written by hand. Re-run this after any
change to the API payload shapes:

    python3 frontend/scripts/capture_payloads.py

from the repository root, with the backend package installed.
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from dropscope.config import ServiceConfig
from dropscope.fixtures import FixtureSpec, generate_fixture
from dropscope.ingest import SnapshotStore
from dropscope.service import create_app

OUT_PATH = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "payloads.json"

#: Same shape as the backend test suite's shared fixture.
SPEC = FixtureSpec(seed=11, students=60, courses=4, disciplines_per_course=5)


def captures(course: str) -> list[tuple[str, str, dict[str, str]]]:
    return [
        ("meta", "/api/v1/meta", {}),
        ("situations", "/api/v1/overview/situations", {}),
        ("situations_course", "/api/v1/overview/situations", {"course": course}),
        ("situations_empty", "/api/v1/overview/situations", {"birth_city": "no-such-city"}),
        ("course_ranking", "/api/v1/overview/course-ranking", {"situation": "dropout"}),
        (
            "course_ranking_bottom",
            "/api/v1/overview/course-ranking",
            {"situation": "graduated", "order": "bottom", "limit": "3"},
        ),
        ("tda", "/api/v1/tda/histogram", {}),
        ("attendance", "/api/v1/dropouts/attendance-bands", {}),
        ("attendance_course", "/api/v1/dropouts/attendance-bands", {"course": course}),
        ("cr", "/api/v1/dropouts/cr-bands", {}),
        ("failures_all", "/api/v1/dropouts/failure-histogram", {}),
        ("failures_grade", "/api/v1/dropouts/failure-histogram", {"kind": "grade"}),
        ("failures_frequency", "/api/v1/dropouts/failure-histogram", {"kind": "frequency"}),
        (
            "categories_income",
            "/api/v1/dropouts/categories",
            {"group": "socioeconomic", "index": "income_band"},
        ),
        (
            "categories_city",
            "/api/v1/dropouts/categories",
            {"group": "geographic", "index": "birth_city"},
        ),
        ("disciplines", "/api/v1/disciplines/ranking", {}),
        ("disciplines_low_5", "/api/v1/disciplines/ranking", {"order": "lowest", "limit": "5"}),
        (
            "disciplines_course_20",
            "/api/v1/disciplines/ranking",
            {"course": course, "limit": "20"},
        ),
    ]


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        fixture = generate_fixture(SPEC, tmp)
        store = SnapshotStore(fixture.activity_path, fixture.cohort_path)
        config = ServiceConfig(
            activity_path=str(fixture.activity_path),
            cohort_path=str(fixture.cohort_path),
            admin_token="capture",
        )
        payloads: dict[str, dict] = {}
        with TestClient(create_app(store, config)) as client:
            course = client.get("/api/v1/meta").json()["data"]["courses"][0]
            for name, path, params in captures(course):
                response = client.get(path, params=params)
                response.raise_for_status()
                payloads[name] = {"path": path, "params": params, "body": response.json()}
    OUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    OUT_PATH.write_text(json.dumps(payloads, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {OUT_PATH} ({len(payloads)} captures)")


if __name__ == "__main__":
    main()
