from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dropscope.fixtures import FixtureSpec, generate_fixture
from dropscope.ingest import load_snapshot


@pytest.fixture(scope="session")
def generated(tmp_path_factory) -> object:
    """One medium fixture shared by read-only tests."""
    out = tmp_path_factory.mktemp("fixture-main")
    return generate_fixture(FixtureSpec(seed=11, students=60, courses=4, disciplines_per_course=5), out)


@pytest.fixture(scope="session")
def manifest(generated) -> dict:
    return json.loads(generated.manifest_path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def snapshot(generated):
    return load_snapshot(generated.activity_path, generated.cohort_path)
