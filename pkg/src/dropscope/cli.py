"""Command-line entry points: validate, report, fixtures, serve.

Exit codes: 0 on success, 1 for usage mistakes (bad flags, out-of-range
limits, unknown filter keys), 2 for data or fatal errors (unreadable files,
missing required columns, broken config). Row-level rejects during validate
are findings, not failures; validate still exits 0 and lists them.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from dropscope.config import ConfigError, load_service_config
from dropscope.fixtures import FixtureSpec, generate_fixture
from dropscope.ingest import IngestError, load_snapshot
from dropscope.metrics import FailureKind
from dropscope.model import Snapshot
from dropscope.queries import (
    CATEGORY_GROUPS,
    FilterSet,
    RANKING_LIMIT_MAX,
    RANKING_LIMIT_MIN,
    RateOrder,
    attendance_bands,
    category_breakdown,
    cr_bands,
    discipline_failure_ranking,
    failure_histogram,
    situation_counts,
    tda_histogram,
)

_FILTER_KEYS = (
    "course_id",
    "entry_year",
    "income_band",
    "birth_city",
    "quota_type",
    "high_school_type",
)

PAYLOAD_MARKER = "--- payload ---"


def _parse_filters(pairs: tuple[str, ...], allowed: tuple[str, ...]) -> FilterSet:
    values: dict = {}
    for pair in pairs:
        key, separator, value = pair.partition("=")
        if not separator or not value:
            raise click.UsageError(f"--filter expects key=value, got {pair!r}")
        key = key.strip()
        if key not in allowed:
            raise click.UsageError(
                f"unsupported filter key {key!r}; allowed here: {', '.join(allowed)}"
            )
        if key == "entry_year":
            try:
                values[key] = int(value.strip(), 10)
            except ValueError:
                raise click.UsageError(f"entry_year filter must be an integer, got {value!r}")
        else:
            values[key] = value.strip()
    return FilterSet(**values)


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(header) for header in headers]
    for row in rows:
        for index, cell in enumerate(row):
            widths[index] = max(widths[index], len(cell))
    def line(cells: list[str]) -> str:
        return "  ".join(cell.ljust(widths[index]) for index, cell in enumerate(cells)).rstrip()
    divider = "  ".join("-" * width for width in widths)
    return "\n".join([line(headers), divider] + [line(row) for row in rows])


def _distribution_table(payload: dict) -> str:
    rows = [
        [entry["label"], str(entry["count"]), f"{entry['percent']:.1f}"]
        for entry in payload["entries"]
    ]
    table = _table(["label", "count", "percent"], rows)
    return (
        f"{table}\n"
        f"total: {payload['total']}  excluded_undefined: {payload['excluded_undefined']}"
    )


def _emit(title: str, body: str, payload: dict, out: str | None) -> None:
    text = (
        f"{title}\n{body}\n\n{PAYLOAD_MARKER}\n"
        + json.dumps(payload, indent=2, sort_keys=True)
        + "\n"
    )
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


def _load(activity: str, cohort: str, mapping: str | None) -> Snapshot:
    return load_snapshot(activity, cohort, mapping)


def _data_options(command):
    for option in reversed(
        (
            click.option("--activity", "activity", required=True, help="Activity CSV path."),
            click.option("--cohort", "cohort", required=True, help="Cohort CSV path."),
            click.option("--mapping", "mapping", default=None, help="Column/situation mapping file."),
        )
    ):
        command = option(command)
    return command


@click.group()
def cli() -> None:
    """Retention analytics over activity and cohort tables."""


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


@cli.command()
@_data_options
def validate(activity: str, cohort: str, mapping: str | None) -> None:
    """Ingest both files and print the accounting report."""
    snapshot = _load(activity, cohort, mapping)
    report = snapshot.ingest_report
    click.echo(f"activity: {report.summary()}")
    click.echo(f"cohorts: read={report.cohorts_read} kept={report.cohorts_kept}")
    if report.rejected_rows:
        click.echo("rejected rows:")
        for reject in report.rejected_rows:
            where = f"line {reject.line}" if reject.line else "post-parse"
            click.echo(f"  {where}: {reject.reason}")
    if report.cohort_rejects:
        click.echo("rejected cohorts:")
        for reject in report.cohort_rejects:
            click.echo(f"  {reject.course_name} ({reject.scope}): {reject.reason}")
    click.echo("missing values per attribute:")
    for column, count in sorted(report.missing_field_counts.items()):
        click.echo(f"  {column}: {count}")
    if snapshot.issues:
        click.echo(f"profile issues: {len(snapshot.issues)}")


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@cli.group()
def report() -> None:
    """Render one aggregation as a table plus its raw payload."""


@report.command("situations")
@_data_options
@click.option("--filter", "filters", multiple=True, help="Equality filter, key=value.")
@click.option("--out", "out", default=None, help="Write the report here instead of stdout.")
def report_situations(
    activity: str, cohort: str, mapping: str | None, filters: tuple[str, ...], out: str | None
) -> None:
    """Students per consolidated situation."""
    filter_set = _parse_filters(filters, _FILTER_KEYS)
    snapshot = _load(activity, cohort, mapping)
    payload = situation_counts(snapshot, filter_set).payload()
    _emit("report: situations", _distribution_table(payload), payload, out)


@report.command("tda")
@_data_options
@click.option("--out", "out", default=None)
def report_tda(activity: str, cohort: str, mapping: str | None, out: str | None) -> None:
    """Final accumulated withdrawal rate per course, both scopes."""
    snapshot = _load(activity, cohort, mapping)
    payload = tda_histogram(snapshot).payload()
    rows = [
        [
            entry["course_name"],
            "-" if entry["institution_tda"] is None else f"{entry['institution_tda']:.1f}",
            "-" if entry["national_tda"] is None else f"{entry['national_tda']:.1f}",
        ]
        for entry in payload["entries"]
    ]
    body = _table(["course", "institution", "national"], rows)
    references = payload["references"]
    body += "\nreferences: " + "  ".join(
        f"{name}={'-' if value is None else f'{value:.1f}'}"
        for name, value in references.items()
    )
    for warning in payload["warnings"]:
        body += f"\nwarning: {warning}"
    _emit("report: tda", body, payload, out)


@report.command("bands")
@_data_options
@click.option("--filter", "filters", multiple=True, help="Course scope, course_id=<id>.")
@click.option("--out", "out", default=None)
def report_bands(
    activity: str, cohort: str, mapping: str | None, filters: tuple[str, ...], out: str | None
) -> None:
    """Attendance and performance-coefficient bands over dropout students."""
    course = _parse_filters(filters, ("course_id",)).course_id
    snapshot = _load(activity, cohort, mapping)
    attendance = attendance_bands(snapshot, course).payload()
    coefficient = cr_bands(snapshot, course).payload()
    body = (
        "attendance bands (dropout students):\n"
        + _distribution_table(attendance)
        + "\n\nperformance coefficient bands (dropout students):\n"
        + _distribution_table(coefficient)
    )
    _emit("report: bands", body, {"attendance": attendance, "cr": coefficient}, out)


@report.command("failures")
@_data_options
@click.option("--filter", "filters", multiple=True, help="Course scope, course_id=<id>.")
@click.option(
    "--kind",
    type=click.Choice([kind.value for kind in FailureKind]),
    default=FailureKind.ALL.value,
)
@click.option("--out", "out", default=None)
def report_failures(
    activity: str,
    cohort: str,
    mapping: str | None,
    filters: tuple[str, ...],
    kind: str,
    out: str | None,
) -> None:
    """Histogram of failed enrollments per dropout student."""
    course = _parse_filters(filters, ("course_id",)).course_id
    snapshot = _load(activity, cohort, mapping)
    payload = failure_histogram(snapshot, course, FailureKind(kind)).payload()
    rows = [[str(b["failures"]), str(b["students"])] for b in payload["bins"]]
    body = _table(["failures", "students"], rows) if rows else "no dropout students in scope"
    _emit(f"report: failures ({kind})", body, payload, out)


@report.command("categories")
@_data_options
@click.option("--group", type=click.Choice(sorted(CATEGORY_GROUPS)), required=True)
@click.option("--index", "index", required=True, help="Attribute within the group.")
@click.option("--filter", "filters", multiple=True, help="Course scope, course_id=<id>.")
@click.option("--out", "out", default=None)
def report_categories(
    activity: str,
    cohort: str,
    mapping: str | None,
    group: str,
    index: str,
    filters: tuple[str, ...],
    out: str | None,
) -> None:
    """Top categories of one attribute among dropout students."""
    if index not in CATEGORY_GROUPS[group]:
        raise click.UsageError(
            f"index {index!r} is not part of group {group!r}; "
            f"expected one of: {', '.join(CATEGORY_GROUPS[group])}"
        )
    course = _parse_filters(filters, ("course_id",)).course_id
    snapshot = _load(activity, cohort, mapping)
    payload = category_breakdown(snapshot, group, index, course).payload()
    _emit(f"report: categories ({group}/{index})", _distribution_table(payload), payload, out)


@report.command("disciplines")
@_data_options
@click.option("--filter", "filters", multiple=True, help="Course scope, course_id=<id>.")
@click.option(
    "--order",
    type=click.Choice([order.value for order in RateOrder]),
    default=RateOrder.HIGHEST.value,
)
@click.option("--limit", type=int, default=10, show_default=True)
@click.option("--out", "out", default=None)
def report_disciplines(
    activity: str,
    cohort: str,
    mapping: str | None,
    filters: tuple[str, ...],
    order: str,
    limit: int,
    out: str | None,
) -> None:
    """Disciplines ranked by failure rate."""
    if not RANKING_LIMIT_MIN <= limit <= RANKING_LIMIT_MAX:
        raise click.UsageError(
            f"limit must be between {RANKING_LIMIT_MIN} and {RANKING_LIMIT_MAX}"
        )
    course = _parse_filters(filters, ("course_id",)).course_id
    snapshot = _load(activity, cohort, mapping)
    payload = discipline_failure_ranking(snapshot, course, RateOrder(order), limit).payload()
    rows = [
        [
            entry["course_id"],
            entry["discipline_id"],
            str(entry["enrolled_count"]),
            str(entry["failure_count"]),
            f"{entry['failure_rate']:.1f}",
        ]
        for entry in payload["entries"]
    ]
    body = (
        _table(["course", "discipline", "enrolled", "failures", "rate"], rows)
        if rows
        else "no discipline meets the minimum enrollment"
    )
    references = payload["references"]
    body += "\nreferences: " + "  ".join(
        f"{name}={'-' if value is None else f'{value:.1f}'}"
        for name, value in references.items()
    )
    _emit(f"report: disciplines ({order})", body, payload, out)


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--out", "out", required=True, help="Directory for the generated files.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--students", type=int, default=45, show_default=True)
@click.option("--courses", type=int, default=5, show_default=True)
@click.option("--disciplines-per-course", type=int, default=8, show_default=True)
@click.option("--corruption-rate", type=float, default=0.03, show_default=True)
@click.option("--duplicate-rate", type=float, default=0.05, show_default=True)
@click.option("--cohort-years", type=int, default=6, show_default=True)
def fixtures(
    out: str,
    seed: int,
    students: int,
    courses: int,
    disciplines_per_course: int,
    corruption_rate: float,
    duplicate_rate: float,
    cohort_years: int,
) -> None:
    """Generate a synthetic dataset plus its ground-truth manifest."""
    spec = FixtureSpec(
        seed=seed,
        students=students,
        courses=courses,
        disciplines_per_course=disciplines_per_course,
        corruption_rate=corruption_rate,
        duplicate_rate=duplicate_rate,
        cohort_years=cohort_years,
    )
    generated = generate_fixture(spec, out)
    click.echo(f"wrote {generated.activity_path}")
    click.echo(f"wrote {generated.cohort_path}")
    click.echo(f"wrote {generated.manifest_path}")


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--serve-config", "serve_config", default=None, help="JSON config path.")
def serve(serve_config: str | None) -> None:
    """Run the HTTP API (config file plus DROPSCOPE_* env overrides)."""
    import uvicorn

    from dropscope.service import build_app

    config = load_service_config(serve_config)
    app = build_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


def main(argv: list[str] | None = None) -> None:
    """Console entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except (IngestError, ConfigError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
