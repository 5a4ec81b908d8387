"""Retention analytics over student activity and cohort-flow tables.

The package is organized in layers: :mod:`dropscope.ingest` turns CSV files
into an immutable :class:`~dropscope.model.Snapshot`, :mod:`dropscope.metrics`
holds the pure metric kernels, :mod:`dropscope.queries` answers filtered
aggregation questions over a snapshot, :mod:`dropscope.service` exposes the
query layer over HTTP, and :mod:`dropscope.cli` wraps everything for the
command line.
"""

from dropscope.model import (
    CohortFlow,
    EnrollmentResult,
    EnrollmentRow,
    IngestReport,
    Snapshot,
    Situation,
    StudentProfile,
    YearFlow,
)

__version__ = "0.1.0"

__all__ = [
    "CohortFlow",
    "EnrollmentResult",
    "EnrollmentRow",
    "IngestReport",
    "Snapshot",
    "Situation",
    "StudentProfile",
    "YearFlow",
    "__version__",
]
