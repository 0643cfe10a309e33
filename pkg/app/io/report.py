import csv
import hashlib
import io
import json
import logging
from pathlib import Path
from typing import Optional, Union

from app.core.settings import settings
from app.schemas.report import VerificationReport

logger = logging.getLogger(__name__)

_HASH_EXCLUDE = {"created_at", "hash"}
CSV_COLUMNS = ["trial", "seed", "check", "lhs", "rhs", "margin", "passed", "notes"]


def report_hash(report: VerificationReport) -> str:
    """sha256 of the canonical JSON of everything but the timestamp and the hash itself."""
    payload = json.loads(report.model_dump_json(exclude=_HASH_EXCLUDE))
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def report_to_csv(report: VerificationReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in report.records:
        writer.writerow([rec.trial, rec.seed, rec.check, repr(rec.lhs), repr(rec.rhs), repr(rec.margin),
                         int(rec.passed), "; ".join(rec.notes)])
    return buf.getvalue()


def render_report(report: VerificationReport, fmt: str = "json") -> str:
    if fmt == "json":
        return report.model_dump_json(indent=2)
    if fmt == "csv":
        return report_to_csv(report)
    raise ValueError(f"Unknown report format '{fmt}'; use 'json' or 'csv'")


def write_report(
    report: VerificationReport,
    fmt: str = "json",
    directory: Optional[Union[str, Path]] = None,
) -> Path:
    """
    Write `<suite>-seed<seed>.<fmt>` into `directory`, else REPORT_DIR, else the
    working directory. The hash is filled in before writing.
    """
    if report.hash is None:
        report.hash = report_hash(report)
    target = Path(directory) if directory is not None else (settings.REPORT_DIR or Path.cwd())
    target.mkdir(parents=True, exist_ok=True)
    path = target / f"{report.suite}-seed{report.seed}.{fmt}"
    path.write_text(render_report(report, fmt), encoding="utf-8")
    logger.info("wrote %s report to %s", report.suite, path)
    return path
