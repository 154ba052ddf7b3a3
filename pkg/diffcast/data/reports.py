"""Text reports (JSONL) and the per-window text context."""

import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Union

import pandas as pd
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from diffcast.core.errors import InputError

logger = logging.getLogger(__name__)


class Report(BaseModel):
    """One dated text report. ``index`` is its position in the sorted report list."""
    start: datetime
    end: datetime
    text: str
    index: int = -1

    @field_validator("start", "end", mode="before")
    @classmethod
    def parse_timestamp(cls, v):
        try:
            ts = pd.Timestamp(v)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"unparseable date {v!r}") from exc
        if pd.isna(ts):
            raise ValueError(f"missing date {v!r}")
        return ts.to_pydatetime()

    @model_validator(mode="after")
    def check_range(self) -> "Report":
        if self.end < self.start:
            raise ValueError(f"report ends ({self.end:%Y-%m-%d}) before it starts ({self.start:%Y-%m-%d})")
        return self

    def to_json_line(self) -> str:
        return self.model_dump_json(exclude={"index"})


@dataclass(frozen=True)
class TextContext:
    """Reports visible to one forecast window, oldest first."""
    reports: tuple[Report, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not any(r.text.strip() for r in self.reports)

    @property
    def texts(self) -> list[str]:
        return [r.text for r in self.reports]


def sort_reports(reports: Iterable[Report]) -> list[Report]:
    ordered = sorted(reports, key=lambda r: (r.start, r.end))
    return [r.model_copy(update={"index": i}) for i, r in enumerate(ordered)]


def load_reports(path: Union[str, Path]) -> list[Report]:
    """Parse one JSON object per line; blank lines are skipped.

    Raises:
        InputError: naming the line number of the first malformed record.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read reports file {path}: {exc}") from exc

    reports = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            reports.append(Report.model_validate_json(line))
        except ValidationError as exc:
            first = exc.errors()[0]
            raise InputError(f"{path}:{lineno}: malformed report: {first['msg']}") from exc
    logger.info("Loaded %d reports from %s", len(reports), path)
    return sort_reports(reports)


def write_reports(reports: Iterable[Report], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for report in reports:
            fh.write(report.to_json_line() + "\n")
    return path
