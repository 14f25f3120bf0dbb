from __future__ import annotations

import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .const import FORMAT_CSV, FORMAT_JSON, FORMATS
from .errors import ValidationError

_LOGGER = logging.getLogger(__name__)

# read once: os.umask can only be queried by setting it
_UMASK = os.umask(0)
os.umask(_UMASK)

SUMMARY_PREFIX = "summary."


def _render(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


@dataclass
class ExperimentReport:
    """Rows plus the metadata and summary written with them.

    CSV: ``# key=value`` metadata lines, ``# summary.key=value`` lines, a
    header row and the data. JSON: ``{"meta", "summary", "columns", "rows"}``.
    """

    command: str
    meta: dict[str, str]
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValidationError(f"row has {len(values)} values, expected {len(self.columns)}")
        self.rows.append(tuple(values))

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [row[k] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.meta.items():
            buf.write(f"# {key}={value}\n")
        for key, value in self.summary.items():
            buf.write(f"# {SUMMARY_PREFIX}{key}={_render(value)}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_render(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "meta": self.meta,
            "summary": self.summary,
            "columns": self.columns,
            "rows": [list(row) for row in self.rows],
        }
        return json.dumps(payload, indent=2) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == FORMAT_CSV:
            return self.to_csv()
        if fmt == FORMAT_JSON:
            return self.to_json()
        raise ValidationError(f"format must be one of {FORMATS}, got {fmt!r}")

    def write(self, path: Optional[str], fmt: str) -> None:
        """Write to ``path`` atomically, or to stdout when path is None or '-'."""
        text = self.render(fmt)
        if path in (None, "", "-"):
            sys.stdout.write(text)
            return
        write_atomic(Path(path), text)
        _LOGGER.info("%s: wrote %d rows to %s", self.command, len(self.rows), path)


def write_atomic(path: Path, text: str) -> None:
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        # mkstemp creates 0600; give the report the mode open() would have
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def read_meta(text: str, fmt: str) -> dict[str, str]:
    """Metadata block of a rendered report (summary lines excluded)."""
    if fmt == FORMAT_JSON:
        return dict(json.loads(text)["meta"])
    meta: dict[str, str] = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition("=")
        if not key.startswith(SUMMARY_PREFIX):
            meta[key] = value
    return meta
