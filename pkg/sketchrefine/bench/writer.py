"""Versioned, resumable CSV output for bench runs.

Layout: ``# key=value`` metadata lines, one header row, then data rows.
Each instance's row group ends with a ``# done=<key>`` line and is flushed
in one write; a restarted run skips marked instances and recomputes the rest.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from sketchrefine.bench.schemas import InstanceJob, ResultRow
from sketchrefine.common.constants import CSV_FLOAT_FORMAT, CSV_SCHEMA_VERSION, ExperimentName
from sketchrefine.common.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

COLUMNS: list[str] = list(ResultRow.model_fields)

InstanceKey = tuple[str, ...]

DONE_MARKER = "done"


def format_value(value: object) -> str:
    """CSV text for one field; floats keep 17 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, CSV_FLOAT_FORMAT)
    if hasattr(value, "value"):  # str enums
        return str(value.value)
    return str(value)


def row_key(experiment: ExperimentName, m: int, n: int, s: int, kappa: float, beta: float, seed: int) -> InstanceKey:
    return (
        format_value(experiment), format_value(m), format_value(n), format_value(s),
        format_value(float(kappa)), format_value(float(beta)), format_value(seed),
    )


def job_key(experiment: ExperimentName, job: InstanceJob) -> InstanceKey:
    return row_key(experiment, job.m, job.n, job.s, job.kappa, job.beta, job.sketch_seed)


_FLOAT_COLUMNS = {"kappa", "beta", "forward_err", "residual_err", "backward_kw", "wall_time_s"}
_INT_COLUMNS = {"m", "n", "s", "seed", "iteration", "meta_calls"}
_BOOL_COLUMNS = {"converged", "failed"}


def _parse_row(record: dict[str, str]) -> ResultRow:
    values: dict[str, Any] = {}
    for col, text in record.items():
        if col in _FLOAT_COLUMNS:
            values[col] = float(text)
        elif col in _INT_COLUMNS:
            values[col] = int(text)
        elif col in _BOOL_COLUMNS:
            values[col] = text.strip().lower() == "true"
        else:
            values[col] = text
    return ResultRow(**values)


def _scan(path: Path) -> tuple[dict[str, str], list[str], set[InstanceKey]]:
    """Metadata, data lines and completion markers of a results file.

    ``#`` lines before the header are metadata; after it they are
    ``# done=<key>`` markers closing one instance's row group.
    """
    metadata: dict[str, str] = {}
    data_lines: list[str] = []
    completed: set[InstanceKey] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if data_lines and key.strip() == DONE_MARKER:
                    completed.add(tuple(value.strip().split(",")))
                elif not data_lines:
                    metadata[key.strip()] = value.strip()
            elif line.strip():
                data_lines.append(line)
    return metadata, data_lines, completed


def _parse_lines(path: Path, data_lines: list[str]) -> list[ResultRow]:
    reader = csv.DictReader(data_lines)
    if reader.fieldnames is not None and list(reader.fieldnames) != COLUMNS:
        raise InvalidParameterError({"out": [f"{path} has a different column layout"]})
    rows: list[ResultRow] = []
    for record in reader:
        if None in record.values():
            logger.warning("Ignoring truncated row in %s", path)
            continue
        rows.append(_parse_row(record))
    return rows


def read_results(path: Union[str, Path]) -> tuple[dict[str, str], list[ResultRow]]:
    """Metadata dict and typed rows of an existing results file."""
    path = Path(path)
    if not path.is_file():
        return {}, []
    metadata, data_lines, _ = _scan(path)
    return metadata, _parse_lines(path, data_lines)


def read_completed(path: Union[str, Path]) -> set[InstanceKey]:
    """Keys of instances whose row group was closed by a done marker."""
    path = Path(path)
    if not path.is_file():
        return set()
    return _scan(path)[2]


def _instance_key(row: ResultRow) -> InstanceKey:
    return row_key(row.experiment, row.m, row.n, row.s, row.kappa, row.beta, row.seed)


class ResultWriter:
    """Appends instance row groups to a results CSV, resuming if it exists.

    Each group is followed by a done marker and written in one flush. On
    resume, rows of instances without a marker are discarded, so an
    interrupted instance is recomputed in full.
    """

    def __init__(self, path: Union[str, Path], metadata: dict[str, str]) -> None:
        self.path = Path(path)
        self.metadata = {"schema": str(CSV_SCHEMA_VERSION), **metadata}
        self.done: set[InstanceKey] = set()
        self.rows_written = 0
        self._fh = None
        self._writer: Optional[Any] = None

    def __enter__(self) -> "ResultWriter":
        self.open()
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def open(self) -> None:
        resume = self.path.is_file() and self.path.stat().st_size > 0
        if resume:
            existing, data_lines, completed = _scan(self.path)
            if existing.get("schema") != self.metadata["schema"]:
                raise InvalidParameterError(
                    {"out": [f"{self.path} has schema {existing.get('schema')!r}, expected {self.metadata['schema']!r}"]}
                )
            if existing.get("experiment") != self.metadata.get("experiment"):
                raise InvalidParameterError(
                    {"out": [f"{self.path} holds experiment {existing.get('experiment')!r}"]}
                )
            rows = _parse_lines(self.path, data_lines)
            kept = [row for row in rows if _instance_key(row) in completed]
            self.done = {_instance_key(row) for row in kept}
            self._rewrite(existing, kept)
            if len(kept) < len(rows):
                logger.warning(
                    "Discarding %d rows of unfinished instances in %s", len(rows) - len(kept), self.path,
                )
            logger.info("Resuming %s: %d instances already recorded", self.path, len(self.done))
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)

        self._fh = self.path.open("a", newline="", encoding="utf-8")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        if not resume:
            self._write_preamble(self._fh, self.metadata)
            self._fh.flush()

    def _write_preamble(self, fh: Any, metadata: dict[str, str]) -> None:
        for key, value in metadata.items():
            fh.write(f"# {key}={value}\n")
        csv.writer(fh, lineterminator="\n").writerow(COLUMNS)

    def _rewrite(self, metadata: dict[str, str], rows: list[ResultRow]) -> None:
        """Replace the file with its completed row groups only."""
        groups: dict[InstanceKey, list[ResultRow]] = {}
        for row in rows:
            groups.setdefault(_instance_key(row), []).append(row)
        tmp = self.path.with_name(self.path.name + ".tmp")
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            self._write_preamble(fh, metadata)
            for key, group in groups.items():
                fh.write(_render_group(key, group))
        os.replace(tmp, self.path)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
            self._writer = None

    def is_done(self, key: InstanceKey) -> bool:
        return key in self.done

    def write_instance(self, rows: Iterable[ResultRow]) -> int:
        """Append one instance's rows plus its done marker and flush."""
        if self._writer is None:
            raise RuntimeError("ResultWriter is not open")
        rows = list(rows)
        if not rows:
            return 0
        key = _instance_key(rows[0])
        self._fh.write(_render_group(key, rows))
        self._fh.flush()
        self.done.add(key)
        self.rows_written += len(rows)
        return len(rows)


def _render_group(key: InstanceKey, rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([format_value(getattr(row, col)) for col in COLUMNS])
    buf.write(f"# {DONE_MARKER}={','.join(key)}\n")
    return buf.getvalue()
