"""File-backed records - locked CSV appends and JSONL episode traces"""
import fcntl
import json
import os
import logging
import threading
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import numpy as np
import pandas as pd

from src.errors import TraceError

logger = logging.getLogger(__name__)

_csv_lock = threading.Lock()


class CsvAppender:
    """Append rows to a CSV; header written once. Safe across threads and processes."""

    def __init__(self, path: str | Path, columns: Optional[list[str]] = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.columns = columns

    def append(self, row: Mapping[str, Any]):
        self.extend([row])

    def extend(self, rows: Iterable[Mapping[str, Any]]):
        df = pd.DataFrame(list(rows), columns=self.columns)
        if df.empty:
            return
        with _csv_lock:
            with open(self.path, "a", newline="") as f:
                fcntl.flock(f.fileno(), fcntl.LOCK_EX)
                try:
                    write_header = os.fstat(f.fileno()).st_size == 0
                    df.to_csv(f, header=write_header, index=False)
                    f.flush()
                finally:
                    fcntl.flock(f.fileno(), fcntl.LOCK_UN)

    def read(self) -> pd.DataFrame:
        if not self.path.exists():
            return pd.DataFrame(columns=self.columns)
        return pd.read_csv(self.path)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


class TraceRecorder:
    """JSONL episode trace; the first line is a header with the scene, then one line per step."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w")
        self.steps = 0

    def header(self, record: Mapping[str, Any]):
        self._write({"kind": "header", **record})

    def record(self, record: Mapping[str, Any]):
        self._write({"kind": "step", **record})
        self.steps += 1

    def _write(self, record: Mapping[str, Any]):
        if self._file.closed:
            raise TraceError(f"trace {self.path} already closed")
        self._file.write(json.dumps(_jsonable(dict(record))) + "\n")

    def close(self):
        if not self._file.closed:
            self._file.close()


def read_trace(path: str | Path) -> tuple[Optional[dict], list[dict]]:
    """Header and step records; corrupt lines are skipped with a warning."""
    header, steps = None, []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                logger.warning(f"Skipping corrupt trace line {lineno} in {path}: {e}")
                continue
            if not isinstance(rec, dict):
                logger.warning(f"Skipping non-object trace line {lineno} in {path}")
                continue
            if rec.get("kind") == "header":
                header = rec
            else:
                steps.append(rec)
    return header, steps
