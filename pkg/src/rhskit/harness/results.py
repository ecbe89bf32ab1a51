"""Tabular results with provenance, serialized as CSV."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .. import SCHEMA_VERSION, __version__


def config_hash(materialized: dict) -> str:
    blob = json.dumps(materialized, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _cell(v):
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    f = float(v)
    if math.isnan(f):
        return "nan"
    if f.is_integer() and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


@dataclass
class ResultSet:
    """Rows of named columns plus run metadata.

    Every row carries every column; a column missing from a row is written
    as ``nan``.
    """

    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        for r in self.rows:
            extra = set(r) - set(self.columns)
            if extra:
                raise ValueError(f"row has columns outside the schema: {sorted(extra)}")

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        if name not in self.columns:
            raise KeyError(name)
        return [r.get(name, math.nan) for r in self.rows]

    @classmethod
    def from_columns(cls, cols: dict, metadata=None):
        names = list(cols)
        n = len(next(iter(cols.values()))) if cols else 0
        rows = [{k: cols[k][i] for k in names} for i in range(n)]
        return cls(names, rows, dict(metadata or {}))

    def header_lines(self):
        md = self.metadata
        lines = [
            f"rhskit {__version__} schema {SCHEMA_VERSION}",
            f"kind: {md.get('kind', '')}",
            f"seed: {md.get('seed', '')}",
            f"config_sha256: {md.get('config_hash', '')}",
        ]
        if "config" in md:
            lines.append("config: " + json.dumps(md["config"], sort_keys=True, separators=(",", ":"), default=str))
        return lines

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell(r.get(c, math.nan)) for c in self.columns])
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text(), encoding="utf-8")
        return path


def read_csv(path) -> ResultSet:
    """Parse a CSV written by :meth:`ResultSet.write_csv` (numbers come back as floats)."""
    meta, body = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            if key == "seed":
                meta["seed"] = int(val) if val else None
            elif key == "config_sha256":
                meta["config_hash"] = val
            elif key == "kind":
                meta["kind"] = val
            elif key == "config":
                meta["config"] = json.loads(val)
        else:
            body.append(line)
    reader = csv.reader(body)
    cols = next(reader)
    rows = []
    for rec in reader:
        row = {}
        for c, v in zip(cols, rec):
            try:
                row[c] = float(v)
            except ValueError:
                row[c] = v
        rows.append(row)
    return ResultSet(cols, rows, meta)
