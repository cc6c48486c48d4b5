"""CSV tables, plot data and run manifests.  Every write is temp-file-then-rename."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Table:
    """Named numeric columns plus a one-line description (with units) per column."""

    columns: tuple
    data: np.ndarray
    descriptions: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.size == 0:
            self.data = self.data.reshape(0, len(self.columns))
        if self.data.shape[1] != len(self.columns):
            raise ValueError(f"{len(self.columns)} columns but data has {self.data.shape[1]}")

    def column(self, name) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def _fmt(x: float) -> str:
    return "%.17g" % x


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_csv(table: Table, title: str = "") -> str:
    if not np.all(np.isfinite(table.data)):
        raise ValueError("refusing to write non-finite values")
    lines = []
    if title:
        lines.append(f"# {title}")
    for c in table.columns:
        lines.append(f"# {c}: {table.descriptions.get(c, '')}".rstrip())
    lines.append(",".join(table.columns))
    for row in table.data:
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(path, table: Table, title: str = "") -> Path:
    """Write a table; non-finite data raise ValueError before anything touches disk."""
    return atomic_write_text(path, format_csv(table, title))


def read_csv(path) -> Table:
    """Inverse of write_csv (descriptions are recovered from the comment header)."""
    desc = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    k, v = body.split(":", 1)
                    desc[k.strip()] = v.strip()
                continue
            if header is None:
                header = tuple(line.split(","))
                continue
            if line:
                rows.append([float(x) for x in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no column header")
    desc = {k: v for k, v in desc.items() if k in header and v}
    return Table(header, np.array(rows, dtype=float).reshape(len(rows), len(header)), desc)


def emit_plot_data(report, target, name: str | None = None) -> Path:
    """Write (t, value, fitted_envelope) for one series of a report.

    `report` is any object with `times`, `array(name)` and `envelope(name)`
    (the latter returning None when the series has not been fitted, in which
    case only (t, value) is written).  A fitted envelope is recomputable from
    the fit parameters stored in the run manifest.
    """
    t = np.asarray(report.times, dtype=float)
    if t.size == 0:
        raise ValueError("empty report")
    name = name or next(iter(report.series))
    v = report.array(name)
    env = report.envelope(name)
    if env is None:
        table = Table(("t", "value"), np.column_stack([t, v]), {"t": "time", "value": name})
    else:
        table = Table(("t", "value", "fitted_envelope"), np.column_stack([t, v, env]),
                      {"t": "time", "value": name, "fitted_envelope": f"fitted envelope of {name}"})
    return write_csv(target, table)


@dataclass
class RunManifest:
    experiment: str
    config: dict
    version: str
    status: str
    exit_code: int
    wall_time: float
    files: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    error: str | None = None
    timestamp: str = ""

    def to_json(self) -> str:
        return json.dumps(_plain(asdict(self)), indent=2, sort_keys=True) + "\n"

    def write(self, path) -> Path:
        return atomic_write_text(path, self.to_json())

    @classmethod
    def read(cls, path) -> RunManifest:
        return cls(**json.loads(Path(path).read_text()))

    def missing_files(self, root) -> list:
        """Listed outputs that are absent or empty."""
        root = Path(root)
        return [f for f in self.files if not (root / f).is_file() or (root / f).stat().st_size == 0]


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x
