"""Snapshot files and series directories.

QF1 layout (little-endian)::

    8 bytes   magic b"QTRGFLD1"
    8 bytes   uint64 N
    N * 8     float64 values

Plain text snapshots hold one decimal value per line. A series directory
contains ``step_<6 digits>.qf1`` or ``.txt`` files and optionally a
``manifest.json`` whose ``"steps"`` list fixes the order.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .field import FieldSnapshot, PartitionedField

MAGIC = b"QTRGFLD1"
HEADER_SIZE = 16
_STEP_RE = re.compile(r"^step_(\d{6})\.(qf1|txt)$")


def atomic_write(path, data: bytes | str) -> Path:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def encode_qf1(values) -> bytes:
    v = np.ascontiguousarray(values, dtype="<f8").ravel()
    return MAGIC + np.uint64(v.size).astype("<u8").tobytes() + v.tobytes()


def write_qf1(path, values) -> Path:
    return atomic_write(path, encode_qf1(values))


def read_qf1(path, mmap: bool = False) -> np.ndarray:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            header = fh.read(HEADER_SIZE)
    except OSError as exc:
        raise FormatError(str(exc), path) from exc
    if len(header) < HEADER_SIZE or header[:8] != MAGIC:
        raise FormatError("bad magic, not a QF1 snapshot", path)
    n = int(np.frombuffer(header[8:], dtype="<u8")[0])
    expected = HEADER_SIZE + 8 * n
    actual = path.stat().st_size
    if actual != expected:
        raise FormatError(f"header says {n} values ({expected} bytes), file has {actual} bytes", path)
    if n == 0:
        raise FormatError("snapshot holds no values", path)
    if mmap:
        return np.memmap(path, dtype="<f8", mode="r", offset=HEADER_SIZE, shape=(n,))
    return np.fromfile(path, dtype="<f8", offset=HEADER_SIZE, count=n).astype(np.float64)


def read_text(path) -> np.ndarray:
    path = Path(path)
    try:
        values = np.loadtxt(path, dtype=np.float64, ndmin=1)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot parse text snapshot: {exc}", path) from exc
    if values.ndim != 1 or values.size == 0:
        raise FormatError("expected one value per line", path)
    return values


def load_snapshot(path, step: int = 0, ranks: int | None = None) -> FieldSnapshot:
    """Read a QF1 or text snapshot eagerly; NaN values are a format error."""
    path = Path(path)
    if path.suffix == ".txt":
        values = read_text(path)
    else:
        values = read_qf1(path)
    if np.isnan(values).any():
        raise FormatError(f"{int(np.isnan(values).sum())} NaN values", path)
    part = PartitionedField.even(values.size, ranks) if ranks else None
    return FieldSnapshot(step=step, size=values.size, values=values, partition=part)


def step_filename(step: int, suffix: str = "qf1") -> str:
    return f"step_{step:06d}.{suffix}"


@dataclass(frozen=True)
class SnapshotHandle:
    """A series member; the file is read only when :meth:`load` is called."""

    step: int
    path: Path

    def load(self, ranks: int | None = None) -> FieldSnapshot:
        return load_snapshot(self.path, step=self.step, ranks=ranks)


def _scan(directory: Path) -> dict[int, Path]:
    found: dict[int, Path] = {}
    for entry in sorted(directory.iterdir()):
        m = _STEP_RE.match(entry.name)
        if not m:
            continue
        step = int(m.group(1))
        if step in found:
            raise FormatError(f"step {step} present as both {found[step].name} and {entry.name}", directory)
        found[step] = entry
    return found


def ingest_series(directory) -> list[SnapshotHandle]:
    """Snapshot handles in step order, honoring ``manifest.json`` when present."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError("not a directory", directory)
    files = _scan(directory)
    manifest = directory / "manifest.json"
    if manifest.exists():
        try:
            doc = json.loads(manifest.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", manifest) from exc
        steps = doc.get("steps") if isinstance(doc, dict) else None
        if steps is None:
            raise FormatError("missing 'steps' list", manifest)
        handles = []
        for entry in steps:
            if isinstance(entry, str):
                m = _STEP_RE.match(entry)
                if not m:
                    raise FormatError(f"entry {entry!r} is not a step filename", manifest)
                step, path = int(m.group(1)), directory / entry
            else:
                step = int(entry)
                if step not in files:
                    raise FormatError(f"step {step} listed but no file found", manifest)
                path = files[step]
            if not path.exists():
                raise FormatError(f"listed file {path.name} does not exist", manifest)
            handles.append(SnapshotHandle(step, path))
        if any(b.step <= a.step for a, b in zip(handles, handles[1:])):
            raise FormatError("steps must be strictly increasing", manifest)
        return handles
    if not files:
        raise FormatError("no step_<6-digit>.qf1/.txt files", directory)
    return [SnapshotHandle(step, files[step]) for step in sorted(files)]
