"""Trace, report and snapshot files written by the experiment commands."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class TraceWriter:
    """Per-step CSV rows plus a JSON sidecar describing the run."""

    def __init__(self, path: Path, columns: list[str], metadata: dict):
        self.path = Path(path)
        self.columns = list(columns)
        self._fh = self.path.open("w", newline="")
        self._csv = csv.DictWriter(self._fh, fieldnames=self.columns)
        self._csv.writeheader()
        self.rows = 0
        write_json(self.path.with_suffix(".json"), {"columns": self.columns, **metadata})

    def write(self, row: dict) -> None:
        self._csv.writerow({k: _fmt(row.get(k, "")) for k in self.columns})
        self.rows += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_json(path: Path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_snapshot(path: Path, arrays: dict[str, np.ndarray], metadata: dict) -> None:
    """One JSON header line, then each array as little-endian float64 in C order."""
    names = list(arrays)
    header = {"fields": names, "shape": list(next(iter(arrays.values())).shape),
              "dtype": "<f8", "order": "C", **metadata}
    with Path(path).open("wb") as fh:
        fh.write((json.dumps(header, sort_keys=True, default=_json_default) + "\n").encode())
        for n in names:
            fh.write(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())


def read_snapshot(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline().decode())
        shape = tuple(header["shape"])
        count = int(np.prod(shape))
        out = {}
        for n in header["fields"]:
            out[n] = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape).copy()
    return header, out
