"""Binary snapshots and newline-delimited JSON time series."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .data import PaperParams
from .solver import SolverState
from .spectral import GridSpec, ScalarSpectralField, SpectralField

MAGIC = b"HMHDSNAP"
FORMAT_VERSION = 1
_DTYPE = "<c16"
SERIES_SCHEMA = "hallmhd.timeseries"
SERIES_VERSION = 1


class SnapshotError(ValueError):
    pass


def save_snapshot(path, fields: Mapping[str, Any], meta: Mapping[str, Any] | None = None) -> Path:
    """Write named spectral fields (one grid) with a JSON header.

    Layout: magic, uint32 little-endian header length, UTF-8 JSON header,
    then each field's coefficients as little-endian complex128 in header order.
    """
    path = Path(path)
    if not fields:
        raise SnapshotError("nothing to save")
    grids = {f.grid for f in fields.values()}
    if len(grids) != 1:
        raise SnapshotError("all snapshot fields must share one grid")
    (grid,) = grids
    entries = []
    for name, f in fields.items():
        kind = "vector" if isinstance(f, SpectralField) else "scalar"
        entries.append({"name": name, "kind": kind, "shape": list(f.coeffs.shape)})
    header = {
        "format_version": FORMAT_VERSION,
        "dtype": _DTYPE,
        "grid": {"n": grid.n, "period": grid.period},
        "fields": entries,
        "meta": dict(meta or {}),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for f in fields.values():
            fh.write(np.ascontiguousarray(f.coeffs, dtype=_DTYPE).tobytes())
    tmp.replace(path)
    return path


def load_snapshot(path) -> tuple[dict[str, Any], dict]:
    """Inverse of :func:`save_snapshot`; returns (fields, header)."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise SnapshotError(f"{path}: not a snapshot file")
    (size,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12 : 12 + size].decode())
    if header.get("format_version") != FORMAT_VERSION:
        raise SnapshotError(f"{path}: unsupported format version {header.get('format_version')!r}")
    grid = GridSpec(int(header["grid"]["n"]), float(header["grid"]["period"]))
    offset = 12 + size
    item = np.dtype(header["dtype"]).itemsize
    fields = {}
    for e in header["fields"]:
        shape = tuple(e["shape"])
        count = int(np.prod(shape))
        end = offset + count * item
        if end > len(raw):
            raise SnapshotError(f"{path}: truncated coefficient block")
        data = np.frombuffer(raw[offset:end], dtype=header["dtype"]).reshape(shape).astype(np.complex128)
        cls = SpectralField if e["kind"] == "vector" else ScalarSpectralField
        fields[e["name"]] = cls(grid, data)
        offset = end
    if offset != len(raw):
        raise SnapshotError(f"{path}: trailing bytes after coefficient block")
    return fields, header


def save_state(path, state: SolverState, params: PaperParams, extra: Mapping[str, Any] | None = None) -> Path:
    meta = {
        "t": state.t,
        "step_count": state.step_count,
        "dt_last": state.dt_last,
        "params": asdict(params),
        **dict(extra or {}),
    }
    return save_snapshot(path, {"u": state.u_hat, "b": state.b_hat}, meta)


def load_state(path) -> tuple[SolverState, dict]:
    fields, header = load_snapshot(path)
    meta = header["meta"]
    state = SolverState(fields["u"], fields["b"], float(meta["t"]), int(meta["step_count"]), float(meta["dt_last"]))
    return state, header


# -- time series ----------------------------------------------------------


def _clean(value):
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


class TimeSeriesWriter:
    """Append records with a fixed field order after a JSON header line.

    Times must increase strictly.  Non-finite floats are written as strings.
    """

    def __init__(self, path, fields: Iterable[str], header: Mapping[str, Any] | None = None):
        self.path = Path(path)
        self.fields = tuple(fields)
        if "t" not in self.fields:
            raise ValueError("time series records need a 't' field")
        self._last_t = -math.inf
        self._fh = open(self.path, "w", encoding="utf-8")
        head = {"schema": SERIES_SCHEMA, "version": SERIES_VERSION, "fields": list(self.fields)}
        head.update(header or {})
        self._fh.write(json.dumps(_clean_tree(head), sort_keys=True) + "\n")

    def write(self, record: Mapping[str, Any]) -> None:
        t = float(record["t"])
        if not t > self._last_t:
            raise ValueError(f"time series times must increase strictly ({t} after {self._last_t})")
        self._last_t = t
        missing = set(self.fields) - set(record)
        if missing:
            raise ValueError(f"record lacks fields {sorted(missing)}")
        row = [_clean(record[k]) for k in self.fields]
        self._fh.write(json.dumps(row) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _clean_tree(obj):
    if isinstance(obj, Mapping):
        return {str(k): _clean_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_tree(v) for v in obj]
    return _clean(obj)


def read_time_series(path) -> tuple[dict, list[dict]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty time series")
    header = json.loads(lines[0])
    if header.get("schema") != SERIES_SCHEMA:
        raise ValueError(f"{path}: unknown schema {header.get('schema')!r}")
    fields = header["fields"]
    rows = []
    for line in lines[1:]:
        values = json.loads(line)
        rows.append({k: (float(v) if isinstance(v, str) else v) for k, v in zip(fields, values)})
    return header, rows
