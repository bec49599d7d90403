"""Tabular sweep results with reproducibility metadata.

A :class:`ScanResult` is a fixed column schema, a dense float table, and a
metadata block (configuration hash, solver tolerances, package versions).
Text serialization is delimiter-separated UTF-8 with '#'-prefixed metadata
lines; the structured form is self-describing JSON.  Data sections are
deterministic: identical inputs produce byte-identical rows.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

_FLOAT_FMT = "{:.12g}"


def canonical_hash(obj) -> str:
    """Short stable hash of a JSON-serializable object (order-insensitive dicts)."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


@dataclass
class ScanResult:
    """Row-major numeric sweep table plus metadata."""

    columns: tuple[str, ...]
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.rows.size and self.rows.shape[1] != len(self.columns):
            raise ValueError(
                f"row width {self.rows.shape[1]} does not match "
                f"{len(self.columns)} columns"
            )

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def to_csv_text(self) -> str:
        lines = [f"# meta {json.dumps(self.metadata, sort_keys=True, default=str)}"]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(_FLOAT_FMT.format(v) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str) -> "ScanResult":
        metadata: dict = {}
        header: list[str] | None = None
        data: list[list[float]] = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("meta "):
                    metadata = json.loads(body[5:])
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
            else:
                data.append([float(v) for v in line.split(",")])
        if header is None:
            raise ValueError("no header row found")
        rows = np.array(data, dtype=float) if data else np.empty((0, len(header)))
        return cls(columns=tuple(header), rows=rows, metadata=metadata)

    def to_json_obj(self) -> dict:
        return {
            "schema": list(self.columns),
            "metadata": self.metadata,
            "rows": [[float(v) for v in row] for row in self.rows],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ScanResult":
        return cls(
            columns=tuple(obj["schema"]),
            rows=np.array(obj["rows"], dtype=float).reshape(-1, len(obj["schema"])),
            metadata=dict(obj.get("metadata", {})),
        )

    def write(self, path, fmt: str = "csv") -> None:
        if fmt == "csv":
            text = self.to_csv_text()
        elif fmt == "structured":
            text = json.dumps(self.to_json_obj(), indent=2, sort_keys=True, default=str)
        else:
            raise ValueError(f"unknown format {fmt!r}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)

    @classmethod
    def read(cls, path) -> "ScanResult":
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        stripped = text.lstrip()
        if stripped.startswith("{"):
            return cls.from_json_obj(json.loads(text))
        return cls.from_csv_text(text)
