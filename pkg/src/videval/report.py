"""Score reports: deterministic JSON/CSV output stamped with a config hash."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from . import __version__


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def config_hash(config: Mapping[str, Any], inputs: Iterable[str] = ()) -> str:
    """SHA-256 over the canonical config JSON and the bytes of every input file.

    Output locations and the parallelism degree do not affect results, so
    they are left out of the hash.
    """
    skip = {"out", "jobs"}
    canonical = json.dumps(
        _jsonable({k: config[k] for k in sorted(config) if k not in skip}), sort_keys=True, separators=(",", ":")
    )
    h = hashlib.sha256(canonical.encode())
    for path in sorted(set(inputs)):
        h.update(b"\0")
        h.update(os.path.basename(path).encode())
        h.update(file_digest(path).encode())
    return h.hexdigest()


@dataclass
class ScoreReport:
    task: str
    config_hash: str
    units: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    runs: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "toolkit_version": self.version,
            "config_hash": self.config_hash,
            "runs": self.runs,
            "units": self.units,
            "aggregates": self.aggregates,
            "sections": self.sections,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2) + "\n"


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def write_text(outdir: str, name: str, text: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
