"""JSON/CSV writers that keep every real at 17 significant digits."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__


def format_real(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "NaN" if math.isnan(x) else ("Infinity" if x > 0 else "-Infinity")
    text = format(x, ".17g")
    if not any(ch in text for ch in ".en"):
        text += ".0"
    return text


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_real(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Serialize ``obj`` as JSON, writing floats with 17 significant digits."""
    if isinstance(obj, dict):
        # one top-level key per line keeps large point arrays diffable
        body = ",\n".join(f"  {json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items())
        return "{\n" + body + "\n}\n"
    return _encode(obj) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def write_csv(path, header, rows, manifest=None):
    """Comma-separated with a header row and LF endings.

    A manifest, when given, goes on a leading ``#`` comment line.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if manifest is not None:
            fh.write("# manifest: " + _encode(manifest) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_real(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; returns ``(header, rows)`` of strings."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


@dataclass
class RunManifest:
    subcommand: str
    params: dict
    seed: int | None = None
    version: str = __version__
    wall_time: float = 0.0
    started: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self):
        self.wall_time = time.perf_counter() - self.started
        return self

    def to_dict(self):
        out = asdict(self)
        out.pop("started")
        return out
