"""Distortion points, curves and their CSV/JSON serialization."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

CSV_HEADER = ("d1", "d2", "scheme", "param")


class SourceTag(str, Enum):
    FRONTIER = "frontier"
    UNCODED = "uncoded"
    HYBRID = "hybrid"
    GENIE_OUTER = "genie_outer"
    HYBRID_OUTER = "hybrid_outer"
    SEPARATION = "separation"
    TRIVIAL_ANALOG = "trivial_analog"


@dataclass(frozen=True)
class DistortionPoint:
    d1: float
    d2: float
    source_tag: SourceTag
    param: float | None = None


def fmt_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


@dataclass
class RegionCurve:
    """Ordered (d1, d2) points of one scheme or bound.

    Points are kept sorted by ``d1``; non-finite points are rejected.
    """

    points: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for p in self.points:
            if not (math.isfinite(p.d1) and math.isfinite(p.d2)):
                raise ValueError(f"non-finite distortion point {p}")
            if p.param is not None and not math.isfinite(p.param):
                raise ValueError(f"non-finite parameter on point {p}")
        self.points = sorted(self.points, key=lambda p: p.d1)

    def __len__(self):
        return len(self.points)

    @property
    def d1(self):
        return [p.d1 for p in self.points]

    @property
    def d2(self):
        return [p.d2 for p in self.points]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow([fmt_float(p.d1), fmt_float(p.d2), p.source_tag.value,
                        "" if p.param is None else fmt_float(p.param)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, meta: dict | None = None) -> "RegionCurve":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"expected header {','.join(CSV_HEADER)}")
        pts = [DistortionPoint(float(d1), float(d2), SourceTag(tag),
                               float(param) if param else None)
               for d1, d2, tag, param in rows[1:]]
        return cls(pts, dict(meta or {}))


def atomic_write(path: Path | str, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    if isinstance(obj, Enum):
        return obj.value
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _sanitize(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def dump_json(obj) -> str:
    """JSON with non-finite floats mapped to ``null``."""
    return json.dumps(_sanitize(obj), indent=2, sort_keys=False,
                      default=_json_default, allow_nan=False) + "\n"
