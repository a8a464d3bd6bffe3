"""Telemetry ingestion: CDR parsing, metric CSV parsing, cell-level aggregation.

Per-call records never leave this module: ``aggregate_cdr`` reduces them to
cell-level series and drops every per-user field, so downstream code only
ever sees aggregates. Subscriber endpoints are accepted as opaque hashes
only; raw numbers are never part of the schema.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DuplicatePoint, MalformedHeader, MalformedRow, UnknownMetric

MISSING = None

CDR_HEADER = ["cell_id", "start_time", "duration", "dropped", "source_hash", "dest_hash"]
METRIC_HEADER = ["cell_id", "metric_name", "window_start", "value"]


class MetricKind(str, Enum):
    KQI = "KQI"
    KPI = "KPI"


class Polarity(str, Enum):
    HIGHER_IS_WORSE = "HIGHER_IS_WORSE"
    LOWER_IS_WORSE = "LOWER_IS_WORSE"


@dataclass(frozen=True)
class MetricInfo:
    """Catalog entry: how a metric is classified and gridded.

    ``value_range``, when declared, pins the histogram bounds used for
    baseline sketches so that models fitted on different data partitions
    merge exactly.
    """

    kind: MetricKind
    polarity: Polarity
    window_len: int
    value_range: tuple[float, float] | None = None


Catalog = dict[str, MetricInfo]


@dataclass(frozen=True)
class CdrRecord:
    cell_id: str
    start_time: int
    duration: float
    dropped: bool
    source_hash: str
    dest_hash: str


@dataclass
class MetricSeries:
    """One metric of one cell on a fixed window grid.

    ``points`` is ordered by window_start, window_starts are strictly
    increasing multiples of ``window_len``, and interior grid gaps are
    represented explicitly as MISSING (None) values.
    """

    cell_id: str
    metric_name: str
    kind: MetricKind
    polarity: Polarity
    window_len: int
    points: list[tuple[int, float | None]] = field(default_factory=list)

    def values(self) -> list[float]:
        """Non-missing values in chronological order."""
        return [v for _, v in self.points if v is not None]

    def value_at(self, window_start: int) -> float | None:
        for ws, v in self.points:
            if ws == window_start:
                return v
        return None


# KQI series derived from CDR aggregation. Polarities are fixed by what the
# quantity means, not configurable: fewer attempts, more drops, shorter calls
# all indicate degradation.
CDR_DERIVED_METRICS: dict[str, Polarity] = {
    "call_attempts": Polarity.LOWER_IS_WORSE,
    "drop_rate": Polarity.HIGHER_IS_WORSE,
    "mean_duration": Polarity.LOWER_IS_WORSE,
}


def load_catalog(path: str | Path) -> Catalog:
    """Read a metric catalog JSON file (metric name -> kind/polarity/grid)."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    catalog: Catalog = {}
    for name, entry in raw.items():
        rng = entry.get("value_range")
        catalog[name] = MetricInfo(
            kind=MetricKind(entry["kind"]),
            polarity=Polarity(entry["polarity"]),
            window_len=int(entry["window_len_seconds"]),
            value_range=(float(rng[0]), float(rng[1])) if rng else None,
        )
    return catalog


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    doc = {
        name: {
            "kind": info.kind.value,
            "polarity": info.polarity.value,
            "window_len_seconds": info.window_len,
            **({"value_range": list(info.value_range)} if info.value_range else {}),
        }
        for name, info in sorted(catalog.items())
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def parse_cdr(path: str | Path) -> list[CdrRecord]:
    """Parse a CDR CSV file, preserving row order.

    Row errors are collected across the whole file; if any row fails the
    parse fails with a MalformedRow naming the first bad line.
    """
    records: list[CdrRecord] = []
    bad: list[tuple[int, str]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CDR_HEADER:
            raise MalformedHeader(f"expected columns {CDR_HEADER}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CDR_HEADER):
                bad.append((line_no, f"expected {len(CDR_HEADER)} fields, got {len(row)}"))
                continue
            cell_id, start_s, dur_s, dropped_s, src, dst = row
            try:
                start_time = int(start_s)
            except ValueError:
                bad.append((line_no, f"non-integer start_time {start_s!r}"))
                continue
            try:
                duration = float(dur_s)
            except ValueError:
                bad.append((line_no, f"non-numeric duration {dur_s!r}"))
                continue
            if duration < 0:
                bad.append((line_no, f"negative duration {duration}"))
                continue
            if dropped_s not in ("0", "1"):
                bad.append((line_no, f"dropped must be 0 or 1, got {dropped_s!r}"))
                continue
            records.append(
                CdrRecord(cell_id, start_time, duration, dropped_s == "1", src, dst)
            )
    if bad:
        lines = [ln for ln, _ in bad]
        raise MalformedRow(bad[0][0], bad[0][1], all_lines=lines)
    return records


def write_cdr_csv(records: list[CdrRecord], path: str | Path) -> None:
    lines = [",".join(CDR_HEADER)]
    for r in records:
        dur = int(r.duration) if float(r.duration).is_integer() else r.duration
        lines.append(
            f"{r.cell_id},{r.start_time},{dur},{int(r.dropped)},{r.source_hash},{r.dest_hash}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_metric_csv(path: str | Path, kind: MetricKind, catalog: Catalog) -> list[MetricSeries]:
    """Parse a metric CSV into grid-complete series.

    Rows are grouped by (cell, metric), sorted by window_start, and interior
    grid gaps are filled with MISSING so that cleaning can see and report
    them. An empty value field also denotes MISSING.
    """
    grouped: dict[tuple[str, str], dict[int, float | None]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRIC_HEADER:
            raise MalformedHeader(f"expected columns {METRIC_HEADER}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(METRIC_HEADER):
                raise MalformedRow(line_no, f"expected {len(METRIC_HEADER)} fields, got {len(row)}")
            cell_id, metric_name, ws_s, value_s = row
            info = catalog.get(metric_name)
            if info is None:
                raise UnknownMetric(metric_name)
            if info.kind != kind:
                raise MalformedRow(
                    line_no, f"metric {metric_name!r} is {info.kind.value}, expected {kind.value}"
                )
            try:
                ws = int(ws_s)
            except ValueError:
                raise MalformedRow(line_no, f"non-integer window_start {ws_s!r}") from None
            if ws % info.window_len != 0:
                raise MalformedRow(
                    line_no, f"window_start {ws} not aligned to window_len {info.window_len}"
                )
            value: float | None
            if value_s == "":
                value = MISSING
            else:
                try:
                    value = float(value_s)
                except ValueError:
                    raise MalformedRow(line_no, f"non-numeric value {value_s!r}") from None
            points = grouped.setdefault((cell_id, metric_name), {})
            if ws in points:
                raise DuplicatePoint((cell_id, metric_name, ws))
            points[ws] = value

    out: list[MetricSeries] = []
    for (cell_id, metric_name), points in sorted(grouped.items()):
        info = catalog[metric_name]
        out.append(
            MetricSeries(
                cell_id=cell_id,
                metric_name=metric_name,
                kind=info.kind,
                polarity=info.polarity,
                window_len=info.window_len,
                points=_grid_fill(points, info.window_len),
            )
        )
    return out


def _grid_fill(points: dict[int, float | None], window_len: int) -> list[tuple[int, float | None]]:
    starts = sorted(points)
    filled: list[tuple[int, float | None]] = []
    for ws in range(starts[0], starts[-1] + window_len, window_len):
        filled.append((ws, points.get(ws, MISSING)))
    return filled


def write_metric_csv(series: list[MetricSeries], path: str | Path) -> None:
    """Serialize series to the metric CSV schema; MISSING becomes an empty field.

    All grid points are written explicitly, so parse(write(x)) == x.
    """
    lines = [",".join(METRIC_HEADER)]
    for s in series:
        for ws, value in s.points:
            v = "" if value is None else repr(float(value))
            lines.append(f"{s.cell_id},{s.metric_name},{ws},{v}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def aggregate_cdr(records: list[CdrRecord], window_len: int) -> list[MetricSeries]:
    """Aggregate per-call records into cell-level KQI series.

    Per (cell, window) this yields call_attempts, drop_rate and mean_duration.
    A call belongs to the window containing its start_time. Within a cell the
    grid spans that cell's first to last active window; empty windows carry
    0 attempts and MISSING rates. No per-user field survives.
    """
    if window_len <= 0:
        raise ValueError("window_len must be positive")
    per_cell: dict[str, dict[int, list[float]]] = {}
    for r in records:
        ws = (r.start_time // window_len) * window_len
        acc = per_cell.setdefault(r.cell_id, {}).setdefault(ws, [0, 0, 0.0])
        acc[0] += 1
        acc[1] += 1 if r.dropped else 0
        acc[2] += r.duration

    out: list[MetricSeries] = []
    for cell_id in sorted(per_cell):
        windows = per_cell[cell_id]
        starts = sorted(windows)
        grid = range(starts[0], starts[-1] + window_len, window_len)
        attempts_pts: list[tuple[int, float | None]] = []
        drop_pts: list[tuple[int, float | None]] = []
        dur_pts: list[tuple[int, float | None]] = []
        for ws in grid:
            if ws in windows:
                n, dropped, total_dur = windows[ws]
                attempts_pts.append((ws, float(n)))
                drop_pts.append((ws, dropped / n))
                dur_pts.append((ws, total_dur / n))
            else:
                attempts_pts.append((ws, 0.0))
                drop_pts.append((ws, MISSING))
                dur_pts.append((ws, MISSING))
        for name, pts in (
            ("call_attempts", attempts_pts),
            ("drop_rate", drop_pts),
            ("mean_duration", dur_pts),
        ):
            out.append(
                MetricSeries(
                    cell_id=cell_id,
                    metric_name=name,
                    kind=MetricKind.KQI,
                    polarity=CDR_DERIVED_METRICS[name],
                    window_len=window_len,
                    points=pts,
                )
            )
    return out
