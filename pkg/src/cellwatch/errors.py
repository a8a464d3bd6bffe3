"""Domain exceptions shared by all cellwatch modules.

Everything raised here derives from ``CellwatchError`` so the CLI can map
domain failures to exit code 1 and leave usage/IO problems (exit code 2)
to the standard exception types.
"""

from __future__ import annotations


class CellwatchError(Exception):
    """Base class for all domain errors."""


class MalformedHeader(CellwatchError):
    """CSV header does not match the expected schema."""


class MalformedRow(CellwatchError):
    """One or more CSV rows failed to parse.

    ``line_no`` is the 1-based line number of the first bad row (the header
    is line 1); ``all_lines`` lists every offending line.
    """

    def __init__(self, line_no: int, message: str, all_lines: list[int] | None = None):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.all_lines = all_lines or [line_no]


class UnknownMetric(CellwatchError):
    """Metric name missing from the metric catalog."""

    def __init__(self, name: str):
        super().__init__(f"metric {name!r} not present in the catalog")
        self.name = name


class DuplicatePoint(CellwatchError):
    """Two rows share the same (cell, metric, window_start)."""

    def __init__(self, key: tuple):
        super().__init__(f"duplicate point for {key}")
        self.key = key


class TooFewPoints(CellwatchError):
    """A series does not carry enough usable points for the operation."""


class EmptyTraining(CellwatchError):
    """No training series were supplied."""


class UnknownKey(CellwatchError):
    """(cell, metric, hour) was never seen during training."""

    def __init__(self, key: tuple):
        super().__init__(f"no baseline for key {key}")
        self.key = key


class IncompatibleSketch(CellwatchError):
    """Histogram sketches cannot be merged (bounds or bin count differ)."""


class SchemaMismatch(CellwatchError):
    """Persisted document carries an unsupported schema version."""


class CorruptDb(CellwatchError):
    """Persisted fingerprint database violates an invariant."""


class InvalidTopology(CellwatchError):
    """Fog topology violates a structural invariant."""


class UnassignedCell(CellwatchError):
    """Scenario references a cell with no edge assignment."""

    def __init__(self, cell_id: str):
        super().__init__(f"cell {cell_id!r} is not assigned to any edge node")
        self.cell_id = cell_id


class InvalidSpec(CellwatchError):
    """Scenario specification is inconsistent."""
