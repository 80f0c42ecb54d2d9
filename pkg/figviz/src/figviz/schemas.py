"""CSV schemas figviz consumes, and the errors raised when they don't hold.

Each figure id names the columns its primary CSV must carry; extra columns
are ignored. fig3 optionally takes a second CSV (threshold-calibration
table) for an overlay panel.
"""

from __future__ import annotations

import csv


class FigvizError(Exception):
    """Base class for rendering errors."""


class SchemaError(FigvizError):
    """An input CSV is missing a required column."""

    def __init__(self, path, column):
        self.path = str(path)
        self.column = column
        super().__init__(f"{self.path}: missing required column {column!r}")


class EmptyInputError(FigvizError):
    """An input CSV parsed but contains no data rows."""

    def __init__(self, path):
        super().__init__(f"{path}: no data rows")


FIGURE_IDS = ("fig2", "fig3", "fig4", "fig5", "fig7", "fig8")

REQUIRED_COLUMNS = {
    "fig2": ("na", "scheme", "cre"),
    "fig3": ("na", "s_ratio", "tau_ratio", "modulation"),
    "fig4": ("s", "scheme", "cre"),
    "fig5": ("eta1", "scheme", "cre"),
    "fig7": ("eta1", "scheme", "cre"),
    "fig8": ("r", "scheme", "mean_tau"),
}

ARL_OVERLAY_COLUMNS = ("h", "gamma", "censor_frac")


def read_table(path, required: tuple[str, ...]) -> dict[str, list]:
    """Parse a CSV into columns, validating the required header names.

    Numeric-looking fields become floats; everything else stays a string.
    """
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(path, col)
        rows = list(reader)
    if not rows:
        raise EmptyInputError(path)
    table: dict[str, list] = {col: [] for col in header}
    for row in rows:
        for col in header:
            raw = row[col]
            try:
                table[col].append(float(raw))
            except (TypeError, ValueError):
                table[col].append(raw)
    return table
