"""Deterministic rendering of losswatch CSV tables into figures."""

from .render import FigureSpec, db_of_loss, db_of_squeezing, render
from .schemas import (
    ARL_OVERLAY_COLUMNS,
    FIGURE_IDS,
    REQUIRED_COLUMNS,
    EmptyInputError,
    FigvizError,
    SchemaError,
    read_table,
)

__version__ = "0.1.0"
