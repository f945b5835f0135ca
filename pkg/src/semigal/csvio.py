"""Deterministic CSV and binary writers shared by all outputs.

Every output file starts with a version stamp line and a seed line so a
run can be traced back to its manifest.  Numbers are printed with %.17g,
which round-trips float64 exactly, so identical inputs give identical
bytes apart from the version stamp.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import __version__

VERSION_PREFIX = "# semigal "


@dataclass
class RunManifest:
    """What produced an output file: command, seed, locations."""

    command: str = "library"
    seed: int = 0
    config_path: str = ""
    out_dir: str = ""
    extra: dict = field(default_factory=dict)

    def header_lines(self) -> list[str]:
        lines = [
            f"{VERSION_PREFIX}{__version__}",
            f"# seed={self.seed}",
            f"# command={self.command}",
        ]
        if self.config_path:
            lines.append(f"# config={self.config_path}")
        for key in sorted(self.extra):
            lines.append(f"# {key}={self.extra[key]}")
        return lines


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(
    path: str,
    columns: Sequence[str],
    units: Sequence[str],
    rows: Iterable[Sequence],
    manifest: RunManifest | None = None,
) -> None:
    if len(columns) != len(units):
        raise ValueError("units row must match the column count")
    manifest = manifest or RunManifest()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in manifest.header_lines():
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        fh.write(",".join(units) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(
                    f"row of width {len(row)} does not match {len(columns)} columns"
                )
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def read_csv(path: str):
    """Read back a CSV written by write_csv.

    Returns (header_comments, columns, units, rows) with every data cell
    kept as a string.
    """
    comments, columns, units, rows = [], None, None, []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                comments.append(line)
                continue
            if columns is None:
                columns = line.split(",")
            elif units is None:
                units = line.split(",")
            else:
                rows.append(line.split(","))
    return comments, columns, units, rows


def write_key_value_report(
    path: str, entries: Sequence[tuple[str, object]], manifest: RunManifest | None = None
) -> None:
    """Plain key = value report, one entry per line."""
    manifest = manifest or RunManifest()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in manifest.header_lines():
            fh.write(line + "\n")
        for key, value in entries:
            fh.write(f"{key} = {_format_cell(value)}\n")


def strip_version_line(text: str) -> str:
    """Drop the version stamp line, for byte comparisons across versions."""
    return "\n".join(
        line for line in text.splitlines() if not line.startswith(VERSION_PREFIX)
    )
