"""Rendering of run results: CSV tables with 17 significant digits and JSON documents.

Bodies are rendered to strings first and written only once the whole command has succeeded.
"""
import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from .util import fmt

__all__ = (
    "cell", "render_csv", "render_json", "render_summary", "write_outputs",
    "orbit_rows", "field_rows", "trace_rows", "pressure_rows",
)


def cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt(value)
    if isinstance(value, (tuple, list)):
        return " ".join(cell(v) for v in value)
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell(v) for v in row])
    return buffer.getvalue()


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def render_json(doc: Any) -> str:
    return json.dumps(_plain(doc), indent=4) + "\n"


def render_summary(doc: Any, json_out: bool = False) -> str:
    return render_json(doc).rstrip() if json_out else yaml.dump(_plain(doc), sort_keys=False, allow_unicode=True).rstrip()


def write_outputs(directory: Path, bodies: dict[str, str]) -> list[str]:
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, body in bodies.items():
        (directory / name).write_text(body)
        written.append(str(directory / name))
    return written


def orbit_rows(table) -> Iterable[tuple]:
    """``n, orbit_id, m, weight, x_1 .. x_d`` with coordinates as reduced ``p/q``."""
    for orbit_id, orbit in enumerate(table.orbits):
        for point in orbit.points:
            yield (table.n, orbit_id, orbit.period, orbit.weight, *point.as_strings())


def field_rows(sample) -> Iterable[tuple]:
    for index, k, kind, coefficient in sample.rows():
        yield index, "[" + ",".join(map(str, k)) + "]", kind, coefficient


def trace_rows(samples) -> Iterable[tuple]:
    for s in samples:
        yield s.n, s.xi, s.seed if s.seed is not None else "", s.raw.real, s.raw.imag, s.scaled.real, s.scaled.imag


def pressure_rows(curve) -> Iterable[tuple]:
    for n in curve.periods:
        for beta, value in zip(curve.betas, curve.values[n]):
            yield beta, n, value
