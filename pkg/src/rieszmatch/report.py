"""Line-oriented run reports: key=value header plus a machine-readable block.

Floats are rendered with ``repr``, whose shortest round-trip form parses back
to the identical double, so reports carry full precision and byte-compare
cleanly across runs.
"""

from __future__ import annotations

import numpy as np

RECORD_SEPARATOR = "==records=="


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_report(header: list[tuple[str, object]], records: list[list[tuple[str, object]]]) -> str:
    lines = [f"{key}={format_value(value)}" for key, value in header]
    lines.append(RECORD_SEPARATOR)
    for record in records:
        lines.append(" ".join(f"{key}={format_value(value)}" for key, value in record))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> tuple[dict, list[dict]]:
    """Inverse of render_report with values kept as strings."""
    header: dict = {}
    records: list[dict] = []
    in_records = False
    for line in text.splitlines():
        if not line:
            continue
        if line == RECORD_SEPARATOR:
            in_records = True
            continue
        if in_records:
            records.append(dict(field.split("=", 1) for field in line.split(" ")))
        else:
            key, value = line.split("=", 1)
            header[key] = value
    return header, records
