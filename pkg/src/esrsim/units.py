"""Unit-suffixed quantity parsing for scene files."""

import re

import numpy as np

from .errors import UnknownUnit

LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}
FREQUENCY_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµ]+)\s*$")


def _parse(value, table, kind):
    if isinstance(value, bool) or not isinstance(value, str):
        raise UnknownUnit(f"{kind} {value!r} has no unit; expected one of {sorted(table)}")
    m = _QUANTITY.match(value)
    if m is None or m.group(2) not in table:
        raise UnknownUnit(f"cannot parse {kind} {value!r}; expected one of {sorted(table)}")
    return float(m.group(1)) * table[m.group(2)]


def parse_length(value):
    """'200nm' -> 2e-07. Bare numbers are rejected."""
    return _parse(value, LENGTH_UNITS, "length")


def parse_frequency(value):
    return _parse(value, FREQUENCY_UNITS, "frequency")


def _format(value, units):
    # shortest "<number><unit>" that parses back to the identical float
    value = float(value)
    best = f"{value!r}{units[-1][0]}"
    for unit, scale in units:
        x = value / scale
        for digits in range(1, 18):
            text = np.format_float_positional(float(f"{x:.{digits}g}"), trim="-")
            if float(text) * scale == value:
                if len(text) + len(unit) < len(best):
                    best = text + unit
                break
    return best


def format_length(value):
    return _format(value, (("nm", 1e-9), ("um", 1e-6), ("mm", 1e-3), ("m", 1.0)))


def format_frequency(value):
    return _format(value, (("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0)))
