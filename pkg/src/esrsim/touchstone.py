"""Touchstone v1.1 one- and two-port files."""

import math

import numpy as np

from .errors import IoError, ParseError

_FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}


def abcd_to_s(abcd, z0=50.0):
    a, b, c, d = np.asarray(abcd, dtype=complex).ravel()
    den = a + b / z0 + c * z0 + d
    return np.array([[(a + b / z0 - c * z0 - d) / den, 2 * (a * d - b * c) / den],
                     [2 / den, (-a + b / z0 - c * z0 + d) / den]])


def s_to_abcd(s, z0=50.0):
    s11, s12, s21, s22 = np.asarray(s, dtype=complex).ravel()
    den = 2 * s21
    return np.array([[((1 + s11) * (1 - s22) + s12 * s21) / den, z0 * ((1 + s11) * (1 + s22) - s12 * s21) / den],
                     [((1 - s11) * (1 - s22) - s12 * s21) / (z0 * den), ((1 - s11) * (1 + s22) + s12 * s21) / den]])


def format_touchstone(frequencies, s, z0=50.0, comments=()):
    """Text of an .s1p (s shape (n,)) or .s2p (s shape (n, 2, 2)) file, RI format, Hz."""
    f = np.asarray(frequencies, dtype=float)
    s = np.asarray(s, dtype=complex)
    lines = [f"! {c}" for c in comments]
    lines.append(f"# Hz S RI R {z0:g}")
    if s.ndim == 1:
        for fk, v in zip(f, s):
            lines.append(f"{fk:.9e} {v.real:.9e} {v.imag:.9e}")
    else:
        # v1.1 two-port order: S11 S21 S12 S22
        for fk, m in zip(f, s):
            vals = (m[0, 0], m[1, 0], m[0, 1], m[1, 1])
            lines.append(f"{fk:.9e} " + " ".join(f"{v.real:.9e} {v.imag:.9e}" for v in vals))
    return "\n".join(lines) + "\n"


def write_touchstone(path, frequencies, s, z0=50.0, comments=()):
    text = format_touchstone(frequencies, s, z0, comments)
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}", str(path)) from None


def _pair(fmt, x, y):
    if fmt == "RI":
        return complex(x, y)
    if fmt == "MA":
        return x * complex(math.cos(math.radians(y)), math.sin(math.radians(y)))
    mag = 10 ** (x / 20)
    return mag * complex(math.cos(math.radians(y)), math.sin(math.radians(y)))


def parse_touchstone(text, nports=None):
    """(frequencies Hz, S array, z0) from Touchstone v1.1 text."""
    unit, fmt, z0 = 1e9, "MA", 50.0
    seen_option = False
    values = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if seen_option:
                continue
            seen_option = True
            toks = line[1:].upper().split()
            i = 0
            while i < len(toks):
                t = toks[i]
                if t in _FREQ_UNITS:
                    unit = _FREQ_UNITS[t]
                elif t in ("RI", "MA", "DB"):
                    fmt = t
                elif t == "R":
                    if i + 1 >= len(toks):
                        raise ParseError("reference impedance missing", lineno, 1)
                    z0 = float(toks[i + 1])
                    i += 1
                elif t != "S":
                    raise ParseError(f"unsupported option {t!r}", lineno, 1)
                i += 1
            continue
        try:
            values.extend(float(v) for v in line.split())
        except ValueError:
            raise ParseError(f"bad number in {raw!r}", lineno, 1) from None
    if nports is None:
        nports = 1
    per = 1 + 2 * nports * nports
    if not values or len(values) % per:
        raise ParseError(f"data do not form rows of {per} values")
    rows = np.array(values).reshape(-1, per)
    f = rows[:, 0] * unit
    pairs = [[_pair(fmt, r[1 + 2 * k], r[2 + 2 * k]) for k in range(nports * nports)] for r in rows]
    if nports == 1:
        return f, np.array([p[0] for p in pairs]), z0
    s = np.array([[[p[0], p[2]], [p[1], p[3]]] for p in pairs])
    return f, s, z0


def read_touchstone(path):
    try:
        with open(path, encoding="ascii") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}", str(path)) from None
    n = 2 if str(path).lower().endswith(".s2p") else 1
    return parse_touchstone(text, n)
