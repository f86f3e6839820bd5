"""Transmission-line and network engine.

Per-unit-length RLGC from the 2-d field solvers, shorted-line input
impedance, S11, excitation from input power and ABCD de-embedding.

Phasors are peak amplitudes with exp(+jwt) time dependence; power is
Re(V I*)/2 throughout.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import electroqs, magnetoqs
from .errors import ActiveLoad, SingularAccess
from .scene import _layer, cross_section, line_sections


@dataclass(frozen=True)
class RlgcModel:
    R: float
    L: float
    C: float
    G: float = 0.0
    frequency: float = 0.0

    def __post_init__(self):
        if not (self.R >= 0 and self.L > 0 and self.C > 0 and self.G >= 0):
            raise ValueError(f"invalid RLGC values R={self.R} L={self.L} C={self.C} G={self.G}")

    def series(self):
        return self.R + 2j * math.pi * self.frequency * self.L

    def shunt(self):
        return self.G + 2j * math.pi * self.frequency * self.C


# ---------------------------------------------------------------- extraction

@lru_cache(maxsize=256)
def _capacitance(section, eps):
    return electroqs.capacitance_per_length(list(section), eps)


@lru_cache(maxsize=4096)
def _loop(section, frequency, temperature, subdivision):
    z, l_loop, _, _ = magnetoqs.loop_impedance_per_length(list(section), frequency, temperature, subdivision)
    return z, l_loop


def line_permittivity(stack, line):
    """Relative permittivity used for the line capacitance: the line layer's dielectric."""
    return _layer(stack, line.level).ambient_dielectric.relative_permittivity


def extract_rlgc(scene, line, frequency, temperature=None, kind=None, subdivision=(4, 3), eps_eff=None):
    """Per-length RLGC of one uniform section of ``line`` (``kind`` selects it for baluns)."""
    temperature = scene.temperature if temperature is None else temperature
    section = tuple(cross_section(line, scene.stack, scene.materials, kind))
    eps = line_permittivity(scene.stack, line) if eps_eff is None else eps_eff
    z, l_loop = _loop(section, float(frequency), float(temperature), tuple(subdivision))
    C = _capacitance(section, float(eps))
    return RlgcModel(max(z.real, 0.0), l_loop, C, 0.0, float(frequency))


# ---------------------------------------------------------------- line algebra

def characteristic(rlgc):
    """(Z0, gamma) with Re(gamma) >= 0."""
    zs, ys = rlgc.series(), rlgc.shunt()
    if ys == 0:
        raise ValueError("shunt admittance is zero; Z0 undefined")
    gamma = np.sqrt(zs * ys)
    if gamma.real < 0 or (gamma.real == 0 and gamma.imag < 0):
        gamma = -gamma
    z0 = zs / gamma if gamma != 0 else np.sqrt(zs / ys)
    return complex(z0), complex(gamma)


def input_impedance_shorted(Z0, gamma, length):
    if not length > 0:
        raise ValueError("length must be > 0")
    return complex(Z0 * np.tanh(gamma * length))


def s11(Zin, Zref=50.0):
    if not Zref > 0:
        raise ValueError("Zref must be > 0")
    return complex((Zin - Zref) / (Zin + Zref))


def line_abcd(Z0, gamma, length):
    gl = gamma * length
    ch, sh = np.cosh(gl), np.sinh(gl)
    return np.array([[ch, Z0 * sh], [sh / Z0, ch]], dtype=complex)


def abcd_cascade(a, b):
    return np.asarray(a, dtype=complex) @ np.asarray(b, dtype=complex)


def de_embed(total, access):
    """Remove a leading access two-port: access^-1 @ total."""
    access = np.asarray(access, dtype=complex)
    det = np.linalg.det(access)
    scale = np.max(np.abs(access))
    if not np.isfinite(det) or abs(det) <= 1e-12 * scale * scale:
        raise SingularAccess("access ABCD is singular")
    a, b, c, d = access.ravel()
    inv = np.array([[d, -b], [-c, a]]) / det
    return inv @ np.asarray(total, dtype=complex)


def shorted_input(abcd):
    """Input impedance of a two-port terminated by a short."""
    return complex(abcd[0, 1] / abcd[1, 1])


# ---------------------------------------------------------------- excitation

def dbm_to_watt(dbm):
    return 1e-3 * 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class Excitation:
    input_power: float          # dBm, available from the source
    reference_impedance: float
    zin: complex
    s11: complex
    available_power: float      # W
    accepted_power: float       # W
    incident: complex           # peak incident voltage wave
    v_in: complex
    i_in: complex


def excitation_from_power(input_power, Zref, Zin):
    g = s11(Zin, Zref)
    if abs(g) > 1 + 1e-12:
        raise ActiveLoad(f"|S11| = {abs(g):.6g} > 1")
    p = dbm_to_watt(input_power)
    a = math.sqrt(2 * p * Zref)
    return Excitation(float(input_power), float(Zref), complex(Zin), g, p, p * (1 - abs(g) ** 2), complex(a),
                      complex(a * (1 + g)), complex(a * (1 - g) / Zref))


def excitation_from_current(current, Zref, Zin):
    """Excitation producing a given peak input current."""
    g = s11(Zin, Zref)
    if abs(g) > 1 + 1e-12:
        raise ActiveLoad(f"|S11| = {abs(g):.6g} > 1")
    a = current * Zref / (1 - g)
    p = abs(a) ** 2 / (2 * Zref)
    dbm = 10 * math.log10(p / 1e-3) if p > 0 else -math.inf
    return Excitation(dbm, float(Zref), complex(Zin), g, p, p * (1 - abs(g) ** 2), complex(a),
                      complex(a * (1 + g)), complex(current))


def dissipated_power(network, excitation):
    """All accepted power of the shorted one-port is ohmic loss."""
    del network
    return excitation.available_power * (1 - abs(excitation.s11) ** 2)


# ---------------------------------------------------------------- network model

@dataclass
class Section:
    kind: str
    x0: float
    x1: float
    rlgc: RlgcModel
    z0: complex
    gamma: complex

    @property
    def length(self):
        return self.x1 - self.x0

    def abcd(self):
        return line_abcd(self.z0, self.gamma, self.length)


@dataclass
class NetworkPoint:
    frequency: float
    sections: list
    access: Section = None

    def antenna_abcd(self):
        m = np.eye(2, dtype=complex)
        for s in self.sections:
            m = m @ s.abcd()
        return m

    def access_abcd(self):
        return np.eye(2, dtype=complex) if self.access is None else self.access.abcd()

    def total_abcd(self):
        return abcd_cascade(self.access_abcd(), self.antenna_abcd())

    def zin(self):
        return shorted_input(self.total_abcd())

    def antenna_zin(self):
        return shorted_input(self.antenna_abcd())


@dataclass
class NetworkModel:
    frequencies: np.ndarray
    points: list
    reference_impedance: float = 50.0
    temperature: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if len(f) == 0 or np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be non-empty and strictly increasing")
        self.frequencies = f

    @property
    def zin(self):
        return np.array([p.zin() for p in self.points])

    @property
    def antenna_zin(self):
        return np.array([p.antenna_zin() for p in self.points])

    @property
    def s11(self):
        return np.array([s11(z, self.reference_impedance) for z in self.zin])

    def __len__(self):
        return len(self.points)


def _section(scene, line, kind, x0, x1, frequency, temperature, subdivision):
    rl = extract_rlgc(scene, line, frequency, temperature, kind, subdivision)
    z0, g = characteristic(rl)
    return Section(kind, x0, x1, rl, z0, g)


def network_point(scene, line, frequency, temperature=None, access=None, subdivision=(4, 3)):
    temperature = scene.temperature if temperature is None else temperature
    secs = [_section(scene, line, k, a, b, frequency, temperature, subdivision) for k, a, b in line_sections(line)]
    acc = None
    if access is not None:
        acc = _section(scene, access, access.kind, -access.length, 0.0, frequency, temperature, (8, 3))
    return NetworkPoint(float(frequency), secs, acc)


def frequency_sweep(scene, line, frequencies, temperature=None, access=None, reference_impedance=50.0,
                    subdivision=(4, 3)):
    """Per-frequency RLGC -> Z0, gamma -> Zin -> S11 for the shorted line (plus access section)."""
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    if len(freqs) == 0 or np.any(np.diff(freqs) <= 0) or np.any(freqs <= 0):
        raise ValueError("frequencies must be positive, non-empty and strictly increasing")
    temperature = scene.temperature if temperature is None else temperature
    pts = [network_point(scene, line, f, temperature, access, subdivision) for f in freqs]
    return NetworkModel(freqs, pts, reference_impedance, temperature)


def lossless_network(frequencies, z0, length, eps_r=1.0, reference_impedance=50.0):
    """Shorted lossless line with real Z0 (for checks and examples)."""
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    c0 = 299792458.0
    pts = []
    for f in freqs:
        w = 2 * math.pi * f
        v = c0 / math.sqrt(eps_r)
        rl = RlgcModel(0.0, z0 / v, 1.0 / (z0 * v), 0.0, f)
        pts.append(NetworkPoint(f, [Section("lossless", 0.0, length, rl, complex(z0), complex(0, w / v))]))
    return NetworkModel(freqs, pts, reference_impedance)


# ---------------------------------------------------------------- line state

@dataclass
class LineState:
    """Voltage and current along the antenna for one excitation."""

    point: NetworkPoint
    v_antenna: complex
    i_antenna: complex

    def at(self, x):
        """(V, I) at positions x measured from the antenna input."""
        x = np.asarray(x, dtype=float)
        v = np.zeros(x.shape, dtype=complex)
        i = np.zeros(x.shape, dtype=complex)
        vs, is_ = self.v_antenna, self.i_antenna
        for k, s in enumerate(self.point.sections):
            last = k == len(self.point.sections) - 1
            m = (x >= s.x0) & ((x < s.x1) if not last else np.ones_like(x, dtype=bool))
            if k == 0:
                m |= x < s.x0
            d = np.clip(x[m] - s.x0, 0.0, s.length)
            gl = s.gamma * d
            v[m] = vs * np.cosh(gl) - s.z0 * is_ * np.sinh(gl)
            i[m] = is_ * np.cosh(gl) - vs / s.z0 * np.sinh(gl)
            gl = s.gamma * s.length
            vs, is_ = vs * np.cosh(gl) - s.z0 * is_ * np.sinh(gl), is_ * np.cosh(gl) - vs / s.z0 * np.sinh(gl)
        return v, i

    def voltage(self, x):
        return self.at(x)[0]

    @property
    def short_current(self):
        end = self.point.sections[-1].x1
        return complex(self.at(np.array([end]))[1][0])

    @property
    def short_voltage(self):
        end = self.point.sections[-1].x1
        return complex(self.at(np.array([end]))[0][0])


def line_state(point, excitation):
    """Propagate the port excitation through the access section to the antenna."""
    vi = np.array([excitation.v_in, excitation.i_in], dtype=complex)
    if point.access is not None:
        vi = de_embed(np.eye(2), point.access_abcd()) @ vi
    return LineState(point, complex(vi[0]), complex(vi[1]))
