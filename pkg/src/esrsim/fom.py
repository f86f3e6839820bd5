"""Figures of merit and the configuration / stack / environment studies.

The full pipeline for one device at one frequency:

    network (RLGC sections) -> excitation -> line state
      -> filament currents (short-end current) -> B at probes
      -> panel charges (line voltage profile) -> E at probes
"""

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import electroqs, magnetoqs, netline
from .errors import EmptyProbes, MismatchedProbeSets
from .scene import (
    FieldSample,
    _layer,
    build_scene,
    drop_colliding,
    effective_permittivity,
    generate_line,
    line_sections,
)

LINE_ROLES = ("signal", "return", "short_strap")
ENV_VARIANTS = ("bare", "with_dummies", "with_interconnect", "full")
_VARIANT_ROLES = {
    "bare": (),
    "with_dummies": ("dummy", "gate"),
    "with_interconnect": ("interconnect",),
    "full": ("dummy", "gate", "interconnect"),
}
COLUMNS = ("avg_B", "avg_E", "ratio_B_over_E", "conversion_efficiency", "s11_dB", "dissipated_power",
           "homogeneity_B")


@dataclass(frozen=True)
class FomReport:
    label: str
    avg_B: float
    avg_E: float
    ratio_B_over_E: float
    conversion_efficiency: float
    s11_dB: float
    dissipated_power: float
    homogeneity_B: float
    ratio_infinite: bool = False
    avg_B_components: tuple = (0.0, 0.0, 0.0)
    avg_E_components: tuple = (0.0, 0.0, 0.0)

    def as_dict(self):
        return asdict(self)


def _magnitudes(samples, attr):
    vecs = np.array([getattr(s, attr) for s in samples], dtype=complex)
    return vecs, np.sqrt(np.sum(np.abs(vecs) ** 2, axis=1))


def evaluate_fom(b_samples, e_samples, network, excitation, label=""):
    """Average |B|, |E| over the probe set and derived ratios."""
    if not b_samples or not e_samples:
        raise EmptyProbes("no probe samples")
    pb = [tuple(np.round(s.point, 15)) for s in b_samples]
    pe = [tuple(np.round(s.point, 15)) for s in e_samples]
    if pb != pe:
        raise MismatchedProbeSets("B and E samples are not over the same probes")
    bv, bm = _magnitudes(b_samples, "B")
    ev, em = _magnitudes(e_samples, "E")
    avg_b = float(np.mean(bm))
    avg_e = float(np.mean(em))
    if avg_e > 0:
        ratio, flag = avg_b / avg_e, False
    else:
        ratio, flag = math.inf, True
    hom = float(np.std(bm) / avg_b) if avg_b > 0 else 0.0
    p_av = excitation.available_power
    g = abs(excitation.s11)
    return FomReport(
        label=label,
        avg_B=avg_b,
        avg_E=avg_e,
        ratio_B_over_E=ratio,
        conversion_efficiency=avg_b / math.sqrt(p_av) if p_av > 0 else 0.0,
        s11_dB=20 * math.log10(g) if g > 0 else -math.inf,
        dissipated_power=netline.dissipated_power(network, excitation),
        homogeneity_B=hom,
        ratio_infinite=flag,
        avg_B_components=tuple(float(v) for v in np.mean(np.abs(bv), axis=0)),
        avg_E_components=tuple(float(v) for v in np.mean(np.abs(ev), axis=0)),
    )


# ---------------------------------------------------------------- comparison tables

def _norm(v, ref):
    if v == ref:
        return 1.0
    if ref == 0:
        return math.copysign(math.inf, v) if v != 0 else 1.0
    return v / ref


@dataclass
class ComparisonTable:
    rows: list
    reference: str
    title: str = ""

    def row(self, label):
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def normalized(self):
        ref = self.row(self.reference)
        return [{c: _norm(getattr(r, c), getattr(ref, c)) for c in COLUMNS} for r in self.rows]

    def to_csv(self):
        head = ["label"] + list(COLUMNS) + [f"{c}_norm" for c in COLUMNS]
        lines = [",".join(head)]
        for r, n in zip(self.rows, self.normalized()):
            vals = [r.label] + [repr(float(getattr(r, c))) for c in COLUMNS] + [repr(float(n[c])) for c in COLUMNS]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    def to_json(self):
        doc = {
            "title": self.title,
            "reference": self.reference,
            "rows": [r.as_dict() for r in self.rows],
            "normalized": dict(zip([r.label for r in self.rows], self.normalized())),
        }
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"

    def to_text(self):
        w = max(12, max(len(r.label) for r in self.rows) + 2)
        out = [f"{self.title}  (reference: {self.reference})".strip(), "label".ljust(w) + "".join(c.rjust(22) for c in COLUMNS)]
        for r in self.rows:
            out.append(r.label.ljust(w) + "".join(f"{getattr(r, c):22.6e}" for c in COLUMNS))
        out.append("normalized")
        for r, n in zip(self.rows, self.normalized()):
            out.append(r.label.ljust(w) + "".join(f"{n[c]:22.6f}" for c in COLUMNS))
        return "\n".join(out) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


# ---------------------------------------------------------------- pipeline

@dataclass(frozen=True)
class SolverSettings:
    brick_subdivision: tuple = (3, 3)
    segments_per_brick: int = 4
    panel_fine: float = 10e-9
    panel_coarse: float = 250e-9
    panel_grading: float = 0.1
    eps_eff: float = None
    rlgc_subdivision: tuple = (4, 3)


@dataclass
class DeviceResult:
    report: FomReport
    network: netline.NetworkPoint
    excitation: netline.Excitation
    state: netline.LineState
    currents: magnetoqs.CurrentSolution
    charges: electroqs.ChargeSolution
    b_samples: list
    e_samples: list
    eps_eff: float
    extras: dict = field(default_factory=dict)


def graded_edge(focus, settings):
    f = np.asarray(focus, dtype=float)

    def edge(p):
        d = float(np.linalg.norm(np.asarray(p, dtype=float) - f))
        return min(max(settings.panel_grading * d, settings.panel_fine), settings.panel_coarse)

    return edge


def probe_permittivity(scene, line):
    """Thickness-weighted permittivity between the line bottom and the mean probe height."""
    z_line = _layer(scene.stack, line.level).z_min
    pts = np.array(scene.all_probe_points())
    return effective_permittivity(scene.stack, z_line, float(pts[:, 2].mean()))


def section_common_modes(line, profile):
    """One neutralising common-mode unknown per uniform line section."""
    secs = line_sections(line)
    modes = []
    for k, (_, x0, x1) in enumerate(secs):
        lo = -math.inf if k == 0 else x0
        hi = math.inf if k == len(secs) - 1 else x1
        modes.append((lambda c: -profile(c),
                      lambda c, lo=lo, hi=hi: (c[:, 0] >= lo) & (c[:, 0] < hi)))
    return modes


def run_device(scene, line, frequency, input_power=-7.0, access=None, drive="power", terminal_current=None,
               settings=SolverSettings(), label="", temperature=None):
    """Full B/E pipeline for one scene at one frequency.

    ``drive`` is "power" (``input_power`` dBm available at the port) or
    "current" (short-end current fixed to ``terminal_current`` A peak).
    """
    temperature = scene.temperature if temperature is None else temperature
    port = scene.ports[0]
    point = netline.network_point(scene, line, frequency, temperature, access, settings.rlgc_subdivision)
    zin = point.zin()
    zref = port.reference_impedance
    if drive == "power":
        exc = netline.excitation_from_power(input_power, zref, zin)
    elif drive == "current":
        if terminal_current is None:
            raise ValueError("current drive needs terminal_current")
        unit = netline.line_state(point, netline.excitation_from_current(1.0, zref, zin))
        exc = netline.excitation_from_current(terminal_current / unit.short_current, zref, zin)
    else:
        raise ValueError(f"unknown drive {drive!r}")
    state = netline.line_state(point, exc)

    # magnetics: filament solve driven by the short-end current
    mesh = magnetoqs.discretize_filaments(scene, settings.brick_subdivision, settings.segments_per_brick,
                                          port=port, temperature=temperature)
    msys = magnetoqs.assemble_impedance(mesh, frequency)
    cur = magnetoqs.solve_currents(msys, state.short_current)
    b_samples = [s for ps in scene.probes for s in magnetoqs.b_field_at_probes(scene, cur, ps)]

    # electrics: line voltage profile on the port nets, other nets floating
    eps = settings.eps_eff or probe_permittivity(scene, line)
    focus = np.array(scene.all_probe_points()).mean(axis=0)
    panels = electroqs.discretize_panels(scene, graded_edge(focus, settings))
    psys = electroqs.assemble_panels(panels, eps, scene.conductors)
    end = line.length

    def profile(c):
        return state.voltage(np.clip(c[:, 0], 0.0, end))

    pots = {port.positive_net: profile, port.negative_net: 0.0}
    charges = electroqs.solve_charges(psys, pots, common_mode=section_common_modes(line, profile))
    e_samples = [s for ps in scene.probes for s in electroqs.e_field_at_probes(scene, charges, ps)]

    report = evaluate_fom(b_samples, e_samples, point, exc, label)
    return DeviceResult(report, point, exc, state, cur, charges, b_samples, e_samples, eps,
                        {"n_filaments": len(mesh), "n_panels": len(panels), "loss_filaments": cur.ohmic_loss(msys)})


# ---------------------------------------------------------------- scene variants

def rebuild_with_line(scene, line, keep_roles=None, clearance=0.0):
    """Replace the line bricks of ``scene`` by those of ``line``.

    Environment bricks (roles outside the line roles, optionally filtered by
    ``keep_roles``) are kept unless they collide with the new line.
    """
    new = generate_line(line, scene.stack, scene.materials)
    env = [b for b in scene.conductors if b.role not in LINE_ROLES
           and (keep_roles is None or b.role in keep_roles)]
    env = drop_colliding(env, new, clearance)
    return build_scene(stack=scene.stack, materials=scene.materials, conductors=new + env, ports=scene.ports,
                       probes=scene.probes, temperature=scene.temperature)


def _reference(labels, preferred, given):
    if given is not None:
        if given not in labels:
            raise KeyError(f"reference {given!r} not among rows")
        return given
    for p in preferred:
        if p in labels:
            return p
    return labels[0]


def compare_configurations(scene_base, configs, input_power=-7.0, frequency=10e9, access=None, drive="power",
                           terminal_current=1e-3, settings=SolverSettings(), reference=None):
    """Full pipeline per line configuration, same environment and probes."""
    if len(configs) < 2:
        raise ValueError("need at least two configurations")
    rows = []
    labels = []
    for cfg in configs:
        lab = cfg.kind
        while lab in labels:
            lab += "'"
        labels.append(lab)
        sc = rebuild_with_line(scene_base, cfg)
        rows.append(run_device(sc, cfg, frequency, input_power, access, drive, terminal_current, settings, lab).report)
    return ComparisonTable(rows, _reference(labels, ("CPW_TO_CPS",), reference), "configuration")


def compare_stacks(scene, line, levels, input_power=-7.0, frequency=10e9, access=None, drive="power",
                   terminal_current=1e-3, settings=SolverSettings(), reference=None):
    """Same line geometry moved between levels (strip thickness common to all levels)."""
    layers = [_layer(scene.stack, lv) for lv in levels]
    # one strip thickness for every level: the line's own, clipped to the thinnest layer
    t = min(l.thickness for l in layers)
    if line.thickness is not None:
        t = min(t, line.thickness)
    rows, labels = [], []
    for lv in levels:
        cfg = replace(line, level=lv, thickness=t)
        sc = rebuild_with_line(scene, cfg)
        lab = lv
        while lab in labels:
            lab += "'"
        labels.append(lab)
        rows.append(run_device(sc, cfg, frequency, input_power, access, drive, terminal_current, settings, lab).report)
    return ComparisonTable(rows, _reference(labels, ("M1",), reference), "stack")


def environment_scene(scene, line, variant):
    if variant not in _VARIANT_ROLES:
        raise ValueError(f"unknown environment variant {variant!r}")
    return rebuild_with_line(scene, line, keep_roles=_VARIANT_ROLES[variant])


def compare_environment(scene, line, variants=ENV_VARIANTS, input_power=-7.0, frequency=10e9, access=None,
                        drive="power", terminal_current=1e-3, settings=SolverSettings(), reference=None):
    """Rows for environment variants built by filtering the scene's non-line bricks by role."""
    rows = []
    for v in variants:
        sc = environment_scene(scene, line, v)
        rows.append(run_device(sc, line, frequency, input_power, access, drive, terminal_current, settings, v).report)
    return ComparisonTable(rows, _reference(list(variants), ("with_dummies",), reference), "environment")


def field_samples(result, points, label="map"):
    """FieldSample list (B and E) at arbitrary points for a solved device."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    B = magnetoqs.b_field(pts, result.currents.filaments, result.currents.currents)
    E = electroqs.e_field_points(result.charges, pts)
    return [FieldSample(tuple(p), tuple(b), tuple(e), label) for p, b, e in zip(pts, B, E)]


def merged_samples(result):
    return [FieldSample(b.point, b.B, e.E, b.label) for b, e in zip(result.b_samples, result.e_samples)]


FIELD_COLUMNS = ("x_m", "y_m", "z_m", "re_Bx", "im_Bx", "re_By", "im_By", "re_Bz", "im_Bz",
                 "re_Ex", "im_Ex", "re_Ey", "im_Ey", "re_Ez", "im_Ez")


def fields_table(samples):
    """Rows (x, y, z, re/im of B and E components) in input order."""
    out = []
    for s in samples:
        row = [float(c) for c in s.point]
        for v in (s.B, s.E):
            for c in v:
                row += [complex(c).real, complex(c).imag]
        out.append(row)
    return out


__all__ = [
    "FomReport", "ComparisonTable", "SolverSettings", "DeviceResult", "evaluate_fom", "run_device",
    "compare_configurations", "compare_stacks", "compare_environment", "environment_scene",
    "rebuild_with_line", "fields_table", "field_samples", "merged_samples", "FIELD_COLUMNS",
]
