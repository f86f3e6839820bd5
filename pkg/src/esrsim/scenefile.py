"""JSON scene files: parsing with unit-suffixed lengths, and serialization.

Lengths are strings such as "200nm" or "1.5um"; frequencies "10GHz".
Optional ``line``, ``access``, ``dummies`` and ``interconnect`` sections
expand through the scene generators and presets.
"""

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import jsonschema
import numpy as np

from . import presets
from .errors import IoError, ParseError, ValidationError
from .fom import LINE_ROLES, SolverSettings
from .scene import (
    ConductorBrick,
    Layer,
    LineConfig,
    Material,
    Port,
    ProbeSet,
    build_scene,
    drop_colliding,
    generate_dummies,
    generate_line,
)
from .units import format_frequency, format_length, parse_frequency, parse_length


@dataclass(frozen=True)
class Settings:
    temperature: float = 4.0
    frequency: float = 10e9
    sweep: tuple = (100e6, 20e9, 101, "linear")
    pin_dbm: float = -7.0
    drive: str = "power"
    terminal_current: float = 1e-3
    solver: SolverSettings = SolverSettings()

    def frequencies(self):
        start, stop, count, spacing = self.sweep
        if count == 1:
            return np.array([start])
        if spacing == "log":
            return np.geomspace(start, stop, count)
        return np.linspace(start, stop, count)


@dataclass
class SceneDocument:
    scene: object
    line: LineConfig = None
    access: LineConfig = None
    settings: Settings = field(default_factory=Settings)


_SCHEMA = None


def schema():
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = json.loads(resources.files("esrsim").joinpath("scene.schema.json").read_text())
    return _SCHEMA


def _path(err):
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def _line(d):
    opt = {k: parse_length(d[k]) for k in ("thickness", "strap_length", "cpw_length") if k in d}
    return LineConfig(
        kind=d["kind"],
        signal_width=parse_length(d["signal_width"]),
        gap=parse_length(d["gap"]),
        ground_width=parse_length(d["ground_width"]),
        length=parse_length(d["length"]),
        level=d["level"],
        shorted_end=d.get("shorted_end", True),
        material=d.get("material"),
        **opt,
    )


def _settings(d):
    s = Settings()
    kw = {}
    if "temperature" in d:
        kw["temperature"] = float(d["temperature"])
    if "frequency" in d:
        kw["frequency"] = parse_frequency(d["frequency"])
    if "sweep" in d:
        sw = d["sweep"]
        start, stop = parse_frequency(sw["start"]), parse_frequency(sw["stop"])
        if not 0 < start <= stop:
            raise ValidationError("sweep needs 0 < start <= stop", "settings/sweep")
        kw["sweep"] = (start, stop, int(sw["count"]), sw.get("spacing", "linear"))
    for k in ("pin_dbm", "terminal_current"):
        if k in d:
            kw[k] = float(d[k])
    if "drive" in d:
        kw["drive"] = d["drive"]
    solver = s.solver
    if d.get("eps_eff") is not None:
        solver = replace(solver, eps_eff=float(d["eps_eff"]))
    disc = d.get("discretization", {})
    sk = {}
    for k in ("brick_subdivision", "rlgc_subdivision"):
        if k in disc:
            sk[k] = tuple(int(v) for v in disc[k])
    if "segments_per_brick" in disc:
        sk["segments_per_brick"] = int(disc["segments_per_brick"])
    for k in ("panel_fine", "panel_coarse"):
        if k in disc:
            sk[k] = parse_length(disc[k])
    if "panel_grading" in disc:
        sk["panel_grading"] = float(disc["panel_grading"])
    kw["solver"] = replace(solver, **sk)
    return replace(s, **kw)


def document_from_dict(doc):
    """Validate against the schema and build a SceneDocument."""
    v = jsonschema.Draft202012Validator(schema())
    errs = sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        raise ParseError(f"schema violation at {_path(e)}: {e.message}", entity=_path(e))

    materials = {}
    for m in doc["materials"]:
        if m["name"] in materials:
            raise ValidationError(f"duplicate material {m['name']!r}", m["name"])
        materials[m["name"]] = Material(
            m["name"],
            float(m.get("conductivity_300K", 0.0)),
            float(m.get("rrr", 1.0)),
            float(m.get("relative_permittivity", 1.0)),
            bool(m.get("is_conductor", False)),
        )

    def mat(name, where):
        if name not in materials:
            raise ValidationError(f"{where}: unknown material {name!r}", where)
        return materials[name]

    stack = tuple(Layer(l["name"], parse_length(l["z_min"]), parse_length(l["thickness"]),
                        mat(l["dielectric"], f"layer {l['name']}")) for l in doc["stack"])

    bricks = []
    line = _line(doc["line"]) if "line" in doc else None
    if line is not None:
        bricks += generate_line(line, stack, materials)
    for b in doc.get("conductors", []):
        bricks.append(ConductorBrick(
            b["id"], tuple(parse_length(v) for v in b["box"]), mat(b["material"], f"brick {b['id']}"),
            b["net"], b["role"], b.get("axis"), tuple(tuple(t) for t in b.get("ties", ()))))
    if "interconnect" in doc:
        if line is None:
            raise ValidationError("interconnect preset needs a line section", "interconnect")
        ic = doc["interconnect"]
        kw = {}
        if "level" in ic:
            kw["level"] = ic["level"]
        if "width" in ic:
            kw["width"] = parse_length(ic["width"])
        bricks += drop_colliding(presets.interconnect(line, stack, materials, **kw), bricks)
    if "dummies" in doc:
        dm = doc["dummies"]
        level = dm.get("level", "poly")
        material = mat(dm.get("material", "poly"), "dummies")
        pitch = parse_length(dm["pitch"])
        clearance = parse_length(dm["clearance"]) if "clearance" in dm else 10e-9
        if "region" in dm:
            region = tuple(parse_length(v) for v in dm["region"])
            cand = generate_dummies(region, pitch, dm["fill_fraction"], level, material, stack)
        else:
            if line is None:
                raise ValidationError("dummies without region need a line section", "dummies")
            span = tuple(parse_length(v) for v in dm["span"]) if "span" in dm else (1.6e-6, 1.6e-6)
            cand = presets.dummy_grid(line, stack, {**materials, "poly": material}, dm["fill_fraction"], pitch,
                                      level, span)
        bricks += drop_colliding(cand, bricks, clearance)

    if "ports" in doc:
        ports = [Port(p["id"], p["positive_net"], p["negative_net"], float(p.get("reference_impedance", 50.0)),
                      (p["terminal_plane"][0], parse_length(p["terminal_plane"][1])) if "terminal_plane" in p else None)
                 for p in doc["ports"]]
    elif line is not None:
        ports = [presets.line_port()]
    else:
        ports = []
    if "probes" in doc:
        probes = [ProbeSet(tuple(tuple(parse_length(c) for c in pt) for pt in ps["points"]), ps["label"])
                  for ps in doc["probes"]]
    elif line is not None:
        probes = list(presets.qd_probes(line))
    else:
        probes = []

    settings = _settings(doc.get("settings", {}))
    scene = build_scene(stack=stack, materials=materials, conductors=bricks, ports=ports, probes=probes,
                        temperature=settings.temperature)
    access = _line(doc["access"]) if "access" in doc else None
    return SceneDocument(scene, line, access, settings)


def loads(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return document_from_dict(doc)


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read scene file {path}: {exc.strerror}", str(path)) from None
    return loads(text)


def parse_scene(path):
    """Validated Scene from a scene file."""
    return load(path).scene


# ---------------------------------------------------------------- serialization

def _line_dict(line):
    d = {
        "kind": line.kind,
        "signal_width": format_length(line.signal_width),
        "gap": format_length(line.gap),
        "ground_width": format_length(line.ground_width),
        "length": format_length(line.length),
        "level": line.level,
    }
    if line.material is not None:
        d["material"] = line.material
    for k in ("thickness", "strap_length", "cpw_length"):
        if getattr(line, k) is not None:
            d[k] = format_length(getattr(line, k))
    return d


def document_to_dict(doc):
    sc = doc.scene
    line_ids = set()
    if doc.line is not None:
        line_ids = {b.id for b in generate_line(doc.line, sc.stack, sc.materials)}
    out = {
        "materials": [
            {"name": m.name, "conductivity_300K": m.conductivity_300K, "rrr": m.rrr,
             "relative_permittivity": m.relative_permittivity, "is_conductor": m.is_conductor}
            for m in sc.materials.values()
        ],
        "stack": [{"name": l.name, "z_min": format_length(l.z_min), "thickness": format_length(l.thickness),
                   "dielectric": l.ambient_dielectric.name} for l in sc.stack],
        "conductors": [],
    }
    for b in sc.conductors:
        if b.id in line_ids:
            continue
        d = {"id": b.id, "box": [format_length(v) for v in b.box], "material": b.material.name, "net": b.net,
             "role": b.role}
        if b.axis is not None:
            d["axis"] = b.axis
        if b.ties:
            d["ties"] = [list(t) for t in b.ties]
        out["conductors"].append(d)
    if doc.line is not None:
        out["line"] = _line_dict(doc.line)
    if doc.access is not None:
        out["access"] = _line_dict(doc.access)
    ports = []
    for p in sc.ports:
        d = {"id": p.id, "positive_net": p.positive_net, "negative_net": p.negative_net,
             "reference_impedance": p.reference_impedance}
        if p.terminal_plane is not None:
            d["terminal_plane"] = [p.terminal_plane[0], format_length(p.terminal_plane[1])]
        ports.append(d)
    out["ports"] = ports
    out["probes"] = [{"label": ps.label, "points": [[format_length(c) for c in pt] for pt in ps.points]}
                     for ps in sc.probes]
    s = doc.settings
    sv = s.solver
    settings = {
        "temperature": sc.temperature,
        "frequency": format_frequency(s.frequency),
        "sweep": {"start": format_frequency(s.sweep[0]), "stop": format_frequency(s.sweep[1]),
                  "count": s.sweep[2], "spacing": s.sweep[3]},
        "pin_dbm": s.pin_dbm,
        "drive": s.drive,
        "terminal_current": s.terminal_current,
        "eps_eff": sv.eps_eff,
        "discretization": {
            "brick_subdivision": list(sv.brick_subdivision),
            "segments_per_brick": sv.segments_per_brick,
            "panel_fine": format_length(sv.panel_fine),
            "panel_coarse": format_length(sv.panel_coarse),
            "panel_grading": sv.panel_grading,
            "rlgc_subdivision": list(sv.rlgc_subdivision),
        },
    }
    out["settings"] = settings
    return out


def dumps(doc):
    return json.dumps(document_to_dict(doc), indent=2, ensure_ascii=False) + "\n"


def serialize(doc, path):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(doc))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}", str(path)) from None


def preset_document(kind="CPW_TO_CPS", level="M1", dummies=True, interconnects=False, temperature=4.0,
                    access=True):
    d = presets.esr_device(kind, level, dummies=dummies, interconnects=interconnects, temperature=temperature,
                           access=access)
    return SceneDocument(d.scene, d.line, d.access, Settings(temperature=temperature))


__all__ = ["Settings", "SceneDocument", "parse_scene", "load", "loads", "document_from_dict", "document_to_dict",
           "dumps", "serialize", "preset_document", "LINE_ROLES"]
