"""Geometric and material description of an ESR control-line device.

Everything is an axis-aligned brick in SI units (meters).  The line runs
along +x from its port plane at x = 0 to the short-circuit strap.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigDoesNotFitLayer,
    DanglingNet,
    EmptyRegion,
    LayerGap,
    NotAConductor,
    OverlappingConductors,
    ProbeInsideConductor,
    ValidationError,
)

FLOATING = "FLOATING"
ROLES = ("signal", "return", "dummy", "gate", "interconnect", "short_strap")
LINE_KINDS = ("CPS", "CPW", "CPW_TO_CPS")
AXES = "xyz"

# absolute geometric tolerance; structures are >= 1 nm
GEOM_TOL = 1e-15

T_ROOM = 300.0
T_CRYO = 4.0


@dataclass(frozen=True)
class Material:
    name: str
    conductivity_300K: float = 0.0
    rrr: float = 1.0
    relative_permittivity: float = 1.0
    is_conductor: bool = False

    def __post_init__(self):
        if self.is_conductor and not self.conductivity_300K > 0:
            raise ValidationError(f"conductor {self.name!r} needs conductivity_300K > 0", self.name)
        if not self.is_conductor and self.relative_permittivity < 1:
            raise ValidationError(f"dielectric {self.name!r} needs relative_permittivity >= 1", self.name)
        if self.rrr < 1:
            raise ValidationError(f"material {self.name!r} has rrr < 1", self.name)


@dataclass(frozen=True)
class Layer:
    name: str
    z_min: float
    thickness: float
    ambient_dielectric: Material

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValidationError(f"layer {self.name!r} needs thickness > 0", self.name)

    @property
    def z_max(self):
        return self.z_min + self.thickness


@dataclass(frozen=True)
class ConductorBrick:
    """Axis-aligned conductor.

    ``axis`` is the direction current flows along in the magnetic solve;
    when omitted the longest extent is used.  ``ties`` holds
    (other_id, own_end, other_end) triples, ends being 'lo' or 'hi' along
    each brick's current axis, joined by an ideal zero-impedance link
    (used for the CPW-to-CPS balun).
    """

    id: str
    box: tuple
    material: Material
    net: str
    role: str
    axis: str = None
    ties: tuple = ()

    def __post_init__(self):
        box = tuple(float(v) for v in self.box)
        object.__setattr__(self, "box", box)
        x0, x1, y0, y1, z0, z1 = box
        if not (x1 > x0 and y1 > y0 and z1 > z0):
            raise ValidationError(f"brick {self.id!r} has non-positive extent", self.id)
        if self.role not in ROLES:
            raise ValidationError(f"brick {self.id!r} has unknown role {self.role!r}", self.id)
        if self.net == FLOATING and self.role not in ("dummy", "gate"):
            raise ValidationError(f"brick {self.id!r}: FLOATING net only allowed for dummy/gate", self.id)
        if self.axis is not None and self.axis not in AXES:
            raise ValidationError(f"brick {self.id!r} has bad axis {self.axis!r}", self.id)
        ties = tuple(tuple(t) for t in self.ties)
        for t in ties:
            if len(t) != 3 or t[1] not in ("lo", "hi") or t[2] not in ("lo", "hi"):
                raise ValidationError(f"brick {self.id!r}: tie must be (id, 'lo'|'hi', 'lo'|'hi')", self.id)
        object.__setattr__(self, "ties", ties)

    @property
    def lo(self):
        return np.array(self.box[0::2])

    @property
    def hi(self):
        return np.array(self.box[1::2])

    @property
    def size(self):
        return self.hi - self.lo

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def current_axis(self):
        if self.axis is not None:
            return AXES.index(self.axis)
        return int(np.argmax(self.size))

    def contains(self, point, tol=GEOM_TOL):
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))


@dataclass(frozen=True)
class Port:
    id: str
    positive_net: str
    negative_net: str
    reference_impedance: float = 50.0
    # (axis letter, coordinate) of the plane holding the terminals; None -> lowest x of the port nets
    terminal_plane: tuple = None

    def __post_init__(self):
        if self.positive_net == self.negative_net:
            raise ValidationError(f"port {self.id!r}: positive and negative nets coincide", self.id)
        if not self.reference_impedance > 0:
            raise ValidationError(f"port {self.id!r}: reference impedance must be > 0", self.id)
        if self.terminal_plane is not None:
            axis, coord = self.terminal_plane
            object.__setattr__(self, "terminal_plane", (str(axis), float(coord)))


@dataclass(frozen=True)
class ProbeSet:
    points: tuple
    label: str

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        if not pts:
            raise ValidationError(f"probe set {self.label!r} is empty", self.label)
        if any(len(p) != 3 for p in pts):
            raise ValidationError(f"probe set {self.label!r} needs 3-d points", self.label)
        object.__setattr__(self, "points", pts)

    def as_array(self):
        return np.array(self.points, dtype=float)


@dataclass(frozen=True)
class LineConfig:
    kind: str
    signal_width: float
    gap: float
    ground_width: float
    length: float
    level: str
    shorted_end: bool = True
    material: str = None
    thickness: float = None
    strap_length: float = None
    cpw_length: float = None

    def __post_init__(self):
        if self.kind not in LINE_KINDS:
            raise ValidationError(f"unknown line kind {self.kind!r}")
        for name in ("signal_width", "gap", "ground_width", "length"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"line {name} must be > 0")
        for name in ("thickness", "strap_length", "cpw_length"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"line {name} must be > 0")
        if self.cpw_length is not None and self.cpw_length >= self.length:
            raise ValidationError("cpw_length must be shorter than the line")

    @property
    def strap(self):
        return self.strap_length if self.strap_length is not None else self.signal_width

    @property
    def transition(self):
        """x of the CPW -> CPS plane (CPW_TO_CPS only)."""
        return self.cpw_length if self.cpw_length is not None else 0.5 * self.length


@dataclass(frozen=True)
class Scene:
    stack: tuple
    materials: dict
    conductors: tuple
    ports: tuple
    probes: tuple
    temperature: float
    # derived by build_scene
    layer_of: dict = field(default_factory=dict)
    contacts: tuple = ()
    component_of: dict = field(default_factory=dict)

    def parts(self):
        return dict(
            stack=self.stack,
            materials=self.materials,
            conductors=self.conductors,
            ports=self.ports,
            probes=self.probes,
            temperature=self.temperature,
        )

    def brick(self, brick_id):
        for b in self.conductors:
            if b.id == brick_id:
                return b
        raise KeyError(brick_id)

    def layer(self, name):
        for layer in self.stack:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def nets(self):
        out = {}
        for b in self.conductors:
            out.setdefault(b.net, []).append(b.id)
        return out

    def port_connected_ids(self):
        """Ids of bricks galvanically connected to some port net."""
        port_nets = {n for p in self.ports for n in (p.positive_net, p.negative_net)}
        comps = {self.component_of[b.id] for b in self.conductors if b.net in port_nets}
        return [b.id for b in self.conductors if self.component_of[b.id] in comps and b.net != FLOATING]

    def all_probe_points(self):
        return np.concatenate([p.as_array() for p in self.probes], axis=0)

    def bounding_box(self):
        lo = np.min([b.lo for b in self.conductors], axis=0)
        hi = np.max([b.hi for b in self.conductors], axis=0)
        lo[2] = min(lo[2], self.stack[0].z_min)
        hi[2] = max(hi[2], self.stack[-1].z_max)
        return lo, hi

    def with_conductors(self, conductors):
        return build_scene(**{**self.parts(), "conductors": tuple(conductors)})


def boxes_overlap(a, b, tol=GEOM_TOL):
    return all(min(a[2 * k + 1], b[2 * k + 1]) - max(a[2 * k], b[2 * k]) > tol for k in range(3))


def contact(a, b, tol=GEOM_TOL):
    """Face contact between two boxes.

    Returns (normal_axis, patch_lo, patch_hi) or None.  The patch is the
    shared rectangle (degenerate along the normal axis).
    """
    lo = np.maximum(np.array(a[0::2]), np.array(b[0::2]))
    hi = np.minimum(np.array(a[1::2]), np.array(b[1::2]))
    ext = hi - lo
    flat = [k for k in range(3) if abs(ext[k]) <= tol]
    if len(flat) != 1:
        return None
    k = flat[0]
    if all(ext[j] > tol for j in range(3) if j != k):
        return k, lo, hi
    return None


def _pairwise_overlaps(boxes, tol=GEOM_TOL):
    lo = boxes[:, 0::2]
    hi = boxes[:, 1::2]
    ext = np.minimum(hi[:, None, :], hi[None, :, :]) - np.maximum(lo[:, None, :], lo[None, :, :])
    return ext


def build_scene(stack, materials, conductors, ports, probes, temperature):
    """Validate the parts and return an immutable Scene with resolved layers and contacts."""
    stack = tuple(sorted(stack, key=lambda l: l.z_min))
    for lower, upper in zip(stack, stack[1:]):
        if upper.z_min < lower.z_max - GEOM_TOL:
            raise ValidationError(f"layers {lower.name!r} and {upper.name!r} overlap", upper.name)
    if len({l.name for l in stack}) != len(stack):
        raise ValidationError("duplicate layer names")
    if not temperature > 0:
        raise ValidationError("temperature must be > 0 K")
    conductors = tuple(conductors)
    ids = [b.id for b in conductors]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate conductor ids")
    if not conductors:
        raise ValidationError("scene has no conductors")

    layer_of = {}
    for b in conductors:
        if not b.material.is_conductor:
            raise ValidationError(f"brick {b.id!r} uses non-conductor {b.material.name!r}", b.id)
        hits = [l.name for l in stack if b.box[4] >= l.z_min - GEOM_TOL and b.box[5] <= l.z_max + GEOM_TOL]
        if len(hits) != 1:
            raise LayerGap(f"brick {b.id!r} is not contained in exactly one layer", b.id)
        layer_of[b.id] = hits[0]

    boxes = np.array([b.box for b in conductors])
    ext = _pairwise_overlaps(boxes)
    inside = np.all(ext > GEOM_TOL, axis=2)
    np.fill_diagonal(inside, False)
    if inside.any():
        i, j = np.argwhere(inside)[0]
        raise OverlappingConductors(
            f"bricks {ids[i]!r} and {ids[j]!r} share interior volume", [ids[i], ids[j]]
        )

    flat = np.abs(ext) <= GEOM_TOL
    positive = ext > GEOM_TOL
    touching = (flat.sum(axis=2) == 1) & ((flat | positive).all(axis=2))
    touching = np.triu(touching, 1)
    contacts = []
    for i, j in np.argwhere(touching):
        c = contact(conductors[i].box, conductors[j].box)
        if c is not None:
            contacts.append((ids[i], ids[j], c[0], tuple(c[1]), tuple(c[2])))

    index = {bid: k for k, bid in enumerate(ids)}
    parent = list(range(len(ids)))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a, b, *_ in contacts:
        parent[find(index[a])] = find(index[b])
    for b in conductors:
        for t, _, _ in b.ties:
            if t not in index:
                raise ValidationError(f"brick {b.id!r} ties to unknown brick {t!r}", b.id)
            parent[find(index[b.id])] = find(index[t])
    component_of = {bid: find(index[bid]) for bid in ids}

    nets = {}
    for b in conductors:
        nets.setdefault(b.net, []).append(b.id)
    for p in ports:
        for net in (p.positive_net, p.negative_net):
            if net not in nets:
                raise DanglingNet(f"port {p.id!r} references net {net!r} with no bricks", net)
        comps = {component_of[bid] for net in (p.positive_net, p.negative_net) for bid in nets[net]}
        if len(comps) != 1:
            raise DanglingNet(f"port {p.id!r}: its nets are not one connected conductor graph", p.id)

    lo, hi = boxes[:, 0::2].min(axis=0), boxes[:, 1::2].max(axis=0)
    lo[2] = min(lo[2], stack[0].z_min)
    hi[2] = max(hi[2], stack[-1].z_max)
    for ps in probes:
        pts = ps.as_array()
        if np.any(pts < lo - GEOM_TOL) or np.any(pts > hi + GEOM_TOL):
            raise ValidationError(f"probe set {ps.label!r} leaves the scene bounding box", ps.label)
        within = np.all((pts[:, None, :] >= boxes[None, :, 0::2] - GEOM_TOL)
                        & (pts[:, None, :] <= boxes[None, :, 1::2] + GEOM_TOL), axis=2)
        if within.any():
            k, j = np.argwhere(within)[0]
            raise ProbeInsideConductor(
                f"probe {k} of {ps.label!r} lies in brick {ids[j]!r}", [ps.label, ids[j]]
            )

    return Scene(
        stack=stack,
        materials=dict(materials),
        conductors=conductors,
        ports=tuple(ports),
        probes=tuple(probes),
        temperature=float(temperature),
        layer_of=layer_of,
        contacts=tuple(contacts),
        component_of=component_of,
    )


def _layer(stack, name):
    for layer in stack:
        if layer.name == name:
            return layer
    raise ConfigDoesNotFitLayer(f"level {name!r} not in stack", name)


def generate_line(config, stack, materials, prefix="line"):
    """Bricks of a shorted coplanar line.

    Signal strip occupies y in [-gap/2 - w, -gap/2], the first return
    [gap/2, gap/2 + ground_width]; CPW adds a mirrored second ground on
    the signal's outer side.  All three kinds share that frame so that
    comparisons only change the return topology.
    """
    layer = _layer(stack, config.level)
    t = config.thickness if config.thickness is not None else layer.thickness
    if t > layer.thickness * (1 + 1e-9):
        raise ConfigDoesNotFitLayer(
            f"strip thickness {t:g} m exceeds layer {layer.name!r} ({layer.thickness:g} m)", layer.name
        )
    mat_name = config.material if config.material is not None else config.level
    if mat_name not in materials:
        raise ValidationError(f"line material {mat_name!r} not in catalog", mat_name)
    mat = materials[mat_name]
    z0, z1 = layer.z_min, layer.z_min + t
    w, g, gw, length = config.signal_width, config.gap, config.ground_width, config.length
    sig_y = (-0.5 * g - w, -0.5 * g)
    ret_y = (0.5 * g, 0.5 * g + gw)
    gnd2_y = (sig_y[0] - g - gw, sig_y[0] - g)
    strap_x = (length, length + config.strap)

    def brick(name, x, y, net, role, axis="x", ties=()):
        return ConductorBrick(f"{prefix}.{name}", (x[0], x[1], y[0], y[1], z0, z1), mat, net, role, axis, ties)

    if config.kind == "CPS":
        return [
            brick("signal", (0.0, length), sig_y, "sig", "signal"),
            brick("return", (0.0, length), ret_y, "gnd", "return"),
            brick("strap", strap_x, (sig_y[0], ret_y[1]), "gnd", "short_strap", "y"),
        ]
    if config.kind == "CPW":
        return [
            brick("signal", (0.0, length), sig_y, "sig", "signal"),
            brick("return", (0.0, length), ret_y, "gnd", "return"),
            brick("ground2", (0.0, length), gnd2_y, "gnd", "return"),
            brick("strap", strap_x, (gnd2_y[0], ret_y[1]), "gnd", "short_strap", "y"),
        ]
    a = config.transition
    return [
        brick("cpw.signal", (0.0, a), sig_y, "sig", "signal"),
        brick("cpw.return", (0.0, a), ret_y, "gnd", "return"),
        brick("cpw.ground2", (0.0, a), gnd2_y, "gnd", "return", ties=((f"{prefix}.cpw.return", "hi", "hi"),)),
        brick("cps.signal", (a, length), sig_y, "sig", "signal"),
        brick("cps.return", (a, length), ret_y, "gnd", "return"),
        brick("strap", strap_x, (sig_y[0], ret_y[1]), "gnd", "short_strap", "y"),
    ]


def line_sections(config):
    """Uniform sections of the line from port to short: [(kind, x_start, x_end)]."""
    if config.kind == "CPW_TO_CPS":
        a = config.transition
        return [("CPW", 0.0, a), ("CPS", a, config.length)]
    return [(config.kind, 0.0, config.length)]


def cross_section(config, stack, materials, kind=None):
    """2-d cross-section of one uniform section: list of ((y0, y1, z0, z1), net, Material)."""
    kind = kind or ("CPW" if config.kind == "CPW_TO_CPS" else config.kind)
    bricks = generate_line(replace(config, kind=kind), stack, materials)
    return [((b.box[2], b.box[3], b.box[4], b.box[5]), b.net, b.material)
            for b in bricks if b.role != "short_strap"]


def generate_dummies(region, pitch, fill_fraction, level, material, stack, thickness=None, prefix="dummy"):
    """Regular grid of floating dummy squares at the requested areal density.

    ``region`` is (x0, x1, y0, y1); the z extent comes from ``level``.
    Edge length is pitch * sqrt(fill_fraction), centred in each pitch cell.
    """
    x0, x1, y0, y1 = (float(v) for v in region)
    if not pitch > 0:
        raise ValidationError("dummy pitch must be > 0")
    if not 0.0 <= fill_fraction <= 1.0:
        raise ValidationError("fill_fraction must lie in [0, 1]")
    if fill_fraction == 0:
        return []
    nx = int(math.floor((x1 - x0) / pitch * (1 + 1e-12)))
    ny = int(math.floor((y1 - y0) / pitch * (1 + 1e-12)))
    if nx < 1 or ny < 1:
        raise EmptyRegion(f"region {region} holds no {pitch:g} m pitch cell")
    layer = _layer(stack, level)
    t = thickness if thickness is not None else layer.thickness
    if t > layer.thickness * (1 + 1e-9):
        raise ConfigDoesNotFitLayer(f"dummy thickness exceeds layer {layer.name!r}", layer.name)
    edge = pitch * math.sqrt(fill_fraction)
    out = []
    for i in range(nx):
        cx = x0 + (i + 0.5) * pitch
        for j in range(ny):
            cy = y0 + (j + 0.5) * pitch
            box = (cx - 0.5 * edge, cx + 0.5 * edge, cy - 0.5 * edge, cy + 0.5 * edge,
                   layer.z_min, layer.z_min + t)
            out.append(ConductorBrick(f"{prefix}.{i}.{j}", box, material, FLOATING, "dummy"))
    return out


def drop_colliding(candidates, fixed, clearance=0.0):
    """Candidates that neither overlap nor come within ``clearance`` of any fixed brick."""
    keep = []
    for c in candidates:
        grown = tuple(v + (clearance if k % 2 else -clearance) for k, v in enumerate(c.box))
        if not any(boxes_overlap(grown, f.box) for f in fixed):
            keep.append(c)
    return keep


def conductivity_at_temperature(material, temperature):
    """Conductivity at ``temperature`` [K].

    Anchored at sigma_300 (T >= 300 K) and sigma_300 * rrr (T <= 4 K),
    log-linear in between.
    """
    if not material.is_conductor:
        raise NotAConductor(f"{material.name!r} is not a conductor", material.name)
    s300 = material.conductivity_300K
    if temperature >= T_ROOM:
        return s300
    if temperature <= T_CRYO:
        return s300 * material.rrr
    frac = (T_ROOM - temperature) / (T_ROOM - T_CRYO)
    return float(np.exp(np.log(s300) + frac * np.log(material.rrr)))


def effective_permittivity(stack, z_top, z_bottom):
    """Thickness-weighted mean relative permittivity of the dielectrics between two heights."""
    lo, hi = min(z_top, z_bottom), max(z_top, z_bottom)
    if hi - lo <= GEOM_TOL:
        for layer in stack:
            if layer.z_min - GEOM_TOL <= lo <= layer.z_max + GEOM_TOL:
                return max(1.0, layer.ambient_dielectric.relative_permittivity)
        return 1.0
    acc = 0.0
    covered = 0.0
    for layer in stack:
        span = min(hi, layer.z_max) - max(lo, layer.z_min)
        if span > 0:
            acc += span * layer.ambient_dielectric.relative_permittivity
            covered += span
    if covered <= 0:
        return 1.0
    # uncovered height counts as vacuum
    return max(1.0, (acc + (hi - lo - covered)) / (hi - lo))


@dataclass(frozen=True)
class FieldSample:
    """Complex B [T] and E [V/m] phasors at one probe point; either may be None."""

    point: tuple
    B: tuple = None
    E: tuple = None
    label: str = ""

    def merged(self, other):
        return FieldSample(self.point, self.B if self.B is not None else other.B,
                           self.E if self.E is not None else other.E, self.label or other.label)
