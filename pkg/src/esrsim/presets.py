"""Representative 28nm-FDSOI-like stack, material catalog and device presets.

Geometry numbers here are illustrative defaults, not process data: the
only measured anchor is the 4 K nano-antenna conductivity of 3e7 S/m in
M1 (300 K value 1e7 S/m with RRR 3).
"""

from dataclasses import dataclass, replace

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

NM = 1e-9
UM = 1e-6

SIO2 = Material("SiO2", relative_permittivity=3.9)
SI = Material("Si", relative_permittivity=11.7)


def default_materials():
    mats = [
        SIO2,
        SI,
        Material("M1", conductivity_300K=1.0e7, rrr=3.0, is_conductor=True),
        Material("M2", conductivity_300K=1.5e7, rrr=3.0, is_conductor=True),
        Material("AP", conductivity_300K=3.5e7, rrr=3.0, is_conductor=True),
        # silicided poly / metal gate stack
        Material("poly", conductivity_300K=1.0e6, rrr=1.2, is_conductor=True),
        Material("Cu", conductivity_300K=5.8e7, rrr=1.0, is_conductor=True),
    ]
    return {m.name: m for m in mats}


def default_stack(materials=None):
    """Layers from the silicon film (QDs) up to the thick top metal."""
    m = materials or default_materials()
    rows = [
        ("active", 0, 10, "Si"),
        ("gate_ox", 10, 5, "SiO2"),
        ("poly", 15, 50, "SiO2"),
        ("ild0", 65, 100, "SiO2"),
        ("M1", 165, 100, "SiO2"),
        ("via1", 265, 100, "SiO2"),
        ("M2", 365, 100, "SiO2"),
        ("ild2", 465, 535, "SiO2"),
        ("AP", 1000, 2000, "SiO2"),
    ]
    return tuple(Layer(name, z * NM, t * NM, m[d]) for name, z, t, d in rows)


# QD plane: centre of the silicon film
QD_Z = 5 * NM


def antenna_line(kind="CPW_TO_CPS", level="M1", length=20 * UM, **kw):
    """Nano-antenna preset: 200 nm strips, 200 nm gap, M1 material."""
    params = dict(
        kind=kind,
        signal_width=200 * NM,
        gap=200 * NM,
        ground_width=200 * NM,
        length=length,
        level=level,
        material="M1",
        thickness=100 * NM if level in ("M1", "M2") else None,
        strap_length=300 * NM,
        cpw_length=length / 2 if kind == "CPW_TO_CPS" else None,
    )
    params.update(kw)
    return LineConfig(**params)


def access_line(length=1.0e-3):
    """Millimetre CPW access line in the thick top metal (network only)."""
    return LineConfig(
        kind="CPW",
        signal_width=10 * UM,
        gap=6 * UM,
        ground_width=30 * UM,
        length=length,
        level="AP",
        material="AP",
        thickness=1 * UM,
    )


def qd_site(line):
    """QD pair centre: under the short strap, above the first return strip."""
    return line.length + 0.5 * line.strap, 0.5 * line.gap + 0.5 * line.ground_width


def qd_probes(line, offsets=(-60 * NM, 60 * NM), y=None, z=QD_Z):
    """Two QDs 120 nm apart along the line axis at the QD site."""
    xc, yc = qd_site(line)
    y = yc if y is None else y
    return (
        ProbeSet(((xc + offsets[0], y, z),), "QD1"),
        ProbeSet(((xc + offsets[1], y, z),), "QD2"),
    )


def line_port():
    return Port("P1", "sig", "gnd", 50.0, ("x", 0.0))


def dummy_grid(line, stack, materials, fill_fraction=0.5, pitch=120 * NM, level="poly",
               span=(1.6 * UM, 1.6 * UM), center=None):
    """Floating poly dummies around the QD site, aligned so a cell sits above
    each QD (QD spacing equals the default pitch)."""
    if center is None:
        xc, yc = qd_site(line)
        xc -= 0.5 * pitch
    else:
        xc, yc = center
    nx = int(round(span[0] / pitch))
    ny = int(round(span[1] / pitch))
    # odd counts keep a cell centred on (xc, yc)
    nx += 1 - nx % 2
    ny += 1 - ny % 2
    region = (xc - 0.5 * nx * pitch, xc + 0.5 * nx * pitch, yc - 0.5 * ny * pitch, yc + 0.5 * ny * pitch)
    return generate_dummies(region, pitch, fill_fraction, level, materials["poly"], stack)


def interconnect(line, stack, materials, level="poly", width=60 * NM):
    """Face-to-face exchange-gate interconnect: a long floating poly run under
    the signal strip, turning into a finger that ends between the two QDs."""
    layer = next(l for l in stack if l.name == level)
    sig_y0 = -0.5 * line.gap - line.signal_width
    y0, y1 = sig_y0 + 0.5 * (line.signal_width - width), sig_y0 + 0.5 * (line.signal_width + width)
    xq, yq = qd_site(line)
    return [
        ConductorBrick("ic.run", (0.2 * line.length, xq + 0.5 * width, y0, y1, layer.z_min, layer.z_max),
                       materials["poly"], "xgate", "interconnect"),
        ConductorBrick("ic.finger", (xq - 0.5 * width, xq + 0.5 * width, y1, yq - 60 * NM, layer.z_min, layer.z_max),
                       materials["poly"], "xgate", "interconnect"),
    ]


@dataclass
class Device:
    """A scene plus the line description the network model needs."""

    scene: object
    line: LineConfig
    access: LineConfig = None


def esr_device(kind="CPW_TO_CPS", level="M1", dummies=False, interconnects=False, fill_fraction=0.5,
               temperature=4.0, access=True, line=None, materials=None, stack=None, probes=None):
    materials = materials or default_materials()
    stack = stack or default_stack(materials)
    line = line or antenna_line(kind, level)
    bricks = generate_line(line, stack, materials)
    extra = []
    if interconnects:
        extra += drop_colliding(interconnect(line, stack, materials), bricks)
    if dummies and fill_fraction > 0:
        extra += drop_colliding(dummy_grid(line, stack, materials, fill_fraction), bricks + extra,
                                clearance=10 * NM)
    scene = build_scene(
        stack=stack,
        materials=materials,
        conductors=bricks + extra,
        ports=[line_port()],
        probes=probes or qd_probes(line),
        temperature=temperature,
    )
    return Device(scene, line, access_line() if access is True else (access or None))


def with_level(device, level):
    line = replace(device.line, level=level, thickness=None if level == "poly" else device.line.thickness)
    return line
