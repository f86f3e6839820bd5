"""esrsim command line: validate, solve, sweep, compare, deembed.

Every failure prints one JSON line on stderr and exits with the code of
its error family (2 parse/validation, 3 solver, 4 I/O).
"""

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import fom, netline, scenefile, touchstone
from .errors import EsrSimError, IoError, ValidationError
from .units import parse_frequency

FMT = "%.9e"


# ---------------------------------------------------------------- writers

def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}", str(path)) from None


def _csv(header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else FMT % v for v in r))
    return "\n".join(lines) + "\n"


def emit_field_map(samples, path):
    """CSV of B and E phasors, one row per sample in input order."""
    if not samples:
        raise ValidationError("no field samples to write", str(path))
    if any(s.B is None or s.E is None for s in samples):
        raise ValidationError("field samples need both B and E", str(path))
    _write(path, _csv(fom.FIELD_COLUMNS, fom.fields_table(samples)))


def _num(x):
    if isinstance(x, complex):
        return [_num(x.real), _num(x.imag)]
    if isinstance(x, float):
        return float(FMT % x) if math.isfinite(x) else repr(x)
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    return x


def _json(doc):
    return json.dumps(_num(doc), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- argument helpers

def _frequency(text):
    try:
        return float(text)
    except ValueError:
        return parse_frequency(text)


def parse_freq_spec(text):
    """'10GHz' -> [1e10]; '100MHz:20GHz:101' -> linspace."""
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([_frequency(parts[0])])
    if len(parts) != 3:
        raise ValidationError(f"frequency spec {text!r} is not value or start:stop:count", "--freq")
    start, stop = _frequency(parts[0]), _frequency(parts[1])
    try:
        count = int(parts[2])
    except ValueError:
        raise ValidationError(f"bad point count {parts[2]!r}", "--freq") from None
    if count < 1 or not 0 < start <= stop or (count > 1 and start == stop):
        raise ValidationError(f"invalid sweep {text!r}", "--freq")
    return np.linspace(start, stop, count)


def _pin(text):
    v = float(text)
    if math.isnan(v) or v == math.inf:
        raise argparse.ArgumentTypeError(f"invalid power {text!r}")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}", "arguments")


def build_parser():
    p = _Parser(prog="esrsim", description="Quasi-static B/E evaluation of ESR control lines.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out=True):
        sp.add_argument("--scene", required=True, help="JSON scene file")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--temp", type=float, help="temperature [K], overrides the scene")
        sp.add_argument("--pin", type=_pin, help="available input power [dBm] (-inf for zero drive)")
        sp.add_argument("--freq", help="frequency, or start:stop:count for sweeps (Hz or with unit)")
        sp.add_argument("--plot", action="store_true", help="also write PNG figures")

    common(sub.add_parser("validate", help="parse and validate a scene"), out=False)
    sp = sub.add_parser("solve", help="fields and figures of merit at one frequency")
    common(sp)
    sp.add_argument("--drive", choices=("power", "current"))
    sp.add_argument("--map", metavar="NY:NZ", help="also sample a y-z slice through the last probe")
    common(sub.add_parser("sweep", help="S11 and input resistance over frequency"))
    sp = sub.add_parser("compare", help="configuration, stack or environment study")
    common(sp)
    sp.add_argument("--study", required=True, choices=("config", "stack", "env"))
    sp.add_argument("--drive", choices=("power", "current"))
    sp.add_argument("--levels", default="poly,M1", help="comma-separated levels for the stack study")
    common(sub.add_parser("deembed", help="antenna-only S11 and resistance fraction"))
    return p


# ---------------------------------------------------------------- studies

def _load(args):
    doc = scenefile.load(args.scene)
    s = doc.settings
    if args.temp is not None:
        if not args.temp > 0:
            raise ValidationError("temperature must be > 0", "--temp")
        s = replace(s, temperature=args.temp)
    if args.pin is not None:
        s = replace(s, pin_dbm=args.pin)
    if getattr(args, "drive", None):
        s = replace(s, drive=args.drive)
    return replace(doc, settings=s)


def _need_line(doc, what):
    if doc.line is None:
        raise ValidationError(f"{what} needs a 'line' section in the scene", "line")
    if not doc.scene.ports:
        raise ValidationError(f"{what} needs a port", "ports")


def _sweep_freqs(args, doc):
    return parse_freq_spec(args.freq) if args.freq else doc.settings.frequencies()


def _single_freq(args, doc):
    if not args.freq:
        return doc.settings.frequency
    f = parse_freq_spec(args.freq)
    if len(f) != 1:
        raise ValidationError("solve takes a single frequency", "--freq")
    return float(f[0])


def _outdir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {path}: {exc.strerror}", str(path)) from None
    return path


def _study_kwargs(doc):
    s = doc.settings
    return dict(input_power=s.pin_dbm, frequency=s.frequency, access=doc.access, drive=s.drive,
                terminal_current=s.terminal_current, settings=s.solver)


def _slice_points(scene, spec):
    """Grid in the y-z plane through the last probe, points inside conductors dropped."""
    try:
        ny, nz = (int(v) for v in spec.split(":"))
    except ValueError:
        raise ValidationError(f"map spec {spec!r} is not NY:NZ", "--map") from None
    if ny < 2 or nz < 2:
        raise ValidationError("map needs at least 2x2 points", "--map")
    probe = scene.all_probe_points()[-1]
    zmax = max(b.hi[2] for b in scene.conductors) + 100e-9
    ys = np.linspace(probe[1] - 1e-6, probe[1] + 1e-6, ny)
    zs = np.linspace(scene.stack[0].z_min + 1e-9, zmax, nz)
    boxes = np.array([b.box for b in scene.conductors])
    keep = np.zeros((ny, nz), dtype=bool)
    pts = []
    for i, y in enumerate(ys):
        for j, z in enumerate(zs):
            p = np.array([probe[0], y, z])
            inside = np.any(np.all((p >= boxes[:, 0::2] - 1e-12) & (p <= boxes[:, 1::2] + 1e-12), axis=1))
            if not inside:
                keep[i, j] = True
                pts.append(p)
    return ys, zs, keep, np.array(pts)


def cmd_validate(args):
    doc = _load(args)
    sc = doc.scene
    info = {"status": "ok", "conductors": len(sc.conductors), "ports": len(sc.ports),
            "probe_points": int(sum(len(p.points) for p in sc.probes)),
            "nets": sorted({b.net for b in sc.conductors})}
    sys.stdout.write(json.dumps(info, sort_keys=True) + "\n")
    return 0


def cmd_solve(args):
    doc = _load(args)
    _need_line(doc, "solve")
    s = doc.settings
    f = _single_freq(args, doc)
    out = _outdir(args.out)
    res = fom.run_device(doc.scene, doc.line, f, s.pin_dbm, doc.access, s.drive, s.terminal_current, s.solver,
                         label=doc.line.kind, temperature=s.temperature)
    samples = fom.merged_samples(res)
    emit_field_map(samples, os.path.join(out, "fields.csv"))
    rep = res.report.as_dict()
    exc = res.excitation
    rep.update(frequency=f, temperature=s.temperature, input_power_dBm=s.pin_dbm, drive=s.drive,
               zin=complex(exc.zin), available_power=exc.available_power, accepted_power=exc.accepted_power,
               short_current=res.state.short_current, eps_eff=res.eps_eff,
               n_filaments=res.extras["n_filaments"], n_panels=res.extras["n_panels"])
    _write(os.path.join(out, "report.json"), _json(rep))
    _write(os.path.join(out, "report.txt"), fom.ComparisonTable([res.report], res.report.label, "solve").to_text())
    if args.map:
        ys, zs, keep, pts = _slice_points(doc.scene, args.map)
        m = fom.field_samples(res, pts, "map")
        emit_field_map(m, os.path.join(out, "field_map.csv"))
        if args.plot:
            from . import plots

            babs = np.full(keep.shape, np.nan)
            babs[keep] = [np.sqrt(np.sum(np.abs(np.asarray(v.B)) ** 2)) for v in m]
            x = pts[0, 0]
            boxes = [(b.box[2], b.box[3], b.box[4], b.box[5]) for b in doc.scene.conductors
                     if b.box[0] <= x <= b.box[1]]
            plots.plot_map(os.path.join(out, "field_map_B.png"), ys, zs, babs, "|B| [T]", boxes)
    if args.plot:
        from . import plots

        plots.plot_probes(os.path.join(out, "probes.png"), samples)
    return 0


def _resistance_rows(net):
    zin = net.zin
    s = net.s11
    za = net.antenna_zin
    rows = []
    for f, z, g, a in zip(net.frequencies, zin, s, za):
        rows.append((f, z.real, z.imag, a.real, a.imag, abs(g), 20 * math.log10(max(abs(g), 1e-300))))
    return rows


def cmd_sweep(args):
    doc = _load(args)
    _need_line(doc, "sweep")
    s = doc.settings
    freqs = _sweep_freqs(args, doc)
    out = _outdir(args.out)
    zref = doc.scene.ports[0].reference_impedance
    net = netline.frequency_sweep(doc.scene, doc.line, freqs, s.temperature, doc.access, zref,
                                  s.solver.rlgc_subdivision)
    comments = [f"esrsim sweep {doc.line.kind} at {doc.line.level}", f"temperature {s.temperature:g} K"]
    touchstone.write_touchstone(os.path.join(out, "sweep.s1p"), freqs, net.s11, zref, comments)
    head = ("frequency_Hz", "re_Zin", "im_Zin", "re_Zant", "im_Zant", "abs_S11", "S11_dB")
    _write(os.path.join(out, "resistance.csv"), _csv(head, _resistance_rows(net)))
    if args.plot:
        from . import plots

        plots.plot_sweep(os.path.join(out, "sweep.png"), freqs, net.zin, net.s11, f"{s.temperature:g} K")
    return 0


def cmd_deembed(args):
    doc = _load(args)
    _need_line(doc, "deembed")
    if doc.access is None:
        raise ValidationError("de-embedding needs an 'access' section", "access")
    s = doc.settings
    freqs = _sweep_freqs(args, doc)
    out = _outdir(args.out)
    zref = doc.scene.ports[0].reference_impedance
    net = netline.frequency_sweep(doc.scene, doc.line, freqs, s.temperature, doc.access, zref,
                                  s.solver.rlgc_subdivision)
    ant = []
    rows = []
    for f, p in zip(freqs, net.points):
        total = p.total_abcd()
        za = netline.shorted_input(netline.de_embed(total, p.access_abcd()))
        zt = netline.shorted_input(total)
        ant.append(netline.s11(za, zref))
        rows.append((f, zt.real, za.real, za.real / zt.real if zt.real != 0 else math.nan))
    comments = [f"esrsim de-embedded antenna {doc.line.kind} at {doc.line.level}",
                f"temperature {s.temperature:g} K"]
    touchstone.write_touchstone(os.path.join(out, "antenna.s1p"), freqs, np.array(ant), zref, comments)
    _write(os.path.join(out, "resistance_fraction.csv"),
           _csv(("frequency_Hz", "R_total", "R_antenna", "fraction"), rows))
    if args.plot:
        from . import plots

        r = np.array(rows)
        plots.plot_fraction(os.path.join(out, "resistance_fraction.png"), r[:, 0], r[:, 1], r[:, 2])
    return 0


def _kinds_for(line):
    out = []
    for k in ("CPS", "CPW", "CPW_TO_CPS"):
        cpw = (line.cpw_length or 0.5 * line.length) if k == "CPW_TO_CPS" else None
        out.append(replace(line, kind=k, cpw_length=cpw))
    return out


def cmd_compare(args):
    doc = _load(args)
    _need_line(doc, "compare")
    kw = _study_kwargs(doc)
    if args.freq:
        kw["frequency"] = _single_freq(args, doc)
    scene = doc.scene
    if args.temp is not None:
        scene = replace(scene, temperature=doc.settings.temperature)
    if args.study == "config":
        table = fom.compare_configurations(scene, _kinds_for(doc.line), **kw)
    elif args.study == "stack":
        levels = [v.strip() for v in args.levels.split(",") if v.strip()]
        names = {l.name for l in scene.stack}
        for lv in levels:
            if lv not in names:
                raise ValidationError(f"unknown level {lv!r}", lv)
        if len(levels) < 2:
            raise ValidationError("stack study needs at least two levels", "--levels")
        table = fom.compare_stacks(scene, doc.line, levels, **kw)
    else:
        table = fom.compare_environment(scene, doc.line, **kw)
    out = _outdir(args.out)
    base = os.path.join(out, f"compare_{args.study}")
    _write(base + ".csv", _table_csv(table))
    _write(base + ".txt", table.to_text())
    _write(base + ".json", table.to_json())
    if args.plot:
        from . import plots

        plots.plot_comparison(base + ".png", table)
    return 0


def _table_csv(table):
    cols = fom.COLUMNS
    head = ["label"] + list(cols) + [f"{c}_norm" for c in cols]
    rows = []
    for r, n in zip(table.rows, table.normalized()):
        rows.append([r.label] + [float(getattr(r, c)) for c in cols] + [float(n[c]) for c in cols])
    return _csv(head, rows)


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "sweep": cmd_sweep, "compare": cmd_compare,
            "deembed": cmd_deembed}


def _fail(err, code):
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except EsrSimError as exc:
        return _fail(exc.to_dict(), exc.exit_code)
    except OSError as exc:
        return _fail({"error": "IoError", "message": str(exc)}, 4)
    except (ValueError, KeyError) as exc:
        return _fail({"error": type(exc).__name__, "message": str(exc)}, 2)
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail({"error": "SolverError", "message": str(exc)}, 3)


__all__ = ["main", "build_parser", "emit_field_map", "parse_freq_spec"]
