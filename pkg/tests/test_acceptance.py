"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records one pass/fail line (printed in the terminal summary and
on stdout) before asserting, so a failing criterion is reported rather than
hidden.
"""

import filecmp
import math
import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from esrsim import cli, electroqs, fom, magnetoqs, netline, presets
from esrsim.scene import ConductorBrick, Layer, build_scene
from oracles import bar_mutual_quad, random_bar_pairs, random_panel_points, rect_potential_quad

MU0 = magnetoqs.MU0
SCENES = os.path.join(os.path.dirname(__file__), os.pardir, "scenes")


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _line_filament(a, b, w=1e-12):
    return magnetoqs.Filament(tuple(a), tuple(b), (w, w), 1e7, "wire")


# ---------------------------------------------------------------- 1

def test_c01_biot_savart_analytic():
    t0 = time.perf_counter()
    r = 100e-9
    I = 1e-3
    worst_wire = 0.0
    for ratio in (100, 300, 1000):
        L = ratio * r
        f = _line_filament((-L / 2, 0, 0), (L / 2, 0, 0))
        B = magnetoqs.b_field([[0, r, 0]], [f], [I])[0]
        worst_wire = max(worst_wire, abs(np.linalg.norm(B) / (MU0 * I / (2 * math.pi * r)) - 1))
    a = 1e-6
    corners = [(-a / 2, -a / 2, 0), (a / 2, -a / 2, 0), (a / 2, a / 2, 0), (-a / 2, a / 2, 0)]
    loop = [_line_filament(corners[k], corners[(k + 1) % 4]) for k in range(4)]
    B = magnetoqs.b_field([[0, 0, 0]], loop, [I] * 4)[0]
    exact = 2 * math.sqrt(2) * MU0 * I / (math.pi * a)
    loop_err = abs(np.linalg.norm(B) / exact - 1)
    dt = time.perf_counter() - t0
    ok = worst_wire < 0.01 and loop_err < 1e-3 and dt < 1.0
    record(1, ok, f"wire err {worst_wire:.2e} (<1e-2), loop err {loop_err:.2e} (<1e-3), {dt:.3f} s (<1 s)")


# ---------------------------------------------------------------- 2

def _plate_capacitance(side, d, edge, eps=3.9, t=50e-9):
    mats = presets.default_materials()
    cu = mats["Cu"]
    stack = (Layer("L", -2 * t, d + 4 * t, mats["SiO2"]),)
    top = ConductorBrick("top", (0, side, 0, side, d, d + t), cu, "a", "signal")
    bot = ConductorBrick("bot", (0, side, 0, side, -t, 0), cu, "b", "return")
    sc = build_scene(stack=stack, materials=mats, conductors=[top, bot], ports=[], probes=[], temperature=300)
    sysm = electroqs.assemble_panels(electroqs.discretize_panels(sc, edge), eps, sc.conductors)
    C, _ = electroqs.capacitance_matrix(sysm)
    return -C[0, 1] / (electroqs.EPS0 * eps * side * side / d)


def _maxwell_ok(C):
    off = C - np.diag(np.diag(C))
    return (np.all(np.diag(C) > 0) and np.all(off <= 1e-3 * np.max(np.diag(C)))
            and np.all(C.sum(axis=1) >= -1e-3 * np.max(np.diag(C)))
            and np.allclose(C, C.T, rtol=1e-3, atol=0))


def test_c02_parallel_plate_and_maxwell_structure():
    t0 = time.perf_counter()
    ratios = [_plate_capacitance(10e-6, 1e-6, e) for e in (2e-6, 1e-6, 0.5e-6)]
    steps = np.abs(np.diff(ratios))
    settling = steps[-1] < steps[0]
    # the criterion asks for convergence toward eps*A/d, not just a settling sequence
    toward = settling and abs(ratios[-1] - 1) < abs(ratios[0] - 1)
    within = abs(ratios[-1] - 1) <= 0.10

    signs = []
    settings = fom.SolverSettings(panel_fine=20e-9, panel_coarse=1e-6, panel_grading=0.2)
    for kind in ("CPS", "CPW", "CPW_TO_CPS"):
        for dummies in (False, True):
            dev = presets.esr_device(kind, "M1", dummies=dummies)
            focus = dev.scene.all_probe_points().mean(axis=0)
            pn = electroqs.discretize_panels(dev.scene, fom.graded_edge(focus, settings))
            C, _ = electroqs.capacitance_matrix(electroqs.assemble_panels(pn, 3.9, dev.scene.conductors))
            signs.append(_maxwell_ok(C))
    dt = time.perf_counter() - t0
    ok = within and toward and all(signs) and dt < 30
    record(2, ok, "C12/(eps A/d) at aspect 10 for edges 2/1/0.5 um = "
           + "/".join(f"{r:.4f}" for r in ratios)
           + f" (need within 0.10 of 1: {within}); sequence settles {settling} but toward 1 {toward}; "
           f"Maxwell signs on {len(signs)} presets {all(signs)}; {dt:.1f} s (<30 s)")


# ---------------------------------------------------------------- 3

def test_c03_oracle_equivalence():
    worst_l = 0.0
    for b1, b2 in random_bar_pairs(20, seed=7):
        def fil(b, name):
            c = ((b[0] + b[1]) / 2, (b[2] + b[3]) / 2)
            return magnetoqs.Filament((c[0], c[1], b[4]), (c[0], c[1], b[5]), (b[1] - b[0], b[3] - b[2]), 1e7, name)
        f1 = fil(b1, "a")
        f2 = f1 if b1 == b2 else fil(b2, "b")
        ref = bar_mutual_quad(b1, b2)
        worst_l = max(worst_l, abs(magnetoqs.partial_inductance(f1, f2) / ref - 1))
    worst_p = 0.0
    for (px, py, pz), a, b in random_panel_points(20, seed=11):
        # panel centred at the origin with normal z; collocation point p
        src = electroqs.Panel((0.0, 0.0, 0.0), 2, (a, b), "s", "n")
        if (px, py, pz) == (0.0, 0.0, 0.0):
            got = electroqs.potential_coefficient(src, src)
        else:
            c, n, e = electroqs._panel_arrays([src])
            got = electroqs._collocation(np.array([[px, py, pz]]), c, n, e)[0, 0] / (4 * math.pi * electroqs.EPS0)
        ref = rect_potential_quad((px, py, pz), a, b) / (a * b) / (4 * math.pi * electroqs.EPS0)
        worst_p = max(worst_p, abs(got / ref - 1))
    ok = worst_l < 1e-4 and worst_p < 1e-4
    record(3, ok, f"partial inductance worst {worst_l:.2e}, panel potential worst {worst_p:.2e} (both <1e-4, 20 pairs)")


# ---------------------------------------------------------------- 4-6

def test_c04_configuration_trend(config_study):
    t = config_study
    ratio = t.row("CPW").avg_B / t.row("CPS").avg_B
    be = {r.label: r.ratio_B_over_E for r in t.rows}
    best = max(be, key=be.get)
    ok = 0.375 <= ratio <= 0.625 and best == "CPW"
    record(4, ok, f"avg_B(CPW)/avg_B(CPS) = {ratio:.3f} (0.5 +- 25%), highest B/E: {best} "
           + ", ".join(f"{k} {v:.3e}" for k, v in be.items()))


def test_c05_stack_trend(stack_study):
    poly, m1 = stack_study.row("poly"), stack_study.row("M1")
    ok = m1.avg_B < poly.avg_B and m1.ratio_B_over_E < poly.ratio_B_over_E
    record(5, ok, f"avg_B poly {poly.avg_B:.3e} -> M1 {m1.avg_B:.3e}; "
           f"B/E poly {poly.ratio_B_over_E:.3e} -> M1 {m1.ratio_B_over_E:.3e}")


def test_c06_screening(fill_sweep):
    e = fill_sweep
    red = 1 - e[0.5] / e[0.0]
    mono = e[0.0] > e[0.1] > e[0.3] > e[0.5]
    ok = red >= 0.40 and mono
    record(6, ok, f"avg_E bare/0.1/0.3/0.5 = " + "/".join(f"{e[k]:.1f}" for k in (0.0, 0.1, 0.3, 0.5))
           + f" V/m, reduction at 0.5 = {red:.1%} (>=40%), monotone {mono}")


# ---------------------------------------------------------------- 7-9

@pytest.fixture(scope="module")
def antenna_network():
    dev = presets.esr_device("CPW_TO_CPS", "M1")
    f = np.geomspace(0.1e9, 10e9, 21)
    return dev, netline.frequency_sweep(dev.scene, dev.line, f, 4.0, dev.access)


def test_c07_deembedding_fraction(antenna_network):
    dev, net = antenna_network
    sigma = dev.scene.materials["M1"].conductivity_300K * dev.scene.materials["M1"].rrr
    frac = []
    for p in net.points:
        total = p.total_abcd()
        ant = netline.de_embed(total, p.access_abcd())
        frac.append(netline.shorted_input(ant).real / netline.shorted_input(total).real)
    frac = np.array(frac)
    ok = np.all(frac > 0.6) and abs(sigma - 3e7) < 1
    record(7, ok, f"antenna sigma {sigma:.3g} S/m, access {dev.access.length * 1e3:g} mm CPW; "
           f"R_antenna/R_total min {frac.min():.3f} max {frac.max():.3f} over 0.1-10 GHz (>0.6)")


def test_c08_quasi_static_flatness(antenna_network):
    _, net = antenna_network
    r = net.antenna_zin.real
    var = r.max() / r.min() - 1
    record(8, var < 0.30, f"Re(Zin) antenna {r.min():.3f}..{r.max():.3f} ohm, variation {var:.2e} (<0.30)")


def test_c09_cryo_s11(cryo_sweeps):
    f, cold, warm = cryo_sweeps
    sc, sw = np.abs(cold.s11), np.abs(warm.s11)
    ok = len(f) == 101 and np.all(sc <= sw)
    record(9, ok, f"101 points 0.1-20 GHz: |S11| 4 K {sc.min():.3f}..{sc.max():.3f}, "
           f"300 K {sw.min():.3f}..{sw.max():.3f}, worst margin {np.min(sw - sc):.3e}")


# ---------------------------------------------------------------- 10

def test_c10_energy_balance(cps_result):
    _, res = cps_result
    dev2 = presets.esr_device("CPW_TO_CPS", "M1", access=False)
    res2 = fom.run_device(dev2.scene, dev2.line, 10e9, -7.0, None)
    errs = []
    for r in (res, res2):
        errs.append(abs(r.extras["loss_filaments"] / r.excitation.accepted_power - 1))
    ok = max(errs) < 0.05 and abs(res.excitation.available_power - 1.9953e-4) < 1e-8
    record(10, ok, "filament loss / accepted power - 1 at -7 dBm: CPS "
           f"{errs[0]:.2e}, CPW_TO_CPS {errs[1]:.2e} (<5e-2)")


# ---------------------------------------------------------------- 11

def _run_twice(tmp_path, argv):
    dirs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(argv + ["--out", str(out)]) == 0
        dirs.append(out)
    names = sorted(os.listdir(dirs[0]))
    same = names == sorted(os.listdir(dirs[1])) and all(
        filecmp.cmp(dirs[0] / n, dirs[1] / n, shallow=False) for n in names)
    return same, names


def test_c11_determinism(tmp_path):
    scene = os.path.join(SCENES, "cps_m1_bare.json")
    checks = {
        "solve": ["solve", "--scene", scene, "--map", "6:5"],
        "sweep": ["sweep", "--scene", scene, "--freq", "100MHz:20GHz:11"],
        "deembed": ["deembed", "--scene", scene, "--freq", "100MHz:10GHz:5"],
        "compare": ["compare", "--study", "config", "--scene", scene, "--drive", "current"],
    }
    results = {}
    for name, argv in checks.items():
        results[name] = _run_twice(tmp_path / name, argv)
    ok = all(v[0] for v in results.values())
    record(11, ok, "byte-identical artifacts: " + ", ".join(
        f"{k} {'yes' if v[0] else 'NO'} ({len(v[1])} files)" for k, v in results.items()))
