"""Electroquasistatic panel solver (collocation method of moments).

Brick surfaces are tiled with uniformly charged rectangles.  Driven nets
sit at prescribed (possibly position dependent) potentials; every other
net, and every FLOATING brick on its own, is an equipotential with zero
total charge.  Free-space kernel scaled by a single effective permittivity.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import CoincidentDistinctPanels, PointInsideConductor, SingularSystem
from .scene import FLOATING, GEOM_TOL, FieldSample

EPS0 = 8.854187817e-12

# pairs closer than this many panel edges use the exact rectangle integral
NEAR_EDGES = 6.0


@dataclass(frozen=True)
class Panel:
    center: tuple
    normal_axis: int
    extents: tuple
    parent_brick: str
    net: str

    @property
    def area(self):
        return self.extents[0] * self.extents[1]


@dataclass
class PanelSystem:
    panels: list
    P: np.ndarray
    effective_permittivity: float
    groups: list
    brick_boxes: np.ndarray = None

    @property
    def centers(self):
        return np.array([p.center for p in self.panels])


@dataclass
class ChargeSolution:
    charges: np.ndarray
    net_potentials: dict
    panels: list
    effective_permittivity: float
    brick_boxes: np.ndarray = None
    common_mode_scales: tuple = ()

    def net_charge(self, net):
        return complex(sum(q for q, p in zip(self.charges, self.panels) if group_key(p) == net))


def group_key(panel):
    """Electrical group of a panel: its net, or its own brick when FLOATING."""
    return f"{FLOATING}:{panel.parent_brick}" if panel.net == FLOATING else panel.net


# ---------------------------------------------------------------- meshing

def _graded_cuts(lo, hi, fixed, edge_at):
    """Cut [lo, hi] at ``fixed`` points, then refine each piece to the local edge."""
    pts = sorted({lo, hi, *[t for t in fixed if lo + GEOM_TOL < t < hi - GEOM_TOL]})
    out = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        if b - a <= 1e3 * GEOM_TOL:
            continue
        # march with the local edge, then spread evenly
        t = a
        n = 0
        while t < b - 1e-9 * (b - a):
            t += max(edge_at(t), (b - a) * 1e-6)
            n += 1
        n = max(n, 1)
        out.extend(list(np.linspace(a, b, n + 1)[1:]))
    return np.array(out)


def discretize_panels(scene, max_panel_edge, bricks=None):
    """Tile every exposed brick face (floating ones included) with panels.

    ``max_panel_edge`` is a length or a callable ``f(point) -> length`` for
    graded meshes.  Face areas covered by a touching brick are skipped.
    """
    edge_fn = max_panel_edge if callable(max_panel_edge) else (lambda p, e=float(max_panel_edge): e)
    if not callable(max_panel_edge) and not max_panel_edge > 0:
        raise ValueError("max_panel_edge must be > 0")
    bricks = list(scene.conductors if bricks is None else bricks)
    ids = {b.id for b in bricks}
    covers = {b.id: [] for b in bricks}
    for a_id, b_id, k, plo, phi in scene.contacts:
        if a_id in ids and b_id in ids:
            covers[a_id].append((k, np.asarray(plo), np.asarray(phi)))
            covers[b_id].append((k, np.asarray(plo), np.asarray(phi)))
    panels = []
    for b in bricks:
        lo, hi = b.lo, b.hi
        for n in range(3):
            t1, t2 = (n + 1) % 3, (n + 2) % 3
            for side, coord in ((-1, lo[n]), (1, hi[n])):
                face_cov = [(plo, phi) for k, plo, phi in covers[b.id] if k == n and abs(plo[n] - coord) <= 1e3 * GEOM_TOL]
                fixed1 = [v for plo, phi in face_cov for v in (plo[t1], phi[t1])]
                fixed2 = [v for plo, phi in face_cov for v in (plo[t2], phi[t2])]
                base = np.empty(3)
                base[n] = coord
                base[t2] = 0.5 * (lo[t2] + hi[t2])

                def e1(t):
                    p = base.copy()
                    p[t1] = t
                    return edge_fn(p)

                base1 = base.copy()
                base1[t1] = 0.5 * (lo[t1] + hi[t1])

                def e2(t):
                    p = base1.copy()
                    p[t2] = t
                    return edge_fn(p)

                c1 = _graded_cuts(lo[t1], hi[t1], fixed1, e1)
                c2 = _graded_cuts(lo[t2], hi[t2], fixed2, e2)
                for i in range(len(c1) - 1):
                    for j in range(len(c2) - 1):
                        c = np.empty(3)
                        c[n] = coord
                        c[t1] = 0.5 * (c1[i] + c1[i + 1])
                        c[t2] = 0.5 * (c2[j] + c2[j + 1])
                        if any(np.all(c[[t1, t2]] > plo[[t1, t2]]) and np.all(c[[t1, t2]] < phi[[t1, t2]])
                               for plo, phi in face_cov):
                            continue
                        panels.append(Panel(tuple(c), n, (c1[i + 1] - c1[i], c2[j + 1] - c2[j]), b.id, b.net))
    return panels


# ---------------------------------------------------------------- kernels

def _local(points, centers, normals):
    """Offsets of points from panel centres in each panel's (t1, t2, n) frame."""
    d = points - centers
    t1 = (normals + 1) % 3
    t2 = (normals + 2) % 3
    idx = np.arange(len(normals))
    return d[..., idx, t1] if d.ndim == 3 else d[idx, t1], d[..., idx, t2] if d.ndim == 3 else d[idx, t2], \
        d[..., idx, normals] if d.ndim == 3 else d[idx, normals]


def _rect_integral(px, py, pz, a, b):
    """Integral of 1/R over a rectangle [-a/2,a/2]x[-b/2,b/2] (z=0) seen from (px,py,pz)."""
    w = pz
    total = 0.0
    for su, xe in ((1.0, 0.5 * a), (-1.0, -0.5 * a)):
        u = xe - px
        for sv, ye in ((1.0, 0.5 * b), (-1.0, -0.5 * b)):
            v = ye - py
            R = np.sqrt(u * u + v * v + w * w)
            ruw = np.sqrt(u * u + w * w)
            rvw = np.sqrt(v * v + w * w)
            with np.errstate(divide="ignore", invalid="ignore"):
                t_a = np.where(ruw > 0, u * np.arcsinh(v / np.where(ruw > 0, ruw, 1.0)), 0.0)
                t_b = np.where(rvw > 0, v * np.arcsinh(u / np.where(rvw > 0, rvw, 1.0)), 0.0)
                den = w * R
                t_c = np.where(den != 0, w * np.arctan(u * v / np.where(den != 0, den, 1.0)), 0.0)
            total = total + su * sv * (t_a + t_b - t_c)
    return total


def _rect_field(px, py, pz, a, b):
    """-grad of the 1/R rectangle integral: local (Ex, Ey, Ez) per unit density."""
    w = pz
    ex = ey = ez = 0.0
    for su, xe in ((1.0, 0.5 * a), (-1.0, -0.5 * a)):
        u = xe - px
        for sv, ye in ((1.0, 0.5 * b), (-1.0, -0.5 * b)):
            v = ye - py
            s = su * sv
            R = np.sqrt(u * u + v * v + w * w)
            ruw = np.maximum(np.sqrt(u * u + w * w), 1e-30)
            rvw = np.maximum(np.sqrt(v * v + w * w), 1e-30)
            with np.errstate(divide="ignore", invalid="ignore"):
                den = w * R
                at = np.where(den != 0, np.arctan(u * v / np.where(den != 0, den, 1.0)), 0.0)
            ex = ex + s * np.arcsinh(v / ruw)
            ey = ey + s * np.arcsinh(u / rvw)
            ez = ez + s * at
    return ex, ey, ez


def _collocation(targets, panels_c, normals, ext):
    """Mean of 1/r over each source panel seen from each target point: (T, S)."""
    r2 = np.zeros((len(targets), len(panels_c)))
    for k in range(3):
        r2 += np.subtract.outer(targets[:, k], panels_c[:, k]) ** 2
    size = np.max(ext, axis=1)
    near = r2 < (NEAR_EDGES * size[None, :]) ** 2
    with np.errstate(divide="ignore"):
        out = 1.0 / np.sqrt(r2)
    ti, sj = np.nonzero(near)
    if len(ti):
        n = normals[sj]
        k = np.arange(len(ti))
        dd = targets[ti] - panels_c[sj]
        val = _rect_integral(dd[k, (n + 1) % 3], dd[k, (n + 2) % 3], dd[k, n], ext[sj, 0], ext[sj, 1])
        out[ti, sj] = val / (ext[sj, 0] * ext[sj, 1])
    return out


def _panel_arrays(panels):
    c = np.array([p.center for p in panels], dtype=float)
    n = np.array([p.normal_axis for p in panels], dtype=int)
    e = np.array([p.extents for p in panels], dtype=float)
    return c, n, e


def potential_coefficient(p_i, p_j, eps_eff=1.0):
    """P_ij [V/C]: symmetrised centre-collocated mean of 1/(4 pi eps r)."""
    if p_i is not p_j and p_i != p_j and p_i.normal_axis == p_j.normal_axis and np.allclose(
            p_i.center, p_j.center, atol=GEOM_TOL, rtol=0):
        raise CoincidentDistinctPanels("distinct panels share a centre")
    c, n, e = _panel_arrays([p_i, p_j])
    m = _collocation(c, c, n, e)
    k = 1.0 / (4 * math.pi * EPS0 * eps_eff)
    if p_i is p_j or p_i == p_j:
        return k * m[0, 0]
    return k * 0.5 * (m[0, 1] + m[1, 0])


def assemble_panels(panels, eps_eff=1.0, bricks=None):
    """Dense symmetric potential-coefficient matrix and floating/driven grouping."""
    if eps_eff < 1:
        raise ValueError("effective permittivity must be >= 1")
    c, n, e = _panel_arrays(panels)
    N = len(panels)
    key = np.column_stack([np.round(c / 1e-12), n])
    if len(np.unique(key, axis=0)) < N:
        raise CoincidentDistinctPanels("distinct panels share a centre")
    M = np.empty((N, N))
    chunk = max(1, 4_000_000 // max(N, 1))
    for s in range(0, N, chunk):
        M[s:s + chunk] = _collocation(c[s:s + chunk], c, n, e)
    P = 0.5 * (M + M.T) / (4 * math.pi * EPS0 * eps_eff)
    groups = sorted({group_key(p) for p in panels})
    boxes = None if bricks is None else np.array([b.box for b in bricks], dtype=float)
    return PanelSystem(list(panels), P, float(eps_eff), groups, boxes)


# ---------------------------------------------------------------- solve

def _factor(P):
    try:
        return linalg.cho_factor(P, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularSystem(f"potential matrix is not positive definite: {exc}") from None


def solve_charges(system, net_potentials, factor=None, common_mode=None):
    """Panel charges for prescribed potentials on driven nets.

    ``net_potentials`` maps net -> scalar or callable(centers) -> array.
    Unlisted nets (and FLOATING bricks) float with zero net charge.

    ``common_mode`` adds ``k * w(c)`` to every driven panel, with ``k``
    solved so the driven charge sums to zero: only potential differences
    between driven nets are imposed.  It is a scalar, a callable over
    centres, or a list of ``(w, support)`` callables, one unknown per entry,
    each balancing the driven charge on panels where ``support(c)`` holds.
    """
    if not net_potentials:
        raise SingularSystem("at least one driven net is required")
    panels = system.panels
    keys = [group_key(p) for p in panels]
    centers = system.centers
    v = np.zeros(len(panels), dtype=complex)
    driven = set()
    dmask = np.zeros(len(panels), dtype=bool)
    for net, val in net_potentials.items():
        mask = np.array([k == net for k in keys])
        if not mask.any():
            continue
        driven.add(net)
        dmask |= mask
        v[mask] = val(centers[mask]) if callable(val) else val
    floating = [g for g in system.groups if g not in driven]
    cf = factor or _factor(system.P)
    q = linalg.cho_solve(cf, v)
    pots = {net: (None if callable(net_potentials[net]) else complex(net_potentials[net])) for net in driven}
    if common_mode is None:
        modes = []
    elif isinstance(common_mode, (list, tuple)):
        modes = list(common_mode)
    else:
        modes = [(common_mode, None)]
    dc = centers[dmask]
    # a mode with zero weight everywhere carries no unknown (scale 0)
    weights = []
    for w, support in modes:
        sel = np.ones(len(dc), dtype=bool) if support is None else np.asarray(support(dc), dtype=bool)
        wv = np.broadcast_to(np.asarray(w(dc) if callable(w) else w), (len(dc),))
        weights.append((sel, wv))
    active = [k for k, (sel, wv) in enumerate(weights) if np.any(wv[sel] != 0)]
    n_c = len(floating) + len(active)
    if n_c:
        # q = P^-1 (v + E u) with constraints F^T q = 0
        E = np.zeros((len(panels), n_c), dtype=complex if active else float)
        F = np.zeros((len(panels), n_c))
        fidx = {g: i for i, g in enumerate(floating)}
        for k, key in enumerate(keys):
            if key in fidx:
                E[k, fidx[key]] = F[k, fidx[key]] = 1.0
        for m, k in enumerate(active):
            col = len(floating) + m
            sel, wv = weights[k]
            E[np.flatnonzero(dmask)[sel], col] = wv[sel]
            F[np.flatnonzero(dmask)[sel], col] = 1.0
        PinvE = linalg.cho_solve(cf, E)
        S = F.T @ PinvE
        try:
            u = linalg.solve(S, -(F.T @ q))
        except (linalg.LinAlgError, ValueError) as exc:
            raise SingularSystem(f"constraint system is singular: {exc}") from None
        if not np.all(np.isfinite(u)):
            raise SingularSystem("constraint system is singular")
        q = q + PinvE @ u
        for g, val in zip(floating, u):
            pots[g] = complex(val)
        scales = [0j] * len(modes)
        for m, k in enumerate(active):
            scales[k] = complex(u[len(floating) + m])
        if len(modes) == 1 and not callable(modes[0][0]) and modes[0][1] is None:
            pots = {g: (val + scales[0] * modes[0][0] if g in driven and val is not None else val)
                    for g, val in pots.items()}
    else:
        scales = [0j] * len(modes)
    return ChargeSolution(q, pots, panels, system.effective_permittivity, system.brick_boxes, tuple(scales))


def capacitance_matrix(system, nets=None):
    """Maxwell capacitance matrix [F] over driven nets (others float)."""
    nets = list(nets) if nets is not None else [g for g in system.groups if not g.startswith(FLOATING)]
    if not nets:
        raise SingularSystem("no driven nets")
    cf = _factor(system.P)
    C = np.zeros((len(nets), len(nets)))
    for k, net in enumerate(nets):
        pots = {m: (1.0 if m == net else 0.0) for m in nets}
        sol = solve_charges(system, pots, factor=cf)
        for j, m in enumerate(nets):
            C[j, k] = sol.net_charge(m).real
    return C, nets


# ---------------------------------------------------------------- fields

def e_field_points(solution, points, check_inside=True):
    """Complex E [V/m] at points from the panel charges."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if check_inside and solution.brick_boxes is not None and len(solution.brick_boxes):
        bx = solution.brick_boxes
        inside = np.all((pts[:, None, :] >= bx[None, :, 0::2] - GEOM_TOL)
                        & (pts[:, None, :] <= bx[None, :, 1::2] + GEOM_TOL), axis=2)
        if inside.any():
            p = np.argwhere(inside)[0][0]
            raise PointInsideConductor(f"point {pts[p].tolist()} lies inside a conductor")
    c, n, e = _panel_arrays(solution.panels)
    q = np.asarray(solution.charges, dtype=complex)
    k = 1.0 / (4 * math.pi * EPS0 * solution.effective_permittivity)
    out = np.zeros((len(pts), 3), dtype=complex)
    size = np.max(e, axis=1)
    area = e[:, 0] * e[:, 1]
    for i, p in enumerate(pts):
        d = p[None, :] - c
        r = np.linalg.norm(d, axis=1)
        near = r < NEAR_EDGES * size
        far = ~near
        acc = np.zeros(3, dtype=complex)
        if far.any():
            acc += (q[far, None] * d[far] / r[far, None] ** 3).sum(axis=0)
        if near.any():
            idx = np.nonzero(near)[0]
            nn = n[idx]
            t1 = (nn + 1) % 3
            t2 = (nn + 2) % 3
            j = np.arange(len(idx))
            dd = d[idx]
            ex, ey, ez = _rect_field(dd[j, t1], dd[j, t2], dd[j, nn], e[idx, 0], e[idx, 1])
            g = np.zeros((len(idx), 3))
            g[j, t1] = ex
            g[j, t2] = ey
            g[j, nn] = ez
            acc += ((q[idx] / area[idx])[:, None] * g).sum(axis=0)
        out[i] = k * acc
    return out


def e_field(solution, panels, point):
    """E phasor [V/m] at a single point."""
    sol = solution if panels is None or panels is solution.panels else ChargeSolution(
        solution.charges, solution.net_potentials, panels, solution.effective_permittivity, solution.brick_boxes)
    return e_field_points(sol, np.asarray(point, dtype=float)[None])[0]


def e_field_at_probes(scene, solution, probes):
    pts = probes.as_array()
    E = e_field_points(solution, pts)
    return [FieldSample(tuple(p), None, tuple(ev), probes.label) for p, ev in zip(pts, E)]


# ---------------------------------------------------------------- per-unit-length capacitance

def _segment_log_integral(u, v, h):
    """Integral over t in [-h/2, h/2] of ln sqrt((u - t)^2 + v^2)."""
    def F(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(s != 0, s * 0.5 * np.log(np.where((s * s + v * v) > 0, s * s + v * v, 1.0)), 0.0)
            b = np.where(v != 0, v * np.arctan(s / np.where(v != 0, v, 1.0)), 0.0)
        return a - s + b
    return F(0.5 * h - u) - F(-0.5 * h - u)


def capacitance_per_length(section, eps_eff, max_edge=None):
    """Line capacitance per length [F/m] between net 'sig' and the other net of a cross-section.

    2-d collocation over the rectangle outlines with a free potential
    reference and zero total charge.
    """
    segs = []
    for (y0, y1, z0, z1), net, _mat in section:
        edge = max_edge or min(y1 - y0, z1 - z0) / 2
        for (ya, za, yb, zb) in ((y0, z0, y1, z0), (y1, z0, y1, z1), (y1, z1, y0, z1), (y0, z1, y0, z0)):
            length = math.hypot(yb - ya, zb - za)
            m = max(1, int(math.ceil(length / edge)))
            # cosine spacing resolves edge singularities
            s = 0.5 * (1 - np.cos(np.linspace(0, math.pi, m + 1)))
            for k in range(m):
                pa = (ya + (yb - ya) * s[k], za + (zb - za) * s[k])
                pb = (ya + (yb - ya) * s[k + 1], za + (zb - za) * s[k + 1])
                segs.append((pa, pb, net))
    nets = sorted({s[2] for s in segs}, key=lambda n: (n != "sig", n))
    if len(nets) != 2:
        raise SingularSystem("per-length capacitance needs exactly two nets")
    N = len(segs)
    c = np.array([[(a[0] + b[0]) / 2, (a[1] + b[1]) / 2] for a, b, _ in segs])
    t = np.array([[(b[0] - a[0]), (b[1] - a[1])] for a, b, _ in segs])
    h = np.linalg.norm(t, axis=1)
    t = t / h[:, None]
    M = np.empty((N, N))
    for j in range(N):
        d = c - c[j]
        u = d @ t[j]
        v = d[:, 0] * (-t[j, 1]) + d[:, 1] * t[j, 0]
        M[:, j] = _segment_log_integral(u, v, h[j]) / h[j]
    P = -0.5 * (M + M.T) / (2 * math.pi * EPS0 * eps_eff)
    A = np.zeros((N + 1, N + 1))
    A[:N, :N] = P
    A[:N, N] = 1.0
    A[N, :N] = 1.0
    rhs = np.zeros(N + 1)
    sig = np.array([s[2] == nets[0] for s in segs])
    rhs[:N] = np.where(sig, 0.5, -0.5)
    x = np.linalg.solve(A, rhs)
    return float(np.sum(x[:N][sig]))
