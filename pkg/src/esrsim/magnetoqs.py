"""Magnetoquasistatic filament solver (PEEC style).

Conductors become bundles of axis-parallel rectangular filaments joined
at nodes.  Z = R + j*omega*L_partial is assembled densely and solved with
modified nodal analysis for a terminal current; B follows from the
closed-form finite-segment Biot-Savart law.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceFailure,
    NoPortNets,
    OverlappingDistinctFilaments,
    PointInsideConductor,
    SingularSystem,
    ZeroConductivity,
)
from .scene import FLOATING, GEOM_TOL, conductivity_at_temperature

MU0 = 4e-7 * math.pi

# transverse centre distance (in units of the largest cross-section edge)
# below which the exact bar formula is used instead of filament quadrature
NEAR_FACTOR = 3.0
# longest length/edge ratio fed to the bar formula before splitting
MAX_BAR_ASPECT = 1000.0

_GL_CACHE = {}


def gauss_legendre(n):
    """Nodes on [-1/2, 1/2] and weights summing to 1."""
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * x, 0.5 * w)
    return _GL_CACHE[n]


@dataclass(frozen=True)
class Filament:
    start: tuple
    end: tuple
    cross_section: tuple
    conductivity: float
    parent_brick: str
    node_start: int = -1
    node_end: int = -1

    @property
    def axis(self):
        d = np.subtract(self.end, self.start)
        return int(np.argmax(np.abs(d)))

    @property
    def direction(self):
        return 1.0 if self.end[self.axis] > self.start[self.axis] else -1.0

    @property
    def length(self):
        return abs(self.end[self.axis] - self.start[self.axis])

    def box(self):
        """(lo, hi) corners of the filament volume."""
        a = self.axis
        t1, t2 = (a + 1) % 3, (a + 2) % 3
        lo = np.minimum(self.start, self.end).astype(float)
        hi = np.maximum(self.start, self.end).astype(float)
        w, h = self.cross_section
        c = 0.5 * (np.asarray(self.start) + np.asarray(self.end))
        lo[t1], hi[t1] = c[t1] - 0.5 * w, c[t1] + 0.5 * w
        lo[t2], hi[t2] = c[t2] - 0.5 * h, c[t2] + 0.5 * h
        return lo, hi


@dataclass
class FilamentMesh:
    """Filaments plus the node graph joining them."""

    filaments: list
    n_nodes: int
    positive_node: int
    negative_node: int
    node_xyz: np.ndarray = None

    def __len__(self):
        return len(self.filaments)

    def __iter__(self):
        return iter(self.filaments)

    def __getitem__(self, k):
        return self.filaments[k]

    def boxes(self):
        lo = np.empty((len(self.filaments), 3))
        hi = np.empty_like(lo)
        for k, f in enumerate(self.filaments):
            lo[k], hi[k] = f.box()
        return lo, hi

    def incidence(self):
        a = np.zeros((self.n_nodes, len(self.filaments)))
        for k, f in enumerate(self.filaments):
            a[f.node_start, k] += 1.0
            a[f.node_end, k] -= 1.0
        return a


@dataclass
class FilamentSystem:
    mesh: FilamentMesh
    R: np.ndarray
    L: np.ndarray
    frequency: float

    @property
    def filaments(self):
        return self.mesh.filaments

    @property
    def omega(self):
        return 2 * math.pi * self.frequency

    @property
    def Z(self):
        return self.R + 1j * self.omega * self.L


@dataclass
class CurrentSolution:
    currents: np.ndarray
    node_voltages: np.ndarray
    frequency: float
    terminal_current: complex
    port_voltage: complex
    kcl_residual: float = 0.0
    filaments: list = field(default=None, repr=False)

    @property
    def port_impedance(self):
        if self.terminal_current == 0:
            return complex("nan")
        return self.port_voltage / self.terminal_current

    def ohmic_loss(self, system):
        """Time-averaged dissipated power, peak-phasor convention."""
        return 0.5 * float(np.sum(np.diag(system.R) * np.abs(self.currents) ** 2))


# ---------------------------------------------------------------- discretization

class _Nodes:
    def __init__(self):
        self.parent = []
        self.xyz = []

    def new(self, xyz):
        self.parent.append(len(self.parent))
        self.xyz.append(np.asarray(xyz, dtype=float))
        return len(self.parent) - 1

    def find(self, k):
        while self.parent[k] != k:
            self.parent[k] = self.parent[self.parent[k]]
            k = self.parent[k]
        return k

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _breakpoints(lo, hi, segments, extra):
    pts = list(np.linspace(lo, hi, segments + 1))
    for t in extra:
        if lo + GEOM_TOL < t < hi - GEOM_TOL:
            pts.append(t)
    pts = np.unique(np.round(np.array(pts) / GEOM_TOL) * GEOM_TOL)
    keep = [pts[0]]
    for t in pts[1:]:
        if t - keep[-1] > 1e3 * GEOM_TOL:
            keep.append(t)
    keep[-1] = hi
    keep[0] = lo
    return np.array(keep)


def discretize_filaments(scene, brick_subdivision=(3, 3), segments_per_length=1, port=None,
                         temperature=None):
    """Filament mesh of every port-connected, non-floating brick.

    Each brick is cut into ``segments_per_length`` equal segments along its
    current axis (plus extra cuts where other bricks attach to its side);
    each segment carries nx*ny parallel filaments between two nodes.
    """
    nx, ny = brick_subdivision
    if nx < 1 or ny < 1 or segments_per_length < 1:
        raise ValueError("subdivision counts must be >= 1")
    if not scene.ports:
        raise NoPortNets("scene has no port")
    port = port or scene.ports[0]
    temperature = scene.temperature if temperature is None else temperature
    ids = set(scene.port_connected_ids())
    bricks = [b for b in scene.conductors if b.id in ids]
    if not bricks:
        raise NoPortNets("no bricks are connected to a port net")
    by_id = {b.id: b for b in bricks}

    side_cuts = {b.id: [] for b in bricks}
    relevant = [c for c in scene.contacts if c[0] in by_id and c[1] in by_id]
    for a_id, b_id, k, plo, phi in relevant:
        for bid in (a_id, b_id):
            ax = by_id[bid].current_axis
            if ax != k:
                side_cuts[bid].append(0.5 * (plo[ax] + phi[ax]))

    nodes = _Nodes()
    chain = {}
    for b in bricks:
        ax = b.current_axis
        ts = _breakpoints(b.lo[ax], b.hi[ax], segments_per_length, side_cuts[b.id])
        ids_ = []
        for t in ts:
            p = b.center.copy()
            p[ax] = t
            ids_.append(nodes.new(p))
        chain[b.id] = (ts, ids_)

    def node_at(bid, t):
        ts, ids_ = chain[bid]
        k = int(np.argmin(np.abs(ts - t)))
        return ids_[k]

    for a_id, b_id, k, plo, phi in relevant:
        pc = 0.5 * (np.asarray(plo) + np.asarray(phi))
        na = node_at(a_id, pc[by_id[a_id].current_axis])
        nb = node_at(b_id, pc[by_id[b_id].current_axis])
        nodes.union(na, nb)
    for b in bricks:
        for t, own_end, other_end in b.ties:
            if t not in by_id:
                continue
            na = chain[b.id][1][0 if own_end == "lo" else -1]
            nb = chain[t][1][0 if other_end == "lo" else -1]
            nodes.union(na, nb)

    axis_name, coord = port.terminal_plane or ("x", min(
        b.lo[0] for b in bricks if b.net in (port.positive_net, port.negative_net)))
    pax = "xyz".index(axis_name)
    terminals = {port.positive_net: [], port.negative_net: []}
    for b in bricks:
        if b.net not in terminals or b.current_axis != pax:
            continue
        ts, ids_ = chain[b.id]
        if abs(ts[0] - coord) <= 1e3 * GEOM_TOL:
            terminals[b.net].append(ids_[0])
        elif abs(ts[-1] - coord) <= 1e3 * GEOM_TOL:
            terminals[b.net].append(ids_[-1])
    if not terminals[port.positive_net] or not terminals[port.negative_net]:
        raise NoPortNets(f"port {port.id!r} has no terminal on plane {axis_name}={coord:g}")
    for net in terminals:
        first = terminals[net][0]
        for other in terminals[net][1:]:
            nodes.union(first, other)

    roots = sorted({nodes.find(k) for k in range(len(nodes.parent))})
    renum = {r: i for i, r in enumerate(roots)}
    node_id = [renum[nodes.find(k)] for k in range(len(nodes.parent))]
    node_xyz = np.array([nodes.xyz[r] for r in roots])

    filaments = []
    for b in bricks:
        ax = b.current_axis
        t1, t2 = (ax + 1) % 3, (ax + 2) % 3
        sigma = conductivity_at_temperature(b.material, temperature)
        ts, ids_ = chain[b.id]
        e1 = np.linspace(b.lo[t1], b.hi[t1], nx + 1)
        e2 = np.linspace(b.lo[t2], b.hi[t2], ny + 1)
        for s in range(len(ts) - 1):
            for i in range(nx):
                for j in range(ny):
                    start = np.zeros(3)
                    start[ax] = ts[s]
                    start[t1] = 0.5 * (e1[i] + e1[i + 1])
                    start[t2] = 0.5 * (e2[j] + e2[j + 1])
                    end = start.copy()
                    end[ax] = ts[s + 1]
                    filaments.append(Filament(
                        tuple(start), tuple(end), (e1[i + 1] - e1[i], e2[j + 1] - e2[j]),
                        sigma, b.id, node_id[ids_[s]], node_id[ids_[s + 1]],
                    ))
    pos = node_id[terminals[port.positive_net][0]]
    neg = node_id[terminals[port.negative_net][0]]
    return FilamentMesh(filaments, len(roots), pos, neg, node_xyz)


# ---------------------------------------------------------------- inductance kernels

def _bar_f(x, y, z):
    """Hoer & Love primitive for the mutual inductance of parallel bars."""
    x2, y2, z2 = x * x, y * y, z * z
    r = np.sqrt(x2 + y2 + z2)

    def ash(a, b2, c2):
        d = np.sqrt(b2 + c2)
        safe = np.where(d > 0, d, 1.0)
        return np.where(d > 0, np.arcsinh(a / safe), 0.0)

    def at(a, b, c):
        den = c * r
        safe = np.where(den != 0, den, 1.0)
        return np.where(den != 0, np.arctan(a * b / safe), 0.0)

    return ((y2 * z2 / 4 - y2 * y2 / 24 - z2 * z2 / 24) * x * ash(x, y2, z2)
            + (x2 * z2 / 4 - x2 * x2 / 24 - z2 * z2 / 24) * y * ash(y, x2, z2)
            + (x2 * y2 / 4 - x2 * x2 / 24 - y2 * y2 / 24) * z * ash(z, x2, y2)
            + (x2 * x2 + y2 * y2 + z2 * z2 - 3 * x2 * y2 - 3 * y2 * z2 - 3 * x2 * z2) * r / 60
            - x * y * z * z2 / 6 * at(x, y, z)
            - x * y * y2 * z / 6 * at(x, z, y)
            - x * x2 * y * z / 6 * at(y, z, x))


_SIGN = np.array([(-1.0) ** (i + j + k) for i in range(4) for j in range(4) for k in range(4)]).reshape(4, 4, 4)


def _bar_mutual(lo1, hi1, lo2, hi2):
    """Exact partial mutual inductance of parallel bars (local coords, current along index 2).

    Arrays of shape (P, 3).  Accurate while length/edge stays below ~1e3.
    """
    scale = np.max(np.abs(np.concatenate([hi1 - lo1, hi2 - lo2], axis=1)), axis=1)
    base = lo1
    l1 = (lo1 - base) / scale[:, None]
    h1 = (hi1 - base) / scale[:, None]
    l2 = (lo2 - base) / scale[:, None]
    h2 = (hi2 - base) / scale[:, None]
    a, b, ln1 = (h1 - l1).T
    A, B, ln2 = (h2 - l2).T
    E, P, l3 = (l2 - l1).T
    q = np.stack([E - a, E + A - a, E + A, E], axis=1)
    r = np.stack([P - b, P + B - b, P + B, P], axis=1)
    s = np.stack([l3 - ln1, l3 + ln2 - ln1, l3 + ln2, l3], axis=1)
    vals = _bar_f(q[:, :, None, None], r[:, None, :, None], s[:, None, None, :])
    tot = np.sum(vals * _SIGN, axis=(1, 2, 3))
    return MU0 / (4 * math.pi) * tot / (a * b * A * B) * scale


def _filament_pair(d, s, l1, l2):
    """Neumann integral of two parallel line filaments, transverse offset d."""
    def g(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(d > 0, u * np.arcsinh(u / np.where(d > 0, d, 1.0)) - np.sqrt(u * u + d * d),
                         np.where(u != 0, np.abs(u) * np.log(np.abs(np.where(u != 0, u, 1.0))) - np.abs(u), 0.0))
        return v
    return MU0 / (4 * math.pi) * (-g(s + l2 - l1) + g(s - l1) + g(s + l2) - g(s))


def _gl_mutual(lo1, hi1, lo2, hi2, n):
    """Cross-section Gauss-Legendre average of the line-filament formula."""
    x, w = gauss_legendre(n)
    c1 = 0.5 * (lo1 + hi1)
    c2 = 0.5 * (lo2 + hi2)
    d1 = hi1 - lo1
    d2 = hi2 - lo2
    l1 = d1[:, 2]
    l2 = d2[:, 2]
    s = lo2[:, 2] - lo1[:, 2]
    tot = np.zeros(len(lo1))
    for i in range(n):
        for j in range(n):
            u1 = c1[:, 0] + x[i] * d1[:, 0]
            v1 = c1[:, 1] + x[j] * d1[:, 1]
            for k in range(n):
                for m in range(n):
                    u2 = c2[:, 0] + x[k] * d2[:, 0]
                    v2 = c2[:, 1] + x[m] * d2[:, 1]
                    dist = np.hypot(u2 - u1, v2 - v1)
                    tot += w[i] * w[j] * w[k] * w[m] * _filament_pair(dist, s, l1, l2)
    return tot


def _local_mutual(lo1, hi1, lo2, hi2):
    """Mutual inductance for parallel bars given in local coords (P, 3)."""
    out = np.zeros(len(lo1))
    if len(lo1) == 0:
        return out
    size = np.max(np.concatenate([hi1[:, :2] - lo1[:, :2], hi2[:, :2] - lo2[:, :2]], axis=1), axis=1)
    dc = np.hypot(*(0.5 * (lo2 + hi2 - lo1 - hi1))[:, :2].T)
    ratio = dc / size
    near = ratio < NEAR_FACTOR
    if near.any():
        idx = np.nonzero(near)[0]
        edge = np.min(np.concatenate([hi1[idx, :2] - lo1[idx, :2], hi2[idx, :2] - lo2[idx, :2]], axis=1), axis=1)
        longest = np.maximum(hi1[idx, 2] - lo1[idx, 2], hi2[idx, 2] - lo2[idx, 2])
        pieces = np.maximum(1, np.ceil(longest / edge / MAX_BAR_ASPECT)).astype(int)
        simple = pieces == 1
        if simple.any():
            k = idx[simple]
            out[k] = _bar_mutual(lo1[k], hi1[k], lo2[k], hi2[k])
        for k, p in zip(idx[~simple], pieces[~simple]):
            out[k] = _split_mutual(lo1[k], hi1[k], lo2[k], hi2[k], p)
    for n, lo_r, hi_r in ((4, NEAR_FACTOR, 6.0), (3, 6.0, 15.0), (2, 15.0, 50.0), (1, 50.0, np.inf)):
        sel = (ratio >= lo_r) & (ratio < hi_r)
        if sel.any():
            out[sel] = _gl_mutual(lo1[sel], hi1[sel], lo2[sel], hi2[sel], n)
    return out


def _split_mutual(lo1, hi1, lo2, hi2, pieces):
    """Cut both bars into ``pieces`` longitudinal parts and sum all part pairs."""
    def cut(lo, hi):
        t = np.linspace(lo[2], hi[2], pieces + 1)
        los = np.repeat(lo[None, :], pieces, axis=0)
        his = np.repeat(hi[None, :], pieces, axis=0)
        los[:, 2], his[:, 2] = t[:-1], t[1:]
        return los, his
    a_lo, a_hi = cut(lo1, hi1)
    b_lo, b_hi = cut(lo2, hi2)
    ii, jj = np.meshgrid(np.arange(pieces), np.arange(pieces), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    return float(np.sum(_local_mutual(a_lo[ii], a_hi[ii], b_lo[jj], b_hi[jj])))


def _to_local(lo, hi, axis):
    perm = [(axis + 1) % 3, (axis + 2) % 3, axis]
    return lo[..., perm], hi[..., perm]


def partial_inductance(f_i, f_j):
    """Partial (mutual or self) inductance of two axis-parallel filaments [H]."""
    if f_i.axis != f_j.axis:
        return 0.0
    lo1, hi1 = f_i.box()
    lo2, hi2 = f_j.box()
    if f_i is not f_j and f_i != f_j and np.all(np.minimum(hi1, hi2) - np.maximum(lo1, lo2) > GEOM_TOL):
        raise OverlappingDistinctFilaments(f"filaments of {f_i.parent_brick!r} and {f_j.parent_brick!r} overlap")
    a = f_i.axis
    # fixed argument order so M_ij == M_ji bit for bit
    if (tuple(lo2), tuple(hi2)) < (tuple(lo1), tuple(hi1)):
        lo1, hi1, lo2, hi2 = lo2, hi2, lo1, hi1
    l1, h1 = _to_local(lo1[None], hi1[None], a)
    l2, h2 = _to_local(lo2[None], hi2[None], a)
    return float(_local_mutual(l1, h1, l2, h2)[0]) * f_i.direction * f_j.direction


def inductance_matrix(filaments):
    """Dense partial-inductance matrix, exactly symmetric."""
    n = len(filaments)
    lo = np.empty((n, 3))
    hi = np.empty((n, 3))
    axis = np.empty(n, dtype=int)
    sign = np.empty(n)
    for k, f in enumerate(filaments):
        lo[k], hi[k] = f.box()
        axis[k] = f.axis
        sign[k] = f.direction
    L = np.zeros((n, n))
    for a in range(3):
        idx = np.nonzero(axis == a)[0]
        if len(idx) == 0:
            continue
        llo, lhi = _to_local(lo[idx], hi[idx], a)
        ii, jj = np.triu_indices(len(idx))
        if len(idx) > 1:
            ov = np.all(np.minimum(lhi[ii], lhi[jj]) - np.maximum(llo[ii], llo[jj]) > GEOM_TOL, axis=1) & (ii != jj)
            if ov.any():
                k = np.nonzero(ov)[0][0]
                raise OverlappingDistinctFilaments(
                    f"filaments {idx[ii[k]]} and {idx[jj[k]]} overlap")
        vals = np.empty(len(ii))
        chunk = 20000
        for start in range(0, len(ii), chunk):
            sl = slice(start, start + chunk)
            vals[sl] = _local_mutual(llo[ii[sl]], lhi[ii[sl]], llo[jj[sl]], lhi[jj[sl]])
        gi, gj = idx[ii], idx[jj]
        vals = vals * sign[gi] * sign[gj]
        L[gi, gj] = vals
        L[gj, gi] = vals
    return L


def assemble_impedance(filaments, frequency):
    """R (diagonal) and L_partial for a filament mesh at ``frequency`` [Hz]."""
    if frequency < 0:
        raise ValueError("frequency must be >= 0")
    mesh = filaments if isinstance(filaments, FilamentMesh) else FilamentMesh(list(filaments), 0, -1, -1)
    r = np.empty(len(mesh))
    for k, f in enumerate(mesh):
        if not f.conductivity > 0:
            raise ZeroConductivity(f"filament of {f.parent_brick!r} has zero conductivity")
        r[k] = f.length / (f.conductivity * f.cross_section[0] * f.cross_section[1])
    return FilamentSystem(mesh, np.diag(r), inductance_matrix(mesh.filaments), float(frequency))


# ---------------------------------------------------------------- solve

def solve_currents(system, terminal_current):
    """Modified nodal analysis: Z I - A^T V = 0, A I = J, negative terminal grounded."""
    mesh = system.mesh
    if mesh.n_nodes == 0:
        raise SingularSystem("filament mesh has no node graph")
    nf = len(mesh)
    A = mesh.incidence()
    keep = [k for k in range(mesh.n_nodes) if k != mesh.negative_node]
    Ar = A[keep]
    n = nf + len(keep)
    M = np.zeros((n, n), dtype=complex)
    M[:nf, :nf] = system.Z
    M[:nf, nf:] = -Ar.T
    M[nf:, :nf] = Ar
    # solve for 1 A and scale: exact linearity in the terminal current
    J = np.zeros(mesh.n_nodes)
    J[mesh.positive_node] = 1.0
    J[mesh.negative_node] = -1.0
    rhs = np.zeros(n, dtype=complex)
    rhs[nf:] = J[keep]
    try:
        x = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"filament system is singular: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise SingularSystem("filament system produced non-finite currents")
    # one step of iterative refinement
    x = x + np.linalg.solve(M, rhs - M @ x)
    resid = float(np.max(np.abs(A @ x[:nf] - J))) if nf else 0.0
    if resid > 1e-10:
        raise ConvergenceFailure(f"KCL residual {resid:.3e} per ampere exceeds tolerance")
    tc = complex(terminal_current)
    currents = tc * x[:nf]
    v = np.zeros(mesh.n_nodes, dtype=complex)
    v[keep] = tc * x[nf:]
    resid *= abs(tc)
    return CurrentSolution(
        currents=currents,
        node_voltages=v,
        frequency=system.frequency,
        terminal_current=complex(terminal_current),
        port_voltage=complex(v[mesh.positive_node] - v[mesh.negative_node]),
        kcl_residual=resid,
        filaments=mesh.filaments,
    )


# ---------------------------------------------------------------- Biot-Savart

def _segment_field(points, a, b):
    """Per-unit-current B of straight segments a->b at points: (P, F, 3)."""
    r1 = points[:, None, :] - a[None, :, :]
    r2 = points[:, None, :] - b[None, :, :]
    n1 = np.linalg.norm(r1, axis=2)
    n2 = np.linalg.norm(r2, axis=2)
    cross = np.cross(r1, r2)
    den = n1 * n2 * (n1 * n2 + np.einsum("pfk,pfk->pf", r1, r2))
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(den > 0, (n1 + n2) / np.where(den > 0, den, 1.0), 0.0)
    return MU0 / (4 * math.pi) * cross * fac[:, :, None]


def b_field(points, filaments, currents, near_order=3):
    """Complex B [T] at each point from filament currents.

    Points closer than 3 cross-section edges to a filament use an
    n x n Gauss-Legendre bundle of sub-lines across its section.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nfil = len(filaments)
    if nfil == 0:
        return np.zeros((len(pts), 3), dtype=complex)
    a = np.array([f.start for f in filaments], dtype=float)
    b = np.array([f.end for f in filaments], dtype=float)
    lo = np.empty((nfil, 3))
    hi = np.empty((nfil, 3))
    axes = np.empty(nfil, dtype=int)
    for k, f in enumerate(filaments):
        lo[k], hi[k] = f.box()
        axes[k] = f.axis
    inside = np.all((pts[:, None, :] > lo[None] + GEOM_TOL) & (pts[:, None, :] < hi[None] - GEOM_TOL), axis=2)
    if inside.any():
        p, k = np.argwhere(inside)[0]
        raise PointInsideConductor(f"point {pts[p].tolist()} lies inside filament of {filaments[k].parent_brick!r}")
    cur = np.asarray(currents, dtype=complex)
    G = _segment_field(pts, a, b)
    # near-field correction
    size = np.max(hi - lo - np.eye(3)[axes] * (hi - lo), axis=1)
    mid = 0.5 * (lo + hi)
    delta = pts[:, None, :] - mid[None]
    trans = delta.copy()
    trans[:, np.arange(nfil), axes] = 0.0
    dist_t = np.linalg.norm(trans, axis=2)
    half_len = 0.5 * (hi - lo)[np.arange(nfil), axes]
    along = np.abs(delta[:, np.arange(nfil), axes]) - half_len[None]
    dist = np.hypot(dist_t, np.maximum(along, 0.0))
    near = dist < 3.0 * size[None]
    if near.any():
        x, w = gauss_legendre(near_order)
        for p, k in np.argwhere(near):
            ax = axes[k]
            t1, t2 = (ax + 1) % 3, (ax + 2) % 3
            acc = np.zeros(3)
            for i in range(near_order):
                for j in range(near_order):
                    off = np.zeros(3)
                    off[t1] = x[i] * (hi[k, t1] - lo[k, t1])
                    off[t2] = x[j] * (hi[k, t2] - lo[k, t2])
                    acc += w[i] * w[j] * _segment_field(pts[p:p + 1], a[k:k + 1] + off, b[k:k + 1] + off)[0, 0]
            G[p, k] = acc
    return np.einsum("pfk,f->pk", G, cur)


def biot_savart(solution, filaments, point):
    """B phasor [T] at one point."""
    fils = filaments.filaments if isinstance(filaments, FilamentMesh) else list(filaments)
    return b_field(np.asarray(point, dtype=float)[None], fils, solution.currents)[0]


def b_field_at_probes(scene, solution, probes):
    """FieldSample list (B filled) for every point of ``probes``."""
    from .scene import FieldSample

    pts = probes.as_array()
    B = b_field(pts, solution.filaments, solution.currents)
    return [FieldSample(tuple(p), tuple(bv), None, probes.label) for p, bv in zip(pts, B)]


# ---------------------------------------------------------------- per-unit-length loop

def rect_self_gmd(w, h):
    """Geometric mean distance of a rectangle from itself."""
    d = math.hypot(w, h)
    ln = (math.log(d)
          - (w * w / (12 * h * h)) * math.log(1 + h * h / (w * w))
          - (h * h / (12 * w * w)) * math.log(1 + w * w / (h * h))
          + (2 * w / (3 * h)) * math.atan(h / w)
          + (2 * h / (3 * w)) * math.atan(w / h)
          - 25.0 / 12.0)
    return math.exp(ln)


def _cells(section, subdivision, temperature):
    nx, ny = subdivision
    cells = []
    for (y0, y1, z0, z1), net, mat in section:
        sigma = conductivity_at_temperature(mat, temperature)
        ey = np.linspace(y0, y1, nx + 1)
        ez = np.linspace(z0, z1, ny + 1)
        for i in range(nx):
            for j in range(ny):
                cells.append((ey[i], ey[i + 1], ez[j], ez[j + 1], net, sigma))
    return cells


def per_length_inductance(cells):
    """2-d partial inductance per length [H/m] up to a common additive constant."""
    n = len(cells)
    box = np.array([c[:4] for c in cells], dtype=float)
    cy = 0.5 * (box[:, 0] + box[:, 1])
    cz = 0.5 * (box[:, 2] + box[:, 3])
    wy = box[:, 1] - box[:, 0]
    wz = box[:, 3] - box[:, 2]
    size = np.maximum(wy, wz)
    dist = np.hypot(cy[:, None] - cy[None], cz[:, None] - cz[None])
    with np.errstate(divide="ignore"):
        lnr = np.log(np.where(dist > 0, dist, 1.0))
    near = dist < 3.0 * np.maximum(size[:, None], size[None])
    x, w = gauss_legendre(5)
    for i, j in zip(*np.nonzero(np.triu(near, 1))):
        yi = cy[i] + x * wy[i]
        zi = cz[i] + x * wz[i]
        yj = cy[j] + x * wy[j]
        zj = cz[j] + x * wz[j]
        Y1, Z1, Y2, Z2 = np.meshgrid(yi, zi, yj, zj, indexing="ij")
        W = np.einsum("a,b,c,d->abcd", w, w, w, w)
        val = float(np.sum(W * 0.5 * np.log((Y1 - Y2) ** 2 + (Z1 - Z2) ** 2)))
        lnr[i, j] = lnr[j, i] = val
    for i in range(n):
        lnr[i, i] = math.log(rect_self_gmd(wy[i], wz[i]))
    return -MU0 / (2 * math.pi) * lnr


def loop_impedance_per_length(section, frequency, temperature, subdivision=(3, 3)):
    """Series loop impedance per length [ohm/m] of a two-net cross-section.

    ``section`` is [((y0, y1, z0, z1), net, Material)] with nets 'sig' and
    one return net; all strips of a net are tied at both ends.
    Returns (Z', cells, currents) with currents normalised to 1 A.
    """
    cells = _cells(section, subdivision, temperature)
    nets = sorted({c[4] for c in cells}, key=lambda s: (s != "sig", s))
    if len(nets) != 2:
        raise SingularSystem("per-length solve needs exactly two nets")
    n = len(cells)
    area = np.array([(c[1] - c[0]) * (c[3] - c[2]) for c in cells])
    r = 1.0 / (np.array([c[5] for c in cells]) * area)
    L = per_length_inductance(cells)
    omega = 2 * math.pi * frequency
    Z = np.diag(r) + 1j * omega * L
    e = np.zeros((n, 2))
    for k, c in enumerate(cells):
        e[k, nets.index(c[4])] = 1.0
    M = np.zeros((n + 2, n + 2), dtype=complex)
    M[:n, :n] = Z
    M[:n, n:] = -e
    M[n:, :n] = e.T
    rhs = np.zeros(n + 2, dtype=complex)
    rhs[n] = 1.0
    rhs[n + 1] = -1.0
    x = np.linalg.solve(M, rhs)
    cur = x[:n]
    zloop = x[n] - x[n + 1]
    if frequency == 0:
        # DC current split; inductance from stored energy
        zloop = complex(zloop.real, 0.0)
        lloop = float(np.real(cur.conj() @ L @ cur))
        return zloop, lloop, cells, cur
    return zloop, float(zloop.imag / omega), cells, cur
