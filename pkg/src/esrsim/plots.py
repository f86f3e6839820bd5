"""Optional PNG figures next to the CLI's CSV output (Agg backend, no display)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import IoError  # noqa: E402

RC = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    try:
        # no Software tag: keeps PNG bytes stable between runs
        fig.savefig(path, metadata={"Software": None})
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}", str(path)) from None
    finally:
        plt.close(fig)


def plot_sweep(path, freqs, zin, s11, label=""):
    with plt.rc_context(RC):
        fig, (a0, a1) = plt.subplots(2, 1, sharex=True)
        f = np.asarray(freqs) / 1e9
        a0.plot(f, np.real(zin), label=label or "Re(Zin)")
        a0.set_ylabel(r"Re($Z_{in}$) [$\Omega$]")
        a1.plot(f, 20 * np.log10(np.maximum(np.abs(s11), 1e-300)))
        a1.set_ylabel(r"$|S_{11}|$ [dB]")
        a1.set_xlabel("frequency [GHz]")
        if label:
            a0.legend()
        _save(fig, path)


def plot_fraction(path, freqs, r_total, r_antenna):
    with plt.rc_context(RC):
        fig, (a0, a1) = plt.subplots(2, 1, sharex=True)
        f = np.asarray(freqs) / 1e9
        a0.plot(f, r_total, label="total")
        a0.plot(f, r_antenna, label="antenna (de-embedded)")
        a0.set_ylabel(r"R [$\Omega$]")
        a0.legend()
        a1.plot(f, np.asarray(r_antenna) / np.asarray(r_total))
        a1.set_ylabel("antenna fraction")
        a1.set_xlabel("frequency [GHz]")
        _save(fig, path)


def plot_comparison(path, table, columns=("avg_B", "avg_E", "ratio_B_over_E")):
    norm = table.normalized()
    labels = [r.label for r in table.rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        w = 0.8 / len(columns)
        x = np.arange(len(labels))
        for k, c in enumerate(columns):
            vals = [n[c] if np.isfinite(n[c]) else np.nan for n in norm]
            ax.bar(x + (k - 0.5 * (len(columns) - 1)) * w, vals, w, label=c)
        ax.axhline(1.0, color="k", lw=0.6)
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_ylabel(f"normalized to {table.reference}")
        ax.legend()
        _save(fig, path)


def plot_map(path, ys, zs, values, title="", boxes=()):
    """Colour map of a field magnitude on a (y, z) slice; NaN cells are inside conductors."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        m = ax.pcolormesh(np.asarray(ys) * 1e9, np.asarray(zs) * 1e9, np.asarray(values).T, shading="nearest")
        for y0, y1, z0, z1 in boxes:
            ax.add_patch(matplotlib.patches.Rectangle((y0 * 1e9, z0 * 1e9), (y1 - y0) * 1e9, (z1 - z0) * 1e9,
                                                      fill=False, lw=0.6, ec="w"))
        fig.colorbar(m, ax=ax, label=title)
        ax.set_xlabel("y [nm]")
        ax.set_ylabel("z [nm]")
        _save(fig, path)


def plot_probes(path, samples):
    labels = [s.label for s in samples]
    b = [np.sqrt(np.sum(np.abs(np.asarray(s.B, dtype=complex)) ** 2)) for s in samples]
    e = [np.sqrt(np.sum(np.abs(np.asarray(s.E, dtype=complex)) ** 2)) for s in samples]
    with plt.rc_context(RC):
        fig, (a0, a1) = plt.subplots(1, 2)
        a0.bar(labels, np.asarray(b) * 1e3)
        a0.set_ylabel("|B| [mT]")
        a1.bar(labels, e)
        a1.set_ylabel("|E| [V/m]")
        _save(fig, path)
