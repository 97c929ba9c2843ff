"""Figure output for reconstructions and L-curves (files only, no interactive display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import metrics  # noqa: E402

PANEL_ORDER = ("MLSM_parallel", "LSM_single", "MF_MLSM")
SHORT = {"MLSM_parallel": "MLSM", "MF_MLSM": "MF-MLSM", "LSM_single": "LSM"}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def draw_map(ax, imap, scene, threshold="otsu"):
    """Normalised indicator with the true boundary (dashed) and the binarisation contour."""
    hw = scene.grid.half_width
    v = metrics.normalize(imap.values)
    _, tau = metrics.binarize(v, threshold)
    ext = (-hw, hw, -hw, hw)
    im = ax.imshow(v.T, origin="lower", extent=ext, cmap="viridis", vmin=0, vmax=1)
    ax.contour(scene.grid.axis, scene.grid.axis, v.T, levels=[tau], colors="w", linewidths=0.8)
    for s in scene.scatterers:
        ax.add_patch(plt.Circle(s.center, s.radius, fill=False, ls="--", color="r", lw=0.8))
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    return im


def render_panels(spec, results, out_dir):
    """One figure per aperture; panels ordered by method then SNR (high first)."""
    from .scene import ApertureSelection

    by_ap = {}
    for run, imap in results:
        by_ap.setdefault(run.aperture_deg, []).append((run, imap))
    written = []
    for ap, items in sorted(by_ap.items(), key=lambda kv: -kv[0]):
        items.sort(key=lambda ri: (PANEL_ORDER.index(ri[0].method), -(ri[0].snr_db or np.inf)))
        scene = spec.scene.with_aperture(ApertureSelection.from_degrees(ap, spec.scene.ring.count))
        fig, axes = plt.subplots(1, len(items), figsize=(3.4 * len(items), 3.4), squeeze=False)
        for letter, ax, (run, imap) in zip("abcdefgh", axes[0], items):
            im = draw_map(ax, imap, scene, spec.threshold)
            snr = "inf" if run.snr_db is None else f"{run.snr_db:g}"
            ax.set_title(f"({letter}) {SHORT[run.method]}, SNR={snr} dB, a={imap.alpha:.0e}", fontsize=9)
        fig.colorbar(im, ax=axes[0].tolist(), shrink=0.8)
        fig.suptitle(f"Aperture {ap:g} deg")
        written.append(_save(fig, Path(out_dir) / f"aperture_{ap:g}.png"))
    return written


def plot_l_curve(curve, path):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.loglog(curve.residual_norms, curve.solution_norms, ".-", lw=0.8)
    k = int(np.argmin(np.abs(curve.alphas - curve.alpha)))
    ax.loglog(curve.residual_norms[k], curve.solution_norms[k], "ro")
    ax.set_xlabel("residual norm")
    ax.set_ylabel("solution norm")
    ax.set_title(f"alpha = {curve.alpha:.2e}" + (" (fallback)" if curve.degenerate else ""))
    fig.tight_layout()
    return _save(fig, path)
