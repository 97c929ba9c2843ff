"""Linear sampling indicators: single-frequency LSM, MLSM and matched-filtered MLSM.

For a sampling pixel r_p and frequency f_k the far-field equation
``F_k g = G_k(r_p)`` is solved with Tikhonov filter factors; a small ||g||
marks pixels inside the scatterer. MLSM adds the per-frequency indicators
in amplitude. MF-MLSM first projects every transmitter column of F_k onto the
pixel's Green's vector (a receive-side matched filter, which removes the
propagation phase from pixel to receivers) and solves LSM on the filtered data.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .forward import ScatteringDataset, greens_matrix
from .scene import SceneConfig, wavenumber

METHODS = ("LSM_single", "MLSM_parallel", "MF_MLSM")
MF_MODES = ("per_frequency", "stacked", "phase_corrected")
METHOD_ALIASES = {
    "LSM": "LSM_single",
    "LSM_SINGLE": "LSM_single",
    "MLSM": "MLSM_parallel",
    "MLSM_PARALLEL": "MLSM_parallel",
    "MF_MLSM": "MF_MLSM",
    "MF-MLSM": "MF_MLSM",
}
DEFAULT_CAP = 1e12


def canonical_method(name: str) -> str:
    if name in METHODS:
        return name
    key = name.upper().replace("-", "_")
    if key not in METHOD_ALIASES:
        raise ValueError(f"unknown method {name!r}; expected one of {METHODS}")
    return METHOD_ALIASES[key]


@dataclass
class PixelSolve:
    g: np.ndarray
    residual_norm: float
    pixel: tuple[float, float]
    f_index: int | None = None

    @property
    def indicator(self) -> float:
        n2 = float(np.vdot(self.g, self.g).real)
        return 0.0 if n2 == 0 else 1.0 / n2


@dataclass
class IndicatorMap:
    """Indicator values on the DOI grid, ``values[i, j]`` at (x_i, y_j)."""

    values: np.ndarray
    method: str
    alpha: float
    frequencies: tuple[float, ...]
    rx_indices: tuple[int, ...]
    snr_db: float | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def image(self) -> np.ndarray:
        """Values as an image: row 0 is the top (largest y) of the DOI."""
        return self.values.T[::-1, :]

    def to_csv(self) -> str:
        buf = io.StringIO()
        np.savetxt(buf, self.image(), delimiter=",", fmt="%.10e")
        return buf.getvalue()

    def to_pgm(self) -> bytes:
        img = self.image()
        lo, hi = float(img.min()), float(img.max())
        scaled = np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo)
        pix = np.round(scaled * 255.0).astype(np.uint8)
        h, w = pix.shape
        return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "frequencies_hz": list(self.frequencies),
            "rx_indices": list(self.rx_indices),
            "snr_db": self.snr_db,
            "seed": self.seed,
            "shape": list(self.values.shape),
            "min": float(self.values.min()),
            "max": float(self.values.max()),
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True)


def _rx_positions(dataset: ScatteringDataset, scene: SceneConfig):
    return scene.ring.positions[list(dataset.rx_indices)]


def _inv_sq(norms):
    """1/||g||^2 with the zero-data convention 1/0 -> 0."""
    n2 = np.asarray(norms, dtype=float) ** 2
    out = np.zeros_like(n2)
    np.divide(1.0, n2, out=out, where=n2 > 0)
    return out


def lsm_single(dataset: ScatteringDataset, scene: SceneConfig, f_index: int, pixel, alpha: float) -> PixelSolve:
    """Tikhonov-regularised solution of F_k g = G_k(pixel)."""
    fk = dataset.matrices[f_index]
    rhs = greens_matrix(np.asarray(pixel)[None, :], _rx_positions(dataset, scene), dataset.frequencies[f_index])[0]
    g = numerics.tikhonov_solve(numerics.svd(fk), rhs, alpha)
    return PixelSolve(g, float(np.linalg.norm(fk @ g - rhs)), tuple(pixel), f_index)


def mlsm_parallel(dataset: ScatteringDataset, scene: SceneConfig, pixel, alpha: float) -> float:
    """(sum_k ||g_k||^-2)^(1/2) with one alpha for every frequency."""
    total = sum(lsm_single(dataset, scene, k, pixel, alpha).indicator for k in range(len(dataset.frequencies)))
    return float(np.sqrt(total))


def matched_filter_row(dataset: ScatteringDataset, scene: SceneConfig, f_index: int, pixel):
    """Return (G_k^H F_k, ||G_k||^2) for one pixel: one filtered output per transmitter."""
    gk = greens_matrix(np.asarray(pixel)[None, :], _rx_positions(dataset, scene), dataset.frequencies[f_index])[0]
    return gk.conj() @ dataset.matrices[f_index], float(np.vdot(gk, gk).real)


def _mf_rows(dataset, scene, pixel):
    rows = []
    for k in range(len(dataset.frequencies)):
        y, gain = matched_filter_row(dataset, scene, k, pixel)
        rows.append(y / gain)
    return np.array(rows)


def mf_mlsm(dataset: ScatteringDataset, scene: SceneConfig, pixel, alpha: float, mode: str = "per_frequency") -> float:
    """Matched-filtered multi-frequency indicator at one pixel.

    ``per_frequency``: each normalised filtered row m_k solves m_k g_k = 1 and the
    indicators combine as in MLSM. ``stacked``: the rows form one N_f x N_Tx system
    M g = 1 and the indicator is ||g||^-2. ``phase_corrected``: receiver rows of
    F_k and G_k are multiplied by exp(+j k d) before ordinary MLSM.
    """
    if mode == "phase_corrected":
        return float(_phase_corrected_values(dataset, scene, np.asarray(pixel)[None, :], alpha)[0])
    m = _mf_rows(dataset, scene, pixel)
    ones = np.ones(1, dtype=complex)
    if mode == "per_frequency":
        norms = [numerics.tikhonov_norm(numerics.svd(row[None, :]), ones, alpha) for row in m]
        return float(np.sqrt(np.sum(_inv_sq(norms))))
    if mode == "stacked":
        g = numerics.tikhonov_solve(numerics.svd(m), np.ones(len(m), dtype=complex), alpha)
        return float(_inv_sq(np.linalg.norm(g)))
    raise ValueError(f"unknown mf_mode {mode!r}")


# ---- whole-grid evaluation -------------------------------------------------


def normalized_matrices(dataset: ScatteringDataset) -> np.ndarray:
    """Each F_k divided by its Frobenius norm (zero matrices left as is)."""
    fro = np.linalg.norm(dataset.matrices, axis=(1, 2))
    scale = np.where(fro > 0, fro, 1.0)
    return dataset.matrices / scale[:, None, None]


def _chunks(n, size):
    return [slice(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _map_pixels(fn, n_pixels, workers, chunk=256):
    parts = _chunks(n_pixels, chunk)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(fn, parts))
    else:
        out = [fn(p) for p in parts]
    return np.concatenate(out)


def _lsm_inverse_norms(mats, freqs, rx, pts, alpha, workers, f_indices):
    """Per-frequency ||g_k||^-2 for every pixel, one SVD per frequency."""
    out = []
    for k in f_indices:
        dec = numerics.svd(mats[k])

        def chunk(sl, dec=dec, k=k):
            rhs = greens_matrix(pts[sl], rx, freqs[k])
            return _inv_sq(numerics.tikhonov_norm(dec, rhs, alpha))

        out.append(_map_pixels(chunk, len(pts), workers))
    return np.array(out)


def _phase_corrected_values(dataset, scene, pts, alpha, mats=None):
    mats = dataset.matrices if mats is None else mats
    rx = _rx_positions(dataset, scene)
    dist = np.hypot(pts[:, None, 0] - rx[None, :, 0], pts[:, None, 1] - rx[None, :, 1])
    total = np.zeros(len(pts))
    for k, f in enumerate(dataset.frequencies):
        dec = numerics.svd(mats[k])
        corr = np.exp(1j * wavenumber(f) * dist)  # (P, N_rx)
        rhs = corr * greens_matrix(pts, rx, f)
        # SVD of diag(c) F is (diag(c) U) S V^H; project the corrected rhs on it
        cu = corr[:, :, None] * dec.u[None, :, :]
        coef = np.einsum("pmr,pm->pr", cu.conj(), rhs) * (dec.s / (dec.s**2 + alpha**2))
        total += _inv_sq(np.linalg.norm(coef, axis=-1))
    return np.sqrt(total)


def _mf_values(mats, freqs, rx, pts, alpha, mode, workers):
    def chunk(sl):
        rows = []
        for k, f in enumerate(freqs):
            gm = greens_matrix(pts[sl], rx, f)
            gain = np.sum(np.abs(gm) ** 2, axis=1)
            rows.append((gm.conj() @ mats[k]) / gain[:, None])
        m = np.stack(rows, axis=1)  # (chunk, N_f, N_tx)
        if mode == "per_frequency":
            s = np.linalg.norm(m, axis=-1)  # 1 x N_tx system: single singular value
            return np.sqrt(np.sum(_inv_sq(s / (s**2 + alpha**2)), axis=1))
        dec = numerics.svd(m)
        ones = np.ones(m.shape[:2], dtype=complex)
        return _inv_sq(numerics.tikhonov_norm(dec, ones, alpha))

    return _map_pixels(chunk, len(pts), workers)


def run_method(
    dataset: ScatteringDataset,
    scene: SceneConfig,
    method: str,
    alpha: float,
    *,
    mf_mode: str = "per_frequency",
    normalize: bool = True,
    f_index: int = 0,
    cap: float = DEFAULT_CAP,
    workers: int = 1,
) -> IndicatorMap:
    """Evaluate one indicator over every DOI pixel.

    The dataset is restricted to the scene's receivers first. With ``normalize``
    each F_k is scaled to unit Frobenius norm so that alpha is relative to the data.
    """
    method = canonical_method(method)
    if mf_mode not in MF_MODES:
        raise ValueError(f"unknown mf_mode {mf_mode!r}")
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    data = dataset.select_receivers(scene.aperture) if dataset.rx_indices != scene.aperture.rx_indices else dataset
    mats = normalized_matrices(data) if normalize else data.matrices
    freqs = data.frequencies
    rx = _rx_positions(data, scene)
    pts = scene.grid.pixel_centers

    if method == "LSM_single":
        vals = _lsm_inverse_norms(mats, freqs, rx, pts, alpha, workers, [f_index])[0]
        used = (freqs[f_index],)
    elif method == "MLSM_parallel":
        vals = np.sqrt(_lsm_inverse_norms(mats, freqs, rx, pts, alpha, workers, range(len(freqs))).sum(axis=0))
        used = freqs
    elif mf_mode == "phase_corrected":
        vals = _phase_corrected_values(data, scene, pts, alpha, mats)
        used = freqs
    else:
        vals = _mf_values(mats, freqs, rx, pts, alpha, mf_mode, workers)
        used = freqs

    vals = np.minimum(np.nan_to_num(vals, nan=0.0, posinf=cap), cap)
    side = scene.grid.side_pixels
    meta = {"normalize": normalize, "cap": cap, "aperture_deg": round(scene.aperture.degrees(scene.ring.count), 6)}
    if method == "MF_MLSM":
        meta["mf_mode"] = mf_mode
    return IndicatorMap(
        values=vals.reshape(side, side),
        method=method,
        alpha=float(alpha),
        frequencies=tuple(used),
        rx_indices=data.rx_indices,
        snr_db=data.snr_db,
        seed=data.seed,
        meta=meta,
    )


def center_pixel(scene: SceneConfig) -> np.ndarray:
    pts = scene.grid.pixel_centers
    return pts[int(np.argmin(np.hypot(pts[:, 0], pts[:, 1])))]


def select_alpha(
    dataset: ScatteringDataset,
    scene: SceneConfig,
    method: str,
    *,
    normalize: bool = True,
    pixel=None,
) -> numerics.LCurve:
    """L-curve alpha for one (method, scenario), computed at one pixel.

    LSM/MLSM use the median of the per-frequency corner alphas; MF-MLSM uses the
    stacked filtered system, since a 1 x N_Tx row alone has no corner.
    """
    method = canonical_method(method)
    data = dataset.select_receivers(scene.aperture) if dataset.rx_indices != scene.aperture.rx_indices else dataset
    data = ScatteringDataset(
        normalized_matrices(data) if normalize else data.matrices,
        data.frequencies,
        data.rx_indices,
        data.tx_indices,
    )
    pixel = center_pixel(scene) if pixel is None else np.asarray(pixel)
    rx = _rx_positions(data, scene)
    if method == "MF_MLSM":
        m = _mf_rows(data, scene, pixel)
        return numerics.l_curve_alpha(numerics.svd(m), np.ones(len(m), dtype=complex))
    curves = []
    ks = [0] if method == "LSM_single" else range(len(data.frequencies))
    for k in ks:
        rhs = greens_matrix(pixel[None, :], rx, data.frequencies[k])[0]
        curves.append(numerics.l_curve_alpha(numerics.svd(data.matrices[k]), rhs))
    pick = curves[int(np.argsort([c.alpha for c in curves])[len(curves) // 2])]
    return pick
